//! Desk-scale checks of the lemma, SELECT, stopping, index and sampler
//! guarantees. Each check returns a pass/fail outcome with a short detail.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diameter::{avg_diam_exact, avg_dist_to_target_exact, stopping_check_mc};
use crate::distance::MatrixDistance;
use crate::ensemble::WeightedEnsemble;
use crate::error::Result;
use crate::instances::finite::{FiniteLabeledSpace, RandomFiniteInstance};
use crate::instances::interval::Interval;
use crate::learner::expected_after_update;
use crate::oracle::{MassartOracle, Oracle};
use crate::posterior::UpdateRule;
use crate::rng::RngStream;
use crate::samplers::mala::{burn_in, mala_step, MalaChain};
use crate::samplers::LogConcaveTarget;
use crate::select::{exact_average_split, pair_bound, select};
use crate::space::Atom;
use crate::splitting::{verify_interval_index, verify_ranking_index};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: u32, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

const TOL: f64 = 1e-9;

/// Random finite Massart instance: 2..=12 structures, 2..=8 atoms, binary
/// responses, margin in [0.1, 1].
fn massart_instance(rng: &mut RngStream) -> Result<(RandomFiniteInstance, MassartOracle<usize>, f64)> {
    let n = rng.random_range(2..=12);
    let m = rng.random_range(2..=8);
    let inst = RandomFiniteInstance::generate(n, m, 2, rng)?;
    let lambda = 0.1 + 0.9 * rng.random::<f64>();
    let oracle = MassartOracle::new(inst.g_star, lambda, 2)?;
    Ok((inst, oracle, lambda))
}

/// Expected distance to the target is at most avg-diam over the target mass.
pub fn check_distance_to_target(n_ensembles: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(1, "distance to target vs average diameter", || {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..n_ensembles {
            let n = rng.random_range(1..=32);
            let inst = RandomFiniteInstance::generate(n, 1, 2, rng)?;
            let lhs = avg_dist_to_target_exact(&inst.prior, &inst.g_star, &inst.distance);
            let rhs = avg_diam_exact(&inst.prior, &inst.distance) / inst.prior.weight(inst.g_star);
            worst = worst.max(lhs - rhs);
        }
        Ok((worst <= TOL, format!("{n_ensembles} ensembles, max(lhs - rhs) = {worst:.3e}")))
    })
}

/// `E_y[1/pi_t(g*)^k] <= 1/pi_{t-1}(g*)^k` with `beta = lambda/k`, every atom.
pub fn check_target_mass_supermartingale(n_instances: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(2, "inverse target mass supermartingale", || {
        let mut worst = f64::NEG_INFINITY;
        let mut checks = 0;
        for _ in 0..n_instances {
            let (inst, oracle, lambda) = massart_instance(rng)?;
            let g = inst.g_star;
            for k in [1i32, 2] {
                let rule = UpdateRule::Soft01 { beta: lambda / k as f64 };
                let before = inst.prior.weight(g).powi(-k);
                for a in 0..inst.space.n_atoms() {
                    let atom = Atom::new(a as u64, a);
                    let law = oracle.law(&inst.space, &atom)?;
                    let after = expected_after_update(&inst.prior, &inst.space, &atom, &law, rule, |e| {
                        e.weight(g).powi(-k)
                    })?;
                    worst = worst.max((after - before) / before);
                    checks += 1;
                }
            }
        }
        Ok((
            worst <= TOL,
            format!("{checks} (instance, k, atom) cases, max relative increase {worst:.3e}"),
        ))
    })
}

/// `E_y[avg-diam/pi(g*)^2]` drops by `1 - rho lambda beta / 2` with
/// `beta = lambda / 10` on an atom of exact split `rho`.
pub fn check_potential_drop(n_instances: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(3, "expected potential drop", || {
        let mut worst = f64::NEG_INFINITY;
        let mut checks = 0;
        for _ in 0..n_instances {
            let (inst, oracle, lambda) = massart_instance(rng)?;
            let g = inst.g_star;
            let beta = lambda / 10.0;
            let rule = UpdateRule::Soft01 { beta };
            let potential =
                |e: &WeightedEnsemble<usize>| avg_diam_exact(e, &inst.distance) / e.weight(g).powi(2);
            let before = potential(&inst.prior);
            if !(before > 0.0) {
                continue;
            }
            for a in 0..inst.space.n_atoms() {
                let atom = Atom::new(a as u64, a);
                let rho = exact_average_split(&inst.prior, &atom, &inst.distance, &inst.space)?;
                let law = oracle.law(&inst.space, &atom)?;
                let after = expected_after_update(&inst.prior, &inst.space, &atom, &law, rule, potential)?;
                let bound = (1.0 - rho * lambda * beta / 2.0) * before;
                worst = worst.max((after - bound) / before);
                checks += 1;
            }
        }
        Ok((
            worst <= TOL,
            format!("{checks} (instance, atom) cases, max relative excess {worst:.3e}"),
        ))
    })
}

/// Four structures at unit distance; atom 0 splits them 2 | 2 (split 5/6),
/// atoms 1..=9 are answered identically by everyone.
pub fn five_sixths_instance() -> (FiniteLabeledSpace, WeightedEnsemble<usize>, MatrixDistance) {
    let tables = (0..4)
        .map(|g| {
            let mut row = vec![0; 10];
            row[0] = (g >= 2) as usize;
            row
        })
        .collect();
    let space = FiniteLabeledSpace::new(tables, 2).expect("valid tables");
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| (i != j) as u8 as f64).collect())
        .collect();
    (
        space,
        WeightedEnsemble::uniform(vec![0, 1, 2, 3]).expect("non-empty"),
        MatrixDistance::from_rows(&rows),
    )
}

/// SELECT returns a `rho/2`-splitting atom within the pair bound.
pub fn check_select(n_trials: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(4, "select on the 5/6 instance", || {
        let (space, e, d) = five_sixths_instance();
        let atoms: Vec<Atom<usize>> = (0..10).map(|a| Atom::new(a as u64, a)).collect();
        let (alpha, delta) = (0.5, 0.05);
        let rho = exact_average_split(&e, &atoms[0], &d, &space)?;
        let bound = pair_bound(alpha, delta, atoms.len(), 2, rho, avg_diam_exact(&e, &d));
        let (mut good, mut within) = (0, 0);
        for t in 0..n_trials {
            let mut p = e.clone();
            let mut r = rng.derive("select", t as u64);
            let out = select(&mut p, &space, &atoms, alpha, delta, &d, None, &mut r)?;
            if exact_average_split(&e, &atoms[out.index], &d, &space)? >= (1.0 - alpha) * rho - TOL {
                good += 1;
            }
            if out.pairs_drawn as f64 <= bound {
                within += 1;
            }
        }
        let need = (0.95 * n_trials as f64).ceil() as usize;
        Ok((
            good >= need && within >= need,
            format!(
                "split >= {:.4} in {good}/{n_trials}, pairs <= {bound:.0} in {within}/{n_trials}",
                (1.0 - alpha) * rho
            ),
        ))
    })
}

/// Monte Carlo stopping rule decides correctly on both sides of the
/// threshold.
pub fn check_stopping(n_trials: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(5, "stopping rule decisions", || {
        let (eps, lambda, delta) = (0.1, 1.0, 0.05);
        let mut rates = Vec::new();
        for (target_diam, should_stop) in [(eps / 2.0 * 0.9 / (lambda * lambda), true), (eps * 1.1, false)] {
            // two equal-weight points at distance c have avg-diam c / 2
            let c = 2.0 * target_diam;
            let d = MatrixDistance::from_rows(&[vec![0.0, c], vec![c, 0.0]]);
            let mut correct = 0;
            for t in 0..n_trials {
                let mut e = WeightedEnsemble::uniform(vec![0usize, 1]).expect("non-empty");
                let mut r = rng.derive("stop", t as u64);
                let stop = stopping_check_mc::<FiniteLabeledSpace, _, _>(&mut e, eps, lambda, 1, delta, &d, &mut r)?;
                correct += (stop == should_stop) as usize;
            }
            rates.push(correct as f64 / n_trials as f64);
        }
        let ok = rates.iter().all(|r| *r >= 1.0 - 2.0 * delta);
        Ok((ok, format!("correct rate below / above threshold: {:.3} / {:.3}", rates[0], rates[1])))
    })
}

/// Index estimates at `rho*`: ranking (d = 2) and interval (k = 4,
/// `I = [0.4, 0.6]`), both at `eps = 0.1`.
pub fn check_indices(n_trials: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(9, "average splitting index estimates", || {
        let r = verify_ranking_index(2, 0.1, n_trials, &mut rng.derive("ranking", 0))?;
        let i = verify_interval_index(4, Interval::new(0.4, 0.6)?, 0.1, n_trials, &mut rng.derive("interval", 0))?;
        let floor = i.tau_floor.expect("interval check has a floor");
        let ok = r.ci_excludes_zero() && i.ci_excludes_zero() && i.tau_ci.1 >= floor;
        Ok((
            ok,
            format!(
                "ranking tau={:.3} ci=({:.3}, {:.3}) c_hat={:.2}; interval tau={:.3} ci=({:.3}, {:.3}) floor={floor:.3}",
                r.tau_at_rho_star, r.tau_ci.0, r.tau_ci.1, r.c_hat, i.tau_at_rho_star, i.tau_ci.0, i.tau_ci.1
            ),
        ))
    })
}

/// Langevin chain on `N(0, I_2)`: moments and post-burn-in acceptance.
pub fn check_mala(n_samples: usize, rng: &mut RngStream) -> CheckOutcome {
    timed(10, "langevin sampler on a gaussian", || {
        let (dim, sigma, thin) = (2, 1.0, 5);
        let target = LogConcaveTarget::new(dim, sigma)?;
        let mut chain = MalaChain::new(vec![0.0; dim], sigma * sigma / dim as f64, 50)?;
        burn_in(&mut chain, &target, 1000, rng)?;
        let (steps0, acc0) = (chain.steps, chain.accepted);
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for _ in 0..n_samples {
            for _ in 0..thin {
                mala_step(&mut chain, &target, rng)?;
            }
            for (k, x) in chain.state().iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        let n = n_samples as f64;
        let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let vars: Vec<f64> = sq.iter().zip(&means).map(|(q, m)| q / n - m * m).collect();
        let rate = (chain.accepted - acc0) as f64 / (chain.steps - steps0) as f64;
        let ok = means.iter().all(|m| m.abs() <= 0.05)
            && vars.iter().all(|v| (v - sigma * sigma).abs() <= 0.1)
            && (0.5..=0.7).contains(&rate);
        Ok((
            ok,
            format!("means {means:.3?}, variances {vars:.3?}, acceptance {rate:.3}, eta {:.3}", chain.eta()),
        ))
    })
}

/// The quick checks (everything except the learning-curve experiments).
pub fn run_quick_checks(seed: u64) -> Vec<CheckOutcome> {
    let root = RngStream::new(seed, "verify");
    vec![
        check_distance_to_target(1000, &mut root.derive("c", 1)),
        check_target_mass_supermartingale(500, &mut root.derive("c", 2)),
        check_potential_drop(500, &mut root.derive("c", 3)),
        check_select(200, &mut root.derive("c", 4)),
        check_stopping(200, &mut root.derive("c", 5)),
        check_indices(2000, &mut root.derive("c", 9)),
        check_mala(10_000, &mut root.derive("c", 10)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::StructureSpace;

    #[test]
    fn five_sixths_split() {
        let (space, e, d) = five_sixths_instance();
        let s = exact_average_split(&e, &Atom::new(0, 0), &d, &space).unwrap();
        assert!((s - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(exact_average_split(&e, &Atom::new(3, 3), &d, &space).unwrap(), 0.0);
        assert_eq!(space.response_set().len(), 2);
    }

    #[test]
    fn small_lemma_runs_pass() {
        let mut rng = RngStream::new(5, "small");
        assert!(check_distance_to_target(50, &mut rng).passed);
        assert!(check_target_mass_supermartingale(30, &mut rng).passed);
        let c = check_potential_drop(30, &mut rng);
        assert!(c.passed, "{}", c.line());
    }
}

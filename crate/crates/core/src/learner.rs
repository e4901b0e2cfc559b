//! The NDBAL loop, its query score, and the random and QBC baselines.

use serde::{Deserialize, Serialize};

use crate::diameter::{avg_diam_exact, avg_dist_to_target, stopping_check, EXACT_LIMIT};
use crate::distance::Distance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::oracle::Oracle;
use crate::posterior::{Loss, PosteriorHandle, Prediction, UpdateRule};
use crate::rng::RngStream;
use crate::select::{exact_average_split, select};
use crate::space::{Atom, Response, StructureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Hard,
    Soft01,
    GeneralLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Inverse-sampling SELECT over the candidate atoms.
    Theory,
    /// Empirical argmin of the query score over candidates and sampled pairs.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub eps: f64,
    #[serde(default = "one")]
    pub lambda_prior: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdbalConfig {
    pub beta: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Candidate atoms per round.
    pub m_atoms: usize,
    /// Structure pairs per round for the heuristic score and QBC.
    pub n_pairs: usize,
    /// Posterior draws per error estimate.
    pub n_eval: usize,
    pub update_rule: UpdateKind,
    pub loss: Loss,
    pub stop: Option<StopConfig>,
    /// Maximum number of rounds.
    pub budget: usize,
    pub mode: QueryMode,
    /// SELECT round cap; `ceil(50 N)` when absent.
    pub k_max: Option<usize>,
    /// QBC attempts per round before giving up.
    pub qbc_cap: usize,
    /// Theory-mode atom schedule `m_t = (1/tau) ln(4t(t+1)/delta)`; uses
    /// `m_atoms` when absent.
    pub tau: Option<f64>,
    /// Log the exact split of each query (finite posteriors only).
    pub record_split: bool,
}

impl Default for NdbalConfig {
    fn default() -> Self {
        NdbalConfig {
            beta: 1.0,
            alpha: 0.5,
            delta: 0.05,
            m_atoms: 500,
            n_pairs: 300,
            n_eval: 300,
            update_rule: UpdateKind::GeneralLoss,
            loss: Loss::Logistic,
            stop: None,
            budget: 150,
            mode: QueryMode::Heuristic,
            k_max: None,
            qbc_cap: 10_000,
            tau: None,
            record_split: false,
        }
    }
}

impl NdbalConfig {
    pub fn rule(&self) -> UpdateRule {
        match self.update_rule {
            UpdateKind::Hard => UpdateRule::Hard,
            UpdateKind::Soft01 => UpdateRule::Soft01 { beta: self.beta },
            UpdateKind::GeneralLoss => UpdateRule::GeneralLoss {
                beta: self.beta,
                loss: self.loss,
            },
        }
    }

    /// Loss and weight used by the heuristic score.
    fn score_params(&self) -> (f64, Loss) {
        match self.update_rule {
            UpdateKind::Hard => (f64::INFINITY, Loss::ZeroOne),
            UpdateKind::Soft01 => (self.beta, Loss::ZeroOne),
            UpdateKind::GeneralLoss => (self.beta, self.loss),
        }
    }

    /// Checks ranges. With theory mode, a soft 0-1 update and a Massart
    /// oracle of margin `lambda`, also requires `beta <= lambda / 10`.
    pub fn validate(&self, massart_margin: Option<f64>) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.beta > 0.0) {
            return Err(NdbalError::config("beta", "must be > 0"));
        }
        if !unit(self.alpha) {
            return Err(NdbalError::config("alpha", "must lie in (0, 1)"));
        }
        if !unit(self.delta) {
            return Err(NdbalError::config("delta", "must lie in (0, 1)"));
        }
        if self.m_atoms == 0 {
            return Err(NdbalError::config("m_atoms", "must be >= 1"));
        }
        if self.n_pairs == 0 {
            return Err(NdbalError::config("n_pairs", "must be >= 1"));
        }
        if self.n_eval == 0 {
            return Err(NdbalError::config("n_eval", "must be >= 1"));
        }
        if self.qbc_cap == 0 {
            return Err(NdbalError::config("qbc_cap", "must be >= 1"));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t <= 1.0) {
                return Err(NdbalError::config("tau", "must lie in (0, 1]"));
            }
        }
        if let Some(s) = self.stop {
            if !unit(s.eps) {
                return Err(NdbalError::config("stop.eps", "must lie in (0, 1)"));
            }
            if !(s.lambda_prior >= 1.0) {
                return Err(NdbalError::config("stop.lambda_prior", "must be >= 1"));
            }
        }
        if let (QueryMode::Theory, UpdateKind::Soft01, Some(lambda)) =
            (self.mode, self.update_rule, massart_margin)
        {
            if self.beta > lambda / 10.0 {
                return Err(NdbalError::config(
                    "beta",
                    format!("theory mode needs beta <= lambda/10 = {}", lambda / 10.0),
                ));
            }
        }
        Ok(())
    }

    /// Candidate atoms in round `t`.
    pub fn atoms_for_round(&self, t: usize) -> usize {
        match (self.mode, self.tau) {
            (QueryMode::Theory, Some(tau)) => {
                let tt = t as f64;
                ((4.0 * tt * (tt + 1.0) / self.delta).ln() / tau).floor().max(1.0) as usize
            }
            _ => self.m_atoms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ndbal,
    Qbc,
    Random,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ndbal => "ndbal",
            Algorithm::Qbc => "qbc",
            Algorithm::Random => "random",
        }
    }
}

/// A named evaluation distance.
pub struct Metric<'a, G> {
    pub name: String,
    pub d: &'a dyn Distance<G>,
}

impl<'a, G> Metric<'a, G> {
    pub fn new(name: impl Into<String>, d: &'a dyn Distance<G>) -> Self {
        Metric {
            name: name.into(),
            d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Number of updates applied; the posterior is the prior replayed
    /// through the first `posterior_id` queries of the record.
    pub posterior_id: usize,
    pub atom_id: Option<u64>,
    pub response: Option<usize>,
    /// One entry per metric.
    pub errors: Vec<f64>,
    pub diam: Option<f64>,
    pub atoms_drawn: usize,
    pub structures_sampled: usize,
    pub select_pairs: usize,
    pub qbc_attempts: usize,
    pub select_timeout: bool,
    pub measured_split: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub metric_names: Vec<String>,
    /// Round 0 is the prior.
    pub rounds: Vec<RoundLog>,
    pub stopped_at: Option<usize>,
    pub qbc_exhausted: bool,
}

impl RunRecord {
    /// Queries made.
    pub fn n_queries(&self) -> usize {
        self.rounds.iter().filter(|r| r.atom_id.is_some()).count()
    }

    pub fn final_errors(&self) -> &[f64] {
        &self.rounds.last().expect("round 0 always logged").errors
    }
}

fn predict<S: StructureSpace>(
    space: &S,
    g: &S::Structure,
    a: &S::Payload,
    loss: Loss,
) -> Result<Prediction> {
    match loss {
        Loss::ZeroOne => space.evaluate(g, a).map(Prediction::Label),
        Loss::Logistic => space
            .margin(g, a)
            .ok_or_else(|| NdbalError::Unsupported("logistic score needs margins".into()))?
            .map(Prediction::Margin),
    }
}

/// Empirical query score with precomputed pair distances; lower is better.
pub fn score_query_with_distances<S: StructureSpace>(
    pairs: &[(S::Structure, S::Structure)],
    dists: &[f64],
    a: &Atom<S::Payload>,
    beta: f64,
    loss: Loss,
    space: &S,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(NdbalError::invalid("score needs at least one pair"));
    }
    let rs = space.response_set();
    let mut sums = vec![0.0; rs.len()];
    for ((g, h), &dist) in pairs.iter().zip(dists) {
        if dist == 0.0 {
            continue;
        }
        let pg = predict(space, g, a.payload(), loss)?;
        let ph = predict(space, h, a.payload(), loss)?;
        for y in rs.iter() {
            let factor = if beta.is_infinite() {
                (loss.of_prediction(pg, y, rs) + loss.of_prediction(ph, y, rs) == 0.0) as u8 as f64
            } else {
                loss.weight_of_prediction(pg, y, rs, beta) * loss.weight_of_prediction(ph, y, rs, beta)
            };
            sums[y.0] += dist * factor;
        }
    }
    let n = pairs.len() as f64;
    Ok(sums.into_iter().fold(0.0, f64::max) / n)
}

/// `max_y (1/n) sum d(g, g') exp(-beta (l(g(a), y) + l(g'(a), y)))`.
pub fn score_query<S, D>(
    pairs: &[(S::Structure, S::Structure)],
    a: &Atom<S::Payload>,
    beta: f64,
    loss: Loss,
    d: &D,
    space: &S,
) -> Result<f64>
where
    S: StructureSpace,
    D: Distance<S::Structure> + ?Sized,
{
    let dists: Vec<f64> = pairs.iter().map(|(g, h)| d.distance(g, h)).collect();
    score_query_with_distances(pairs, &dists, a, beta, loss, space)
}

/// `sum_y law[y] f(update(e, a, y))`, exact over the response set.
pub fn expected_after_update<S, F>(
    e: &WeightedEnsemble<S::Structure>,
    space: &S,
    a: &Atom<S::Payload>,
    law: &[f64],
    rule: UpdateRule,
    f: F,
) -> Result<f64>
where
    S: StructureSpace,
    F: Fn(&WeightedEnsemble<S::Structure>) -> f64,
{
    let mut total = 0.0;
    for (y, &p) in law.iter().enumerate() {
        if p > 0.0 {
            let mut next = e.clone();
            PosteriorHandle::<S>::apply(&mut next, space, a, Response(y), rule)?;
            total += p * f(&next);
        }
    }
    Ok(total)
}

struct Pool<G> {
    draws: Vec<G>,
    pair_dists: Vec<f64>,
}

impl<G: Clone> Pool<G> {
    fn pairs(&self) -> Vec<(G, G)> {
        split_pairs(&self.draws)
    }
}

/// Pairs draw `i` with draw `i + len/2` so that chain neighbours never share a pair.
fn split_pairs<G: Clone>(draws: &[G]) -> Vec<(G, G)> {
    let (a, b) = draws.split_at(draws.len() / 2);
    a.iter().zip(b).map(|(g, h)| (g.clone(), h.clone())).collect()
}

struct Engine<'a, S: StructureSpace, O: ?Sized, D: ?Sized> {
    cfg: &'a NdbalConfig,
    space: &'a S,
    oracle: &'a O,
    d: &'a D,
    metrics: &'a [Metric<'a, S::Structure>],
    g_star: &'a S::Structure,
}

impl<'a, S, O, D> Engine<'a, S, O, D>
where
    S: StructureSpace,
    O: Oracle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    fn pool_size(&self, alg: Algorithm) -> usize {
        match (alg, self.cfg.mode) {
            (Algorithm::Random, _) | (Algorithm::Ndbal, QueryMode::Theory) => self.cfg.n_eval,
            _ => self.cfg.n_eval.max(2 * self.cfg.n_pairs),
        }
    }

    fn make_pool<P: PosteriorHandle<S> + ?Sized>(
        &self,
        p: &mut P,
        size: usize,
        rng: &mut RngStream,
    ) -> Result<Pool<S::Structure>> {
        let draws = p.draw(size, rng)?;
        let pair_dists = split_pairs(&draws)
            .iter()
            .map(|(g, h)| self.d.distance(g, h))
            .collect();
        Ok(Pool { draws, pair_dists })
    }

    fn evaluate<P: PosteriorHandle<S> + ?Sized>(
        &self,
        p: &mut P,
        pool: &Pool<S::Structure>,
        rng: &mut RngStream,
    ) -> Result<(Vec<f64>, Option<f64>)> {
        let mut errors = Vec::with_capacity(self.metrics.len());
        for m in self.metrics {
            let e = match p.as_finite().filter(|e| e.len() <= EXACT_LIMIT) {
                Some(_) => avg_dist_to_target(p, self.g_star, m.d, 1, rng)?,
                None => {
                    let n = self.cfg.n_eval.min(pool.draws.len()).max(1);
                    pool.draws[..n]
                        .iter()
                        .map(|g| m.d.distance(g, self.g_star))
                        .sum::<f64>()
                        / n as f64
                }
            };
            errors.push(e);
        }
        let diam = match p.as_finite().filter(|e| e.len() <= EXACT_LIMIT) {
            Some(e) => Some(avg_diam_exact(e, self.d)),
            None if !pool.pair_dists.is_empty() => {
                Some(pool.pair_dists.iter().sum::<f64>() / pool.pair_dists.len() as f64)
            }
            None => None,
        };
        Ok((errors, diam))
    }

    fn run<P: PosteriorHandle<S>>(
        &self,
        alg: Algorithm,
        mut p: P,
        rng: &RngStream,
    ) -> Result<RunRecord> {
        let cfg = self.cfg;
        let pool_size = self.pool_size(alg);
        let mut record = RunRecord {
            algorithm: alg,
            metric_names: self.metrics.iter().map(|m| m.name.clone()).collect(),
            rounds: Vec::new(),
            stopped_at: None,
            qbc_exhausted: false,
        };
        let mut pool = self.make_pool(&mut p, pool_size, &mut rng.derive("pool", 0))?;
        let (errors, diam) = self.evaluate(&mut p, &pool, &mut rng.derive("eval", 0))?;
        record.rounds.push(RoundLog {
            round: 0,
            posterior_id: 0,
            atom_id: None,
            response: None,
            errors,
            diam,
            atoms_drawn: 0,
            structures_sampled: pool.draws.len(),
            select_pairs: 0,
            qbc_attempts: 0,
            select_timeout: false,
            measured_split: None,
        });
        let mut next_atom_id = 0u64;
        let mut updates = 0usize;

        for t in 1..=cfg.budget {
            let mut atom_rng = rng.derive("atoms", t as u64);
            let mut post_rng = rng.derive("posterior", t as u64);
            let mut log = RoundLog {
                round: t,
                posterior_id: updates,
                atom_id: None,
                response: None,
                errors: Vec::new(),
                diam: None,
                atoms_drawn: 0,
                structures_sampled: 0,
                select_pairs: 0,
                qbc_attempts: 0,
                select_timeout: false,
                measured_split: None,
            };
            let mut draw_atom = |log: &mut RoundLog| {
                log.atoms_drawn += 1;
                next_atom_id += 1;
                self.space.draw_atom(next_atom_id - 1, &mut atom_rng)
            };

            let chosen: Option<Atom<S::Payload>> = match alg {
                Algorithm::Random => Some(draw_atom(&mut log)),
                Algorithm::Ndbal => {
                    let m = cfg.atoms_for_round(t);
                    let atoms: Vec<_> = (0..m).map(|_| draw_atom(&mut log)).collect();
                    let index = match cfg.mode {
                        QueryMode::Theory => {
                            match select(
                                &mut p,
                                self.space,
                                &atoms,
                                cfg.alpha,
                                cfg.delta,
                                self.d,
                                cfg.k_max,
                                &mut post_rng,
                            ) {
                                Ok(out) => {
                                    log.select_pairs = out.pairs_drawn;
                                    out.index
                                }
                                Err(NdbalError::SelectTimeout { best_index, rounds }) => {
                                    log.select_pairs = rounds;
                                    log.select_timeout = true;
                                    best_index
                                }
                                Err(e) => return Err(e),
                            }
                        }
                        QueryMode::Heuristic => {
                            let pairs = pool.pairs();
                            let n = cfg.n_pairs.min(pairs.len());
                            let (beta, loss) = cfg.score_params();
                            let mut best = (0, f64::INFINITY);
                            for (i, a) in atoms.iter().enumerate() {
                                let s = score_query_with_distances(
                                    &pairs[..n],
                                    &pool.pair_dists[..n],
                                    a,
                                    beta,
                                    loss,
                                    self.space,
                                )?;
                                if s < best.1 {
                                    best = (i, s);
                                }
                            }
                            best.0
                        }
                    };
                    log.structures_sampled += 2 * log.select_pairs;
                    if cfg.record_split {
                        log.measured_split = match p.as_finite() {
                            Some(e) => exact_average_split(e, &atoms[index], self.d, self.space).ok(),
                            None => None,
                        };
                    }
                    atoms.into_iter().nth(index)
                }
                Algorithm::Qbc => {
                    let mut pairs = pool.pairs();
                    let mut k = 0usize;
                    let mut found = None;
                    let mut extra_rng = rng.derive("qbc", t as u64);
                    while log.qbc_attempts < cfg.qbc_cap {
                        if k == pairs.len() {
                            let more = p.draw(2 * cfg.n_pairs, &mut extra_rng)?;
                            log.structures_sampled += more.len();
                            pairs = split_pairs(&more);
                            k = 0;
                        }
                        let a = draw_atom(&mut log);
                        log.qbc_attempts += 1;
                        let (g, h) = &pairs[k];
                        k += 1;
                        if self.space.evaluate(g, a.payload())? != self.space.evaluate(h, a.payload())? {
                            found = Some(a);
                            break;
                        }
                    }
                    found
                }
            };

            let Some(atom) = chosen else {
                log.errors = record.rounds.last().expect("round 0").errors.clone();
                log.diam = record.rounds.last().expect("round 0").diam;
                record.rounds.push(log);
                record.qbc_exhausted = true;
                break;
            };

            let y = self
                .oracle
                .respond(self.space, &atom, &mut rng.derive("oracle", t as u64))?;
            p.apply(self.space, &atom, y, cfg.rule())?;
            updates += 1;
            log.atom_id = Some(atom.id().0);
            log.response = Some(y.0);
            log.posterior_id = updates;

            pool = self.make_pool(&mut p, pool_size, &mut rng.derive("pool", t as u64))?;
            log.structures_sampled += pool.draws.len();
            let (errors, diam) = self.evaluate(&mut p, &pool, &mut rng.derive("eval", t as u64))?;
            log.errors = errors;
            log.diam = diam;
            record.rounds.push(log);

            if let Some(stop) = cfg.stop {
                let mut stop_rng = rng.derive("stop", t as u64);
                if stopping_check(
                    &mut p,
                    stop.eps,
                    stop.lambda_prior,
                    t,
                    cfg.delta,
                    self.d,
                    &mut stop_rng,
                )? {
                    record.stopped_at = Some(t);
                    break;
                }
            }
        }
        Ok(record)
    }
}

/// Runs one algorithm, logging every metric each round. `d` drives query
/// selection and the stopping rule.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm<S, O, P, D>(
    alg: Algorithm,
    cfg: &NdbalConfig,
    space: &S,
    oracle: &O,
    prior: P,
    d: &D,
    metrics: &[Metric<'_, S::Structure>],
    g_star: &S::Structure,
    rng: &RngStream,
) -> Result<RunRecord>
where
    S: StructureSpace,
    O: Oracle<S> + ?Sized,
    P: PosteriorHandle<S>,
    D: Distance<S::Structure> + ?Sized,
{
    cfg.validate(oracle.massart_margin())?;
    if metrics.is_empty() {
        return Err(NdbalError::invalid("at least one metric is required"));
    }
    let engine = Engine {
        cfg,
        space,
        oracle,
        d,
        metrics,
        g_star,
    };
    engine.run(alg, prior, rng)
}

macro_rules! single_metric_runner {
    ($name:ident, $alg:expr, $doc:literal) => {
        #[doc = $doc]
        pub fn $name<S, O, P, D>(
            cfg: &NdbalConfig,
            space: &S,
            oracle: &O,
            prior: P,
            d: &D,
            g_star: &S::Structure,
            rng: &RngStream,
        ) -> Result<RunRecord>
        where
            S: StructureSpace,
            O: Oracle<S> + ?Sized,
            P: PosteriorHandle<S>,
            D: Distance<S::Structure> + Sized,
        {
            let metrics = [Metric::new("error", d as &dyn Distance<S::Structure>)];
            run_algorithm($alg, cfg, space, oracle, prior, d, &metrics, g_star, rng)
        }
    };
}

single_metric_runner!(run_ndbal, Algorithm::Ndbal, "NDBAL with `d` as the only metric.");
single_metric_runner!(
    run_random_baseline,
    Algorithm::Random,
    "One atom from the data distribution per round."
);
single_metric_runner!(
    run_qbc_baseline,
    Algorithm::Qbc,
    "Query an atom once two posterior draws disagree on it."
);

/// Rebuilds the posterior after the first `upto` updates of `record` by
/// redrawing each queried atom from the run's atom streams.
pub fn replay_posterior<S, P>(
    record: &RunRecord,
    space: &S,
    mut prior: P,
    rule: UpdateRule,
    rng: &RngStream,
    upto: usize,
) -> Result<P>
where
    S: StructureSpace,
    P: PosteriorHandle<S>,
{
    let mut first_id = 0u64;
    let mut applied = 0;
    for log in &record.rounds[1..] {
        if applied == upto {
            break;
        }
        if let (Some(id), Some(y)) = (log.atom_id, log.response) {
            let mut atom_rng = rng.derive("atoms", log.round as u64);
            let mut atom = None;
            for k in first_id..=id {
                atom = Some(space.draw_atom(k, &mut atom_rng));
            }
            let atom = atom.ok_or_else(|| NdbalError::invalid("atom id precedes its round"))?;
            prior.apply(space, &atom, Response(y), rule)?;
            applied += 1;
        }
        first_id += log.atoms_drawn as u64;
    }
    if applied < upto {
        return Err(NdbalError::invalid(format!(
            "record holds {applied} updates, {upto} requested"
        )));
    }
    Ok(prior)
}

/// Round bound `2/(rho lambda beta (1-beta)) max(ln(1/(eps pi*^2)),
/// 2 e^{2 beta}/(rho lambda beta (1-beta)) ln(1/delta))`.
pub fn round_bound(rho: f64, lambda: f64, beta: f64, eps: f64, pi_star: f64, delta: f64) -> f64 {
    let c = rho * lambda * beta * (1.0 - beta);
    let a = (1.0 / (eps * pi_star * pi_star)).ln();
    let b = 2.0 * (2.0 * beta).exp() / c * (1.0 / delta).ln();
    2.0 / c * a.max(b)
}

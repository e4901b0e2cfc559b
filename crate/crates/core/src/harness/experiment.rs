//! Trials x algorithms, aggregated into bootstrap curves.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::Distance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::harness::bootstrap::bootstrap_ci;
use crate::harness::config::{ExperimentConfig, InstanceFamily, SeparationDistance};
use crate::harness::curves::{emit_curves, CurvePoint};
use crate::instances::choice::{d_approx_best_item, d_best_item, LogitChoiceSpace};
use crate::instances::finite::RandomFiniteInstance;
use crate::instances::interval::{d_interval_c, d_interval_i, IntervalClustering};
use crate::instances::linear::{classifier_distance, sample_gaussian, LinearClassifierSpace};
use crate::instances::separation::build_separation_family;
use crate::learner::{run_algorithm, Algorithm, Metric, RunRecord};
use crate::oracle::{FlipOracle, LogisticOracle, MassartOracle};
use crate::rng::RngStream;
use crate::samplers::ContinuousPosterior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub curves: Vec<CurvePoint>,
}

fn run_one(cfg: &ExperimentConfig, alg: Algorithm, trial: usize) -> Result<RunRecord> {
    let master = RngStream::new(cfg.seed, &cfg.experiment);
    // the instance depends on the trial only, so algorithms share it
    let mut inst_rng = master.derive("instance", trial as u64);
    let run_rng = master.derive(alg.name(), trial as u64);
    let nd = &cfg.ndbal;
    match cfg.instance {
        InstanceFamily::LinearClassifier { dim, sigma } => {
            let space = LinearClassifierSpace::new(dim)?;
            let w_star = sample_gaussian(dim, sigma, &mut inst_rng);
            let oracle = LogisticOracle::new(w_star.clone());
            let prior = ContinuousPosterior::new(dim, sigma, cfg.sampler)?;
            let d = classifier_distance;
            let metrics = [Metric::new("classification_error", &d as &dyn Distance<Vec<f64>>)];
            run_algorithm(alg, nd, &space, &oracle, prior, &d, &metrics, &w_star, &run_rng)
        }
        InstanceFamily::LogitChoice { n_items, dim, sigma } => {
            let space = LogitChoiceSpace::random(n_items, dim, &mut inst_rng)?;
            let w_star = sample_gaussian(dim, sigma, &mut inst_rng);
            let oracle = LogisticOracle::new(w_star.clone());
            let prior = ContinuousPosterior::new(dim, sigma, cfg.sampler)?;
            let items = space.items().to_vec();
            let top = |w: &Vec<f64>, v: &Vec<f64>| d_best_item(w, v, &items);
            let gap = |w: &Vec<f64>, v: &Vec<f64>| d_approx_best_item(w, v, &items, true);
            let metrics = [
                Metric::new("top_item_error", &top as &dyn Distance<Vec<f64>>),
                Metric::new("best_item_distance", &gap as &dyn Distance<Vec<f64>>),
            ];
            run_algorithm(alg, nd, &space, &oracle, prior, &gap, &metrics, &w_star, &run_rng)
        }
        InstanceFamily::FiniteMassart {
            n_structures,
            n_atoms,
            n_responses,
            lambda,
        } => {
            let inst = RandomFiniteInstance::generate(n_structures, n_atoms, n_responses, &mut inst_rng)?;
            let oracle = MassartOracle::new(inst.g_star, lambda, n_responses)?;
            let metrics = [Metric::new("error", &inst.distance as &dyn Distance<usize>)];
            run_algorithm(
                alg,
                nd,
                &inst.space,
                &oracle,
                inst.prior.clone(),
                &inst.distance,
                &metrics,
                &inst.g_star,
                &run_rng,
            )
        }
        InstanceFamily::Separation {
            k,
            alpha,
            eps,
            extra,
            distance,
        } => {
            let family = build_separation_family(k, alpha, eps)?;
            let mut members = family.members.clone();
            members.extend(family.augmented(extra));
            let g_star = members[rand::Rng::random_range(&mut inst_rng, 0..members.len())].clone();
            let oracle = FlipOracle::noiseless(g_star.clone());
            let prior = WeightedEnsemble::uniform(members)?;
            let interval = family.interval;
            match distance {
                SeparationDistance::IntervalI => {
                    let space = family.point_space(family.space.max_clusters())?;
                    let d = move |g: &IntervalClustering, h: &IntervalClustering| {
                        d_interval_i(g, h, &interval).expect("family keeps I intact")
                    };
                    let metrics = [Metric::new("d_interval", &d as &dyn Distance<IntervalClustering>)];
                    run_algorithm(alg, nd, &space, &oracle, prior, &d, &metrics, &g_star, &run_rng)
                }
                SeparationDistance::Cluster => {
                    let d = d_interval_c;
                    let metrics = [Metric::new("d_cluster", &d as &dyn Distance<IntervalClustering>)];
                    run_algorithm(alg, nd, &family.space, &oracle, prior, &d, &metrics, &g_star, &run_rng)
                }
            }
        }
    }
}

/// Every (trial, algorithm) run, in trial-major order; parallel over runs
/// on the current rayon pool.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, Algorithm)> = (0..cfg.trials)
        .flat_map(|t| cfg.algorithms.iter().map(move |a| (t, *a)))
        .collect();
    jobs.into_par_iter()
        .map(|(trial, alg)| {
            run_one(cfg, alg, trial).map(|record| TrialRecord { trial, record })
        })
        .collect()
}

/// Per algorithm, metric and round: mean over trials with a bootstrap
/// interval. A run that ended early holds its last logged error.
pub fn aggregate_curves(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<CurvePoint>> {
    let master = RngStream::new(cfg.seed, &cfg.experiment).derive("bootstrap", 0);
    let mut points = Vec::new();
    let mut curve = 0u64;
    for alg in &cfg.algorithms {
        let runs: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.record.algorithm == *alg)
            .map(|r| &r.record)
            .collect();
        let Some(first) = runs.first() else { continue };
        for (m, name) in first.metric_names.iter().enumerate() {
            let mut rng = master.derive("curve", curve);
            curve += 1;
            for round in 0..=cfg.ndbal.budget {
                let vals: Vec<f64> = runs
                    .iter()
                    .map(|r| {
                        let log = r.rounds.get(round).unwrap_or_else(|| r.rounds.last().expect("prior"));
                        log.errors[m]
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let (ci_low, ci_high) = bootstrap_ci(&vals, cfg.ci_level, cfg.bootstrap_resamples, &mut rng)?;
                points.push(CurvePoint {
                    experiment: cfg.experiment.clone(),
                    algorithm: alg.name().to_string(),
                    trial_agg: format!("{name}:mean"),
                    round,
                    error_mean: mean,
                    ci_low,
                    ci_high,
                });
            }
        }
    }
    Ok(points)
}

/// Runs all trials, aggregates curves, and writes `curves.csv` and
/// `runs.jsonl` under `cfg.output` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let records = run_trials(cfg)?;
    let curves = aggregate_curves(cfg, &records)?;
    if let Some(dir) = &cfg.output {
        write_outputs(dir, &records, &curves)?;
    }
    Ok(ExperimentOutput { records, curves })
}

/// [`run_experiment`] on a dedicated pool of `jobs` threads.
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| NdbalError::invalid(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}

fn write_outputs(dir: &Path, records: &[TrialRecord], curves: &[CurvePoint]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| NdbalError::Io(format!("{}: {e}", dir.display())))?;
    emit_curves(curves, &dir.join("curves.csv"))?;
    let mut f = std::fs::File::create(dir.join("runs.jsonl"))?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| NdbalError::Io(e.to_string()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

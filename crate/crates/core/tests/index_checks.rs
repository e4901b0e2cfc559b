use ndbal::instances::interval::Interval;
use ndbal::splitting::{verify_interval_index, verify_ranking_index, verify_ranking_index_with, EnsembleKind};
use ndbal::RngStream;

#[test]
fn ranking_constant_is_stable_across_eps() {
    let c: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&eps| {
            let mut rng = RngStream::new(31, "c-hat");
            let v = verify_ranking_index(2, eps, 3000, &mut rng).unwrap();
            assert!(v.ci_excludes_zero());
            v.c_hat
        })
        .collect();
    let mean = c.iter().sum::<f64>() / 3.0;
    println!("c_hat {c:?}");
    assert!(c.iter().all(|x| (x - mean).abs() <= 0.5 * mean), "{c:?}");
}

#[test]
fn prior_slice_reports() {
    let mut rng = RngStream::new(32, "prior");
    let v = verify_ranking_index_with(3, 0.1, 500, EnsembleKind::Prior, &mut rng).unwrap();
    println!("prior tau {} skipped {}", v.tau_at_rho_star, v.skipped);
    assert!(v.ci_excludes_zero());
    let i = Interval::new(0.4, 0.6).unwrap();
    let v = verify_interval_index(4, i, 0.1, 500, &mut rng).unwrap();
    println!("interval tau {} ci {:?} skipped {}", v.tau_at_rho_star, v.tau_ci, v.skipped);
    assert!(!v.violation);
    let v = ndbal::splitting::verify_interval_index_with(4, i, 0.1, 500, EnsembleKind::Localized, &mut rng).unwrap();
    println!("interval localized tau {} ci {:?} skipped {}", v.tau_at_rho_star, v.tau_ci, v.skipped);
    assert!(!v.violation);
}

"""Smoke test for the ndbal_py extension module."""

import json
import math

import ndbal_py as nd


def main():
    assert nd.rho_star(0.1) == 1 / 80
    assert nd.stopping_pairs(0.1, 1.0, 1, 0.05) == 1771
    assert abs(nd.threshold_n(0.5, 0.05, 10, 2) - 60 * math.log(240)) < 1e-9
    assert nd.bootstrap_ci([0.25] * 10) == (0.25, 0.25)
    lo, hi = nd.wilson_interval(5, 10)
    assert lo < 0.5 < hi

    assert abs(nd.classifier_distance([1.0, 0.0], [0.0, 1.0]) - 0.5) < 1e-12
    assert nd.interval_cluster_distance([0.5], [0.5]) == 0.0
    assert nd.interval_identification_distance([0.3], [0.5], 0.0, 0.2) > 0.0

    inst = nd.FiniteInstance(8, 5, seed=3)
    assert abs(sum(inst.weights) - 1.0) < 1e-12
    assert inst.avg_dist_to_target() <= inst.avg_diam() / inst.weights[inst.target] + 1e-9
    inst.update(0, 0, rule="soft01", beta=0.5)
    assert abs(sum(inst.weights) - 1.0) < 1e-12
    try:
        inst.average_split(99)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range atom accepted")

    draws = nd.sample_logistic_posterior(2, 1.0, [[1.0, 0.0]] * 20, [1.0] * 20, 1.0, 200, seed=1)
    assert len(draws) == 200 and sum(w[0] for w in draws) > 0

    cfg = {
        "experiment": "smoke",
        "instance": {"family": "finite_massart", "n_structures": 12, "n_atoms": 8, "lambda": 0.6},
        "algorithms": ["ndbal", "random"],
        "ndbal": {"update_rule": "soft01", "loss": "zero_one", "beta": 0.5, "budget": 5,
                  "m_atoms": 8, "n_pairs": 20, "n_eval": 20},
        "trials": 3,
        "seed": 1,
        "bootstrap_resamples": 100,
    }
    rows = nd.run_experiment(json.dumps(cfg))
    assert len(rows) == 2 * 6
    assert all(r[5] <= r[4] <= r[6] for r in rows)
    try:
        nd.run_experiment(json.dumps({**cfg, "trials": 0}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    checks = nd.verify(0)
    assert all(c[2] for c in checks), checks
    print("ok:", len(checks), "checks passed")


if __name__ == "__main__":
    main()

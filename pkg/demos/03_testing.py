"""
The quasi-likelihood ratio test
===============================

Fit the adaptive estimator with and without constraints and compare the joint
quasi-likelihood at the two fits:

    Lambda = -2 (l(constrained) - l(free)),

referred to a chi-square law with one degree of freedom per fixed component.

The first block tests the true parameter and should reject about 5% of the
time.  The second fixes alpha at 2.01; alpha is estimated at rate sqrt(n),
so even this small miss is rejected almost always.

Run:  python demos/03_testing.py [M]
"""

import sys

import numpy as np

from jdqml import Scenario, StudyConfig, ThresholdSet, levy_ou_model, run_test_study


def run(truth, constraints, reps, label):
    cells = [ThresholdSet.from_rhos(0.285, 0.26, 0.255, 0.26, 0.26)]
    cfg = StudyConfig(Scenario(truth, constraints, eps=0.05), cells, reps, 10**6, h_exponent=2 / 3, base_seed=11)
    cell = run_test_study(cfg).cells[0]
    lam = cell.lambda_n
    print(f"{label}: M = {cell.n_ok}, rejection rate {cell.rejection_rate:.3f}, "
          f"mean Lambda {lam.mean():.2f}, median {np.median(lam):.2f}")


def main(reps=40):
    truth = levy_ou_model().params(alpha=2.0, beta=2.5, mu=0.0, sigma2=20.25, **{"lambda": 6.0})
    run(truth, dict(enumerate(truth.flat)), reps, "H0 true, 5 constraints ")
    run(truth, {0: 2.01}, reps, "alpha fixed at 2.01     ")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 40)

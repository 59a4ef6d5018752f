"""
One path, two estimators
========================

Simulate a single Levy-driven Ornstein-Uhlenbeck path

    dX = -beta X dt + alpha dW + dJ,   J compound Poisson with N(mu, sigma2) marks,

at the high-frequency design n = 10^6, h = n^(-2/3) (so T = 100), then fit it
twice: with the adaptive estimator, which uses a separate jump threshold for
each parameter group, and with the joint estimator, which uses one.

Run:  python demos/01_one_path.py [seed]
"""

import sys

from jdqml import (
    EstimationConfig,
    PathConfig,
    ThresholdSet,
    estimate_adaptive,
    estimate_joint,
    levy_ou_model,
    simulate_levy_ou,
)


def main(seed=1):
    model = levy_ou_model()
    truth = model.params(alpha=2.0, beta=2.5, mu=0.0, sigma2=20.25, **{"lambda": 6.0})
    n = 10**6
    path = simulate_levy_ou(truth, PathConfig(n=n, h=n ** (-2 / 3), seed=seed))
    print(f"n = {path.n}, h = {path.h:.3e}, T = {path.n * path.h:.1f}, jumps simulated = {int(path.jump_marks.sum())}")

    # rho1 filters the diffusion fit, rho2 the jump fit, rho3 the drift fit
    adaptive_th = ThresholdSet.from_rhos(0.285, 0.26, 0.255)
    joint_th = ThresholdSet.uniform(0.26)
    ada = estimate_adaptive(path, EstimationConfig(adaptive_th))
    joint = estimate_joint(path, EstimationConfig(joint_th))

    print(f"increments classified as jumps at rho2 = 0.26: {ada.n2}")
    print()
    print(f"{'':8s}{'truth':>10s}{'adaptive':>12s}{'joint':>12s}")
    for name, t, a, j in zip(model.param_names, truth.flat, ada.values, joint.values):
        print(f"{name:8s}{t:10.4f}{a:12.4f}{j:12.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)

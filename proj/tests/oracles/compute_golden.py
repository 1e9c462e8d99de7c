"""Independent oracle for frozen expected values used by the C++ unit tests.

Uses scipy/numpy only; shares no code with the library.
"""
import itertools

import numpy as np
from scipy.stats import chi2

np.set_printoptions(precision=17)


def chi2_values():
    for p, dof in [(0.95, 4), (0.95, 1), (0.5, 2), (0.99, 4), (0.9, 3)]:
        print(f"chi2 p={p} dof={dof}: {chi2.ppf(p, dof)!r}")
    a = chi2.ppf(0.95, 4)
    print("threshold k=0.5:", a / 0.25)
    print("inclusion limit k=0.5:", 0.25 / a)
    print("certify P=0.04:", np.sqrt(a * 0.04))


def predict_golden():
    dt = 0.05
    x = np.array([0.0, 0.0, 0.0, 10.0])
    psi, nu = x[2], x[3]
    F = np.array([
        [1, 0, -nu * np.sin(psi) * dt, np.cos(psi) * dt],
        [0, 1, nu * np.cos(psi) * dt, np.sin(psi) * dt],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
    ])
    P = 0.05 * np.eye(4)
    Q = np.diag([0.0031, 0.0031, 0.0001, 0.0125])
    print("predict cov:\n", F @ P @ F.T + Q)


def prior_info_golden():
    info = np.linalg.inv(0.05 * np.eye(4))
    C1 = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], float)
    info1 = info + C1.T @ np.linalg.inv(np.diag([3.0, 3.0])) @ C1
    print("info after C1:", np.diag(info1))
    C2 = np.array([[0, 0, 1, 0]], float)
    C3 = np.array([[0, 0, 0, 1]], float)
    base = info1 + C2.T @ C2 / 0.5 + C3.T @ C3 / 2.0
    thr = chi2.ppf(0.95, 4) / 0.25
    print("b:", thr - np.diag(base))


def knapsack_brute(w, v, b):
    n = len(w)
    best = None
    for r in range(n + 1):
        for sub in itertools.combinations(range(n), r):
            ok = all(sum(v[i][j] for j in sub) >= b[i] for i in range(len(b)))
            if ok:
                c = sum(w[j] for j in sub)
                if best is None or c < best[0] - 1e-15:
                    best = (c, sub)
    print("brute:", best)


def pure_pursuit_circle():
    L, R = 3.0, 10.0
    print("circle delta:", np.arctan(L / R))
    print("yaw rate step:", 10.0 / 3.0 * np.tan(0.1) * 0.05)


if __name__ == "__main__":
    chi2_values()
    predict_golden()
    prior_info_golden()
    knapsack_brute([1, 2, 3], [[2, 0, 1], [0, 2, 1]], [1, 1])
    knapsack_brute([1.5, 1, 1], [[2, 2, 1], [2, 1, 2]], [2, 2])
    pure_pursuit_circle()

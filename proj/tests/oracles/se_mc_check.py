"""Direct Monte Carlo of logistic MLE / ridge fits, the oracle for the state-evolution values.

Rows x ~ N(0, I/n), ||beta||^2/n = gamma^2, penalty (lam/2)||b||^2.
Prints mean of b'beta/||beta||^2 and ||b||^2/n over replicates.
"""
import sys

import numpy as np


def fit(X, A, lam):
    n, p = X.shape
    b = np.zeros(p)
    for _ in range(100):
        eta = X @ b
        mu = 1 / (1 + np.exp(-eta))
        g = X.T @ (mu - A) + lam * b
        if np.max(np.abs(g)) < 1e-9:
            return b
        H = (X * (mu * (1 - mu))[:, None]).T @ X + lam * np.eye(p)
        b = b - np.linalg.solve(H, g)
    raise RuntimeError("no convergence")


def main(n=2000, kappa=0.21, gamma=1.0, lam=0.0, reps=5, seed=1):
    rng = np.random.default_rng(seed)
    p = int(round(kappa * n))
    al, m2 = [], []
    for _ in range(reps):
        beta = rng.standard_normal(p)
        beta *= gamma * np.sqrt(n) / np.linalg.norm(beta)
        X = rng.standard_normal((n, p)) / np.sqrt(n)
        A = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
        b = fit(X, A, lam)
        al.append(b @ beta / (beta @ beta))
        m2.append(b @ b / n)
    print(f"lam={lam} alpha={np.mean(al):.4f}+-{np.std(al)/np.sqrt(reps):.4f} "
          f"m2={np.mean(m2):.4f}+-{np.std(m2)/np.sqrt(reps):.4f}")


if __name__ == "__main__":
    main(lam=float(sys.argv[1]) if len(sys.argv) > 1 else 0.0)

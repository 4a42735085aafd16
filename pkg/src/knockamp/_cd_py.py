"""Pure-Python coordinate descent; same contract as the compiled ``_cd`` module."""
import numpy as np


def cd_lasso(X, beta, resid, col_sq, lam, tol, max_sweeps):
    m = X.shape[1]
    sweeps = 0

    def update(j):
        if col_sq[j] == 0.0:
            return 0.0
        xj = X[:, j]
        old = beta[j]
        z = xj @ resid + col_sq[j] * old
        new = np.sign(z) * max(abs(z) - lam, 0.0) / col_sq[j]
        d = new - old
        if d != 0.0:
            beta[j] = new
            np.subtract(resid, d * xj, out=resid)
        return abs(d)

    while sweeps < max_sweeps:
        change = max((update(j) for j in range(m)), default=0.0)
        sweeps += 1
        if change <= tol:
            return sweeps, True
        active = np.flatnonzero(beta)
        while sweeps < max_sweeps:
            change = max((update(j) for j in active), default=0.0)
            sweeps += 1
            if change <= tol:
                break
    return sweeps, False

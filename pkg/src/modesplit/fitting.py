"""Levenberg-Marquardt least squares with covariance estimates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from modesplit.errors import FitDiverged


@dataclass
class LMResult:
    params: np.ndarray
    cov: np.ndarray
    residual: np.ndarray
    cost: float  # sum of squared residuals
    iterations: int
    converged: bool

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


def covariance(jac: np.ndarray, residual: np.ndarray, scale_by_residual: bool = True) -> np.ndarray:
    """(J^T J)^-1, scaled by the residual variance s^2 = RSS/(m - p).

    Uses a pseudo-inverse so unidentifiable directions come back with zero
    rather than raising; callers see that through an infinite or zero sigma.
    """
    m, p = jac.shape
    jtj = jac.T @ jac
    cov = np.linalg.pinv(jtj, rcond=1e-15, hermitian=True)
    if scale_by_residual:
        dof = max(m - p, 1)
        cov = cov * float(residual @ residual) / dof
    return cov


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0,
    *,
    x_scale=None,
    max_iter: int = 200,
    xtol: float = 1e-12,
    ftol: float = 1e-15,
    feasible: Callable[[np.ndarray], bool] | None = None,
) -> LMResult:
    """Minimize ||residual(p)||^2.

    Converges when every component of the step satisfies
    ``|dp_i| <= xtol * max(|p_i|, x_scale_i)``, or when an accepted step
    lowers the cost by less than ``ftol`` relative. Raises
    :class:`FitDiverged` when ``max_iter`` is reached first or the
    residual turns non-finite.

    ``feasible`` may reject trial points (e.g. negative widths); they are
    handled like a cost increase.
    """
    p = np.asarray(p0, dtype=float).copy()
    scale = np.abs(p) if x_scale is None else np.broadcast_to(np.asarray(x_scale, float), p.shape)
    scale = np.where(scale > 0, scale, 1.0)
    r = residual(p)
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise FitDiverged("non-finite residual at the starting point")
    J = jacobian(p)
    lam = None
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        dmax = d.max() if d.size else 0.0
        d = np.maximum(d, 1e-12 * dmax if dmax > 0 else 1.0)
        if lam is None:
            lam = 1e-3
        try:
            step = np.linalg.solve(A + lam * np.diag(d), -g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(A + lam * np.diag(d), g, rcond=None)[0]
        small = np.all(np.abs(step) <= xtol * np.maximum(np.abs(p), scale))
        trial = p + step
        ok = feasible is None or feasible(trial)
        with np.errstate(over="ignore", invalid="ignore"):
            r_new = residual(trial) if ok else None
            cost_new = float(r_new @ r_new) if ok else np.inf
        if ok and not np.isfinite(cost_new):
            cost_new = np.inf
        if cost_new <= cost:
            drop = cost - cost_new
            p, r, cost = trial, r_new, cost_new
            J = jacobian(p)
            lam = max(lam / 3.0, 1e-12)
            if small or drop <= ftol * cost or cost == 0.0:
                return LMResult(p, covariance(J, r), r, cost, it, True)
        else:
            if small:
                # no downhill step left at this resolution
                return LMResult(p, covariance(J, r), r, cost, it, True)
            lam *= 4.0
            if lam > 1e16:
                return LMResult(p, covariance(J, r), r, cost, it, True)
    raise FitDiverged(f"no convergence after {max_iter} iterations (cost={cost:.3e})")

"""Nondegenerate mode pairs: prediction, splitting and ellipticity extraction.

Within one order the two orthogonal flexural modes differ only through their
area moments, so the frequency ratio R(n) = f_high / f_low equals the
ellipticity r1/r2 in linear beam theory. Low orders of real fibers show an
excess that decays with order; it is modeled as

    R(n) = eps * (1 + A * exp(-alpha * n)).

R(n) is the reciprocal of the major/minor frequency ratio used in much of
the literature, so it plateaus at eps rather than 1/eps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from modesplit.beam import BeamSpec, eigenfrequency_exact, numerical_modes
from modesplit.errors import InconsistentModel, InputError, InsufficientData, NumericalError
from modesplit.fitting import levenberg_marquardt
from modesplit.xsection import Axis, EllipseSection, ellipticity

PAIR_CSV_HEADER = ("order", "f_low_hz", "f_high_hz", "delta_hz", "ratio")


@dataclass(frozen=True)
class ModePair:
    """Both split eigenfrequencies of one order, plus optional fit data."""

    order: int
    f_low: float
    f_high: float
    area_low: float | None = None
    area_high: float | None = None
    sigma_f_low: float | None = None
    sigma_f_high: float | None = None
    sigma_area_low: float | None = None
    sigma_area_high: float | None = None

    def __post_init__(self):
        if not (0 < self.f_low <= self.f_high):
            raise InputError(f"need 0 < f_low <= f_high, got {self.f_low}, {self.f_high}")

    @property
    def ratio(self) -> float:
        return self.f_high / self.f_low

    @property
    def mean_frequency(self) -> float:
        return 0.5 * (self.f_low + self.f_high)

    @property
    def sigma_ratio(self) -> float | None:
        if self.sigma_f_low is None or self.sigma_f_high is None:
            return None
        return self.ratio * math.hypot(self.sigma_f_low / self.f_low, self.sigma_f_high / self.f_high)

    def with_order(self, order: int) -> ModePair:
        return replace(self, order=order)


@dataclass(frozen=True)
class ConvergenceModel:
    epsilon: float
    amplitude: float = 0.0
    decay: float = 1.0
    cutoff: int | None = None

    def __post_init__(self):
        if self.epsilon < 1 or self.amplitude < 0 or self.decay <= 0:
            raise InputError("need epsilon >= 1, amplitude >= 0, decay > 0")

    def ratio(self, n):
        return self.epsilon * (1.0 + self.amplitude * np.exp(-self.decay * np.asarray(n, dtype=float)))

    def effective_cutoff(self, sigma_epsilon: float, n_min: int = 1) -> int:
        """Smallest order >= n_min whose excess A*exp(-alpha*n) is below 0.1*sigma."""
        if self.amplitude <= 0:
            return n_min
        threshold = 0.1 * sigma_epsilon
        n = math.floor(math.log(self.amplitude / threshold) / self.decay) + 1
        while self.amplitude * math.exp(-self.decay * n) >= threshold:
            n += 1
        return max(n_min, n)


@dataclass(frozen=True)
class ConvergenceFit:
    model: ConvergenceModel
    sigma_epsilon: float
    sigma_amplitude: float
    sigma_decay: float
    residual_norm: float
    cutoff: int
    iterations: int


@dataclass(frozen=True)
class PlateauEstimate:
    epsilon: float
    sigma: float
    cutoff: int
    n_used: int
    convergence: ConvergenceFit | None = field(default=None, compare=False)


def predict_pairs(spec: BeamSpec, orders: Iterable[int], model: ConvergenceModel | None = None) -> list[ModePair]:
    eps = ellipticity(spec.section)
    if model is not None and not math.isclose(model.epsilon, eps, rel_tol=1e-9):
        raise InconsistentModel(f"model epsilon {model.epsilon} != section ellipticity {eps}")
    pairs = []
    for n in orders:
        f_low = eigenfrequency_exact(spec, Axis.LOW, n)
        if model is None:
            f_high = eigenfrequency_exact(spec, Axis.HIGH, n)
        else:
            f_high = f_low * float(model.ratio(n))
        pairs.append(ModePair(int(n), f_low, f_high))
    return pairs


def numerical_pairs(spec: BeamSpec, n_max: int, grid_points: int | None = None) -> list[ModePair]:
    """Pairs from the finite-difference solver on both axes."""
    grid = grid_points or max(4000, 10 * n_max)
    low = numerical_modes(spec, Axis.LOW, n_max, grid)
    high = numerical_modes(spec, Axis.HIGH, n_max, grid)
    return [ModePair(a.order, a.frequency, b.frequency) for a, b in zip(low, high)]


def frequency_splitting(pair: ModePair) -> float:
    return pair.f_high - pair.f_low


def _arrays(pairs: Sequence[ModePair]):
    n = np.array([p.order for p in pairs], dtype=float)
    R = np.array([p.ratio for p in pairs])
    sig = [p.sigma_ratio for p in pairs]
    w = None
    if all(s is not None and s > 0 for s in sig):
        w = 1.0 / np.array(sig)
    return n, R, w


def fit_convergence(pairs: Sequence[ModePair], max_iter: int = 200, xtol: float = 1e-12) -> ConvergenceFit:
    """Least-squares fit of R(n) = eps (1 + A exp(-alpha n)).

    Pairs carrying frequency uncertainties are weighted by them; the
    covariance is scaled by the reduced chi-square either way.
    """
    if len(pairs) < 6:
        raise InsufficientData(f"need >= 6 pairs, got {len(pairs)}")
    n, R, w = _arrays(pairs)
    if n.max() < 3 * n.min():
        raise InsufficientData("orders must span at least a factor of 3")
    weights = np.ones_like(R) if w is None else w
    top = n >= np.quantile(n, 0.75)
    eps0 = float(np.mean(R[top]))
    n_min = int(n.min())
    A0 = max(float(R[np.argmin(n)]) / eps0 - 1.0, 0.0)
    alpha0 = 2.0 / (n.max() - n.min())

    def constant_fit():
        wsum = np.sum(weights**2)
        eps = float(np.sum(weights**2 * R) / wsum)
        res = (R - eps) * weights
        dof = max(len(R) - 1, 1)
        sigma = math.sqrt(float(res @ res) / dof / wsum)
        model = ConvergenceModel(max(eps, 1.0), 0.0, alpha0)
        return ConvergenceFit(model, sigma, 0.0, math.inf, float(np.linalg.norm(res)),
                              n_min, 0)

    if A0 == 0.0:
        return constant_fit()

    def resid(p):
        eps, A, alpha = p
        return (R - eps * (1.0 + A * np.exp(-alpha * n))) * weights

    def jac(p):
        eps, A, alpha = p
        e = np.exp(-alpha * n)
        return -np.column_stack([1.0 + A * e, eps * e, -eps * A * n * e]) * weights[:, None]

    result = levenberg_marquardt(resid, jac, [eps0, A0, alpha0], max_iter=max_iter, xtol=xtol,
                                 x_scale=[1.0, A0, alpha0],
                                 feasible=lambda p: p[2] > 0)
    eps, A, alpha = result.params
    if A <= 0 or eps < 1:
        return constant_fit()
    s_eps, s_A, s_alpha = result.stderr
    model = ConvergenceModel(float(eps), float(A), float(alpha))
    floor = max(s_eps, 1e-12 * eps)
    cutoff = model.effective_cutoff(floor, n_min)
    model = replace(model, cutoff=cutoff)
    return ConvergenceFit(model, float(s_eps), float(s_A), float(s_alpha),
                          float(np.linalg.norm(result.residual)), cutoff, result.iterations)


def estimate_plateau(pairs: Sequence[ModePair], cutoff: int | None = None) -> PlateauEstimate:
    """Mean ratio over orders >= cutoff, with its standard error.

    The convergence fit is always attempted and attached. Without an
    explicit cutoff it supplies one; if that
    leaves fewer than three pairs the cutoff is lowered to the third-highest
    order. Per-pair ratio uncertainties, when present, enter as
    median(sigma_R)/sqrt(N) in quadrature with the scatter-based error.
    """
    if not pairs:
        raise InsufficientData("no pairs")
    orders = sorted(p.order for p in pairs)
    try:
        fit = fit_convergence(pairs)
    except (InsufficientData, NumericalError):
        fit = None
    if cutoff is None:
        cutoff = fit.cutoff if fit is not None else orders[0]
        if len(orders) >= 3:
            cutoff = min(cutoff, orders[-3])
    used = [p for p in pairs if p.order >= cutoff]
    if len(used) < 3:
        raise InsufficientData(f"only {len(used)} pairs at or above order {cutoff}")
    R = np.array([p.ratio for p in used])
    eps = float(R.mean())
    sem = float(R.std(ddof=1) / math.sqrt(len(R)))
    sig = [p.sigma_ratio for p in used]
    if all(s is not None for s in sig):
        sem = math.hypot(sem, float(np.median(sig)) / math.sqrt(len(R)))
    return PlateauEstimate(eps, sem, int(cutoff), len(used), fit)


def ellipticity_from_pairs(pairs: Sequence[ModePair], cutoff: int | None = None) -> tuple[float, float]:
    est = estimate_plateau(pairs, cutoff)
    return est.epsilon, est.sigma


def inverse_ratio_fit(spec: BeamSpec, ellipticities: Sequence[float], order: int = 10,
                      numerical: bool = False, grid_points: int | None = None) -> tuple[float, float]:
    """Slope and intercept of f_low/f_high against 1/eps at a fixed order.

    Sections keep the major semi-axis of ``spec`` and shrink the minor one.
    """
    r1 = spec.section.r1
    inv_eps, eta = [], []
    for eps in ellipticities:
        beam = spec.with_section(EllipseSection.from_major(r1, eps))
        if numerical:
            pair = numerical_pairs(beam, order, grid_points)[order - 1]
        else:
            pair = predict_pairs(beam, [order])[0]
        inv_eps.append(1.0 / eps)
        eta.append(pair.f_low / pair.f_high)
    slope, intercept = np.polyfit(inv_eps, eta, 1)
    return float(slope), float(intercept)


@dataclass
class AspectRatioStudy:
    rows: list[tuple[float, int, float]]  # (aspect ratio, order, R)
    epsilon: float
    max_deviation: float  # max |R - eps| over orders >= min_order_checked
    min_order_checked: int = 10


def aspect_ratio_study(base: BeamSpec, lengths: Sequence[float], orders: Sequence[int],
                       numerical: bool = False, grid_points: int | None = None,
                       tolerance: float = 1e-6) -> AspectRatioStudy:
    """Ratio table over beam lengths; raises if high orders leave the plateau."""
    eps = ellipticity(base.section)
    rows = []
    dev = 0.0
    for L in lengths:
        beam = base.with_length(L)
        if numerical:
            pairs = [p for p in numerical_pairs(beam, max(orders), grid_points) if p.order in set(orders)]
        else:
            pairs = predict_pairs(beam, orders)
        for p in pairs:
            rows.append((beam.aspect_ratio, p.order, p.ratio))
            if p.order >= 10:
                dev = max(dev, abs(p.ratio - eps))
    if dev > tolerance:
        raise NumericalError(f"ratio deviates from ellipticity by {dev:.3e} at high order")
    return AspectRatioStudy(rows, eps, dev)


def pairs_csv_text(pairs: Sequence[ModePair], prefix: dict[str, str] | None = None) -> str:
    """Pair table as CSV text; ``prefix`` adds leading constant columns."""
    prefix = prefix or {}
    lead = [str(v) for v in prefix.values()]
    lines = [",".join([*prefix, *PAIR_CSV_HEADER])]
    for p in pairs:
        lines.append(",".join(lead + [str(p.order), f"{p.f_low:.3f}", f"{p.f_high:.3f}",
                                      f"{frequency_splitting(p):.3f}", f"{p.ratio:.6f}"]))
    return "\n".join(lines) + "\n"


def write_pairs_csv(pairs: Sequence[ModePair], path: str | Path, prefix: dict | None = None) -> None:
    Path(path).write_text(pairs_csv_text(pairs, prefix))


def read_pairs_csv(path: str | Path) -> list[ModePair]:
    with open(path, newline="") as fh:
        return [ModePair(int(r["order"]), float(r["f_low_hz"]), float(r["f_high_hz"]))
                for r in csv.DictReader(fh)]

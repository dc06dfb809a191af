"""Inverse pipeline: power spectrum in, ellipticity report out."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks, peak_widths

from modesplit.beam import clamped_root
from modesplit.errors import (
    AmbiguousAssignment,
    FitDiverged,
    InputError,
    InsufficientData,
    ModesplitError,
    WindowTooNarrow,
)
from modesplit.fitting import levenberg_marquardt
from modesplit.splitting import ConvergenceFit, ModePair, estimate_plateau, frequency_splitting
from modesplit.synth import Spectrum
from modesplit.thermal import angle_from_measurements
from modesplit.xsection import axis_difference_from, difference_uncertainty

RESOLUTION_FACTOR = 1.0 / math.sqrt(3.0)  # two equal Lorentzians show a dip beyond this
MIN_WIDTH_BINS = 0.25


# -- peak detection ---------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    frequency: float
    height: float  # above the running-median baseline
    width: float  # FWHM estimate, Hz


def baseline(psd: np.ndarray, window: int = 101) -> np.ndarray:
    return median_filter(psd, size=window, mode="nearest")


def noise_sigma(spectrum: Spectrum, window: int = 101) -> float:
    """Robust (MAD) noise level of the baseline-subtracted spectrum."""
    excess = spectrum.psd - baseline(spectrum.psd, window)
    mad = np.median(np.abs(excess - np.median(excess)))
    return float(1.4826 * mad)


def detect_peaks(spectrum: Spectrum, min_prominence: float, min_separation: float,
                 baseline_window: int = 101) -> list[Candidate]:
    """Local maxima at least ``min_prominence`` above a running median.

    Maxima closer than ``min_separation`` (Hz) are thinned, keeping the
    taller one.
    """
    excess = spectrum.psd - baseline(spectrum.psd, baseline_window)
    distance = max(1, int(round(min_separation / spectrum.bin_width)))
    # the prominence test drops noise ripples riding on top of broad lines
    idx, props = find_peaks(excess, height=min_prominence, prominence=min_prominence, distance=distance)
    if len(idx) == 0:
        return []
    widths = peak_widths(excess, idx, rel_height=0.5)[0] * spectrum.bin_width
    return [Candidate(float(spectrum.frequencies[i]), float(h), float(w))
            for i, h, w in zip(idx, props["peak_heights"], widths)]


# -- Lorentzian fitting -----------------------------------------------------


@dataclass(frozen=True)
class PeakFit:
    f0: float
    sigma_f0: float
    gamma: float
    sigma_gamma: float
    area: float
    sigma_area: float
    residual_rms: float
    window: tuple[float, float]

    @property
    def height(self) -> float:
        return 2.0 * self.area / (math.pi * self.gamma)


@dataclass(frozen=True)
class DoubleFit:
    """Result of a two-line fit; ``high`` is None when only one line survived.

    ``unresolved`` marks two lines closer than about 0.58 mean widths, where
    the sum shows no dip and the split is not trustworthy.
    """

    low: PeakFit
    high: PeakFit | None
    baseline: float
    single: bool
    unresolved: bool
    iterations: int

    def __iter__(self):
        return iter((self.low, self.high))


def _lorentz_sum(x, p):
    b = p[0]
    y = np.full_like(x, b)
    for k in range(1, len(p), 3):
        c, g, a = p[k:k + 3]
        y += a * (g / (2 * np.pi)) / ((x - c) ** 2 + (g / 2) ** 2)
    return y


def _lorentz_jac(x, p):
    cols = [np.ones_like(x)]
    for k in range(1, len(p), 3):
        c, g, a = p[k:k + 3]
        u = x - c
        q = u * u + g * g / 4
        cols.append(a * g / np.pi * u / q**2)  # d/dc
        cols.append(a / (2 * np.pi) * (u * u - g * g / 4) / q**2)  # d/dg
        cols.append(g / (2 * np.pi) / q)  # d/da
    return np.column_stack(cols)


def _fit(x, y, p0, max_iter, xtol):
    span = float(x[-1] - x[0])
    res = levenberg_marquardt(
        lambda p: _lorentz_sum(x, p) - y,
        lambda p: _lorentz_jac(x, p),
        p0, max_iter=max_iter, xtol=xtol,
        x_scale=[1.0] + [1.0, 1.0, 1.0] * ((len(p0) - 1) // 3),
        # widths below a quarter bin only chase single noisy bins
        feasible=lambda p: bool(np.all(p[2::3] > MIN_WIDTH_BINS) and np.all(p[2::3] < span)
                                and np.all(p[3::3] > 0)),
    )
    return res


def _peakfit(p, err, k, origin, bw, scale, rms, window):
    c, g, a = p[k:k + 3]
    sc, sg, sa = err[k:k + 3]
    return PeakFit(origin + c * bw, sc * bw, g * bw, sg * bw, a * scale * bw, sa * scale * bw, rms, window)


def fit_double_lorentzian(spectrum: Spectrum, window: tuple[float, float],
                          seeds: Sequence[float] = (), width_guess: float | None = None,
                          max_iter: int = 200, xtol: float = 1e-10) -> DoubleFit:
    """Constant baseline plus two Lorentzians fitted over ``window`` (Hz).

    ``seeds`` are one or two candidate centers; a single seed is split into
    two starting points one bin apart. If the fitted centers end up within
    0.1 bin, or one line is not significant, a single-line fit is returned
    with ``single=True``.
    """
    f, y = spectrum.window(*window)
    if len(f) < 20:
        raise WindowTooNarrow(f"window {window} holds {len(f)} bins (< 20)")
    bw = spectrum.bin_width
    origin = float(f[0])
    scale = float(np.max(y)) or 1.0
    x = (f - origin) / bw
    ys = y / scale
    seeds = sorted(seeds)[:2] if seeds else [float(f[np.argmax(y)])]
    if len(seeds) > 2:
        raise InputError("at most two seeds")
    cs = [(s - origin) / bw for s in seeds]
    if len(cs) == 1:
        cs = [cs[0] - 0.5, cs[0] + 0.5]
    g0 = max((width_guess or 3 * bw) / bw, 1.0)
    b0 = float(np.percentile(ys, 10))
    p0 = [b0]
    for c in cs:
        i = int(np.clip(round(c), 0, len(x) - 1))
        h = max(ys[i] - b0, 1e-3)
        p0 += [c, g0, h * np.pi * g0 / 2 / (1 if len(seeds) == 2 else 2)]
    res = _fit(x, ys, np.array(p0), max_iter, xtol)
    p, err = res.params, res.stderr
    rms = float(np.sqrt(res.cost / len(x))) * scale
    if p[1] > p[4]:
        p = np.concatenate([p[:1], p[4:7], p[1:4]])
        err = np.concatenate([err[:1], err[4:7], err[1:4]])
    collapsed = abs(p[4] - p[1]) < 0.1
    weak = min(p[3] / err[3] if err[3] > 0 else np.inf, p[6] / err[6] if err[6] > 0 else np.inf) < 3.0
    outside = not (0 <= p[1] <= x[-1] and 0 <= p[4] <= x[-1])
    if collapsed or weak or outside:
        return _single(x, ys, p, origin, bw, scale, window, max_iter, xtol, res.iterations)
    low = _peakfit(p, err, 1, origin, bw, scale, rms, window)
    high = _peakfit(p, err, 4, origin, bw, scale, rms, window)
    unresolved = (high.f0 - low.f0) < RESOLUTION_FACTOR * 0.5 * (low.gamma + high.gamma)
    return DoubleFit(low, high, float(p[0] * scale), False, bool(unresolved), res.iterations)


def _single(x, ys, p, origin, bw, scale, window, max_iter, xtol, it0):
    k = 1 if p[3] >= p[6] else 4
    p0 = np.array([p[0], p[k], p[k + 1], p[3] + p[6]])
    p0[1] = float(np.clip(p0[1], 0, x[-1]))
    res = _fit(x, ys, p0, max_iter, xtol)
    rms = float(np.sqrt(res.cost / len(x))) * scale
    pk = _peakfit(res.params, res.stderr, 1, origin, bw, scale, rms, window)
    return DoubleFit(pk, None, float(res.params[0] * scale), True, False, it0 + res.iterations)


# -- pairing and order assignment -------------------------------------------


def order_spacing(sqrt_f: np.ndarray) -> float:
    """Gap in sqrt(f) between consecutive orders, estimated from peak positions.

    sqrt(f) grows by a constant step per order while the two lines of a pair
    sit much closer, so roughly half of all gaps are near one step. The
    median of the upper half seeds the step; counting whole steps per gap
    (intra-pair gaps round to zero) and dividing the total span by that count
    removes the bias of measuring between the upper line of one pair and the
    lower line of the next.
    """
    s = np.sort(np.asarray(sqrt_f, dtype=float))
    gaps = np.diff(s)
    gaps = gaps[gaps > 0]
    if len(gaps) == 0:
        raise InsufficientData("need at least two distinct peaks")
    sp0 = float(np.median(gaps[gaps >= np.median(gaps)]))
    steps = float(np.sum(np.round(gaps / sp0)))
    return float(gaps.sum() / steps) if steps > 0 else sp0


def cluster_candidates(cands: Sequence[Candidate], spacing: float, fraction: float = 0.1) -> list[list[Candidate]]:
    """Group candidates whose sqrt(f) gap is below ``fraction`` of the order spacing."""
    cands = sorted(cands, key=lambda c: c.frequency)
    clusters = [[cands[0]]]
    for prev, cur in zip(cands, cands[1:]):
        if math.sqrt(cur.frequency) - math.sqrt(prev.frequency) < fraction * spacing:
            clusters[-1].append(cur)
        else:
            clusters.append([cur])
    return clusters


@dataclass(frozen=True)
class OrderAssignment:
    orders: list[int]
    offset: int
    residual: float
    runner_up: float


def assign_orders(pairs: Sequence[ModePair]) -> list[ModePair]:
    """Give each pair its mode order from the spacing of sqrt(mean frequency).

    sqrt(f) is proportional to the clamped root beta_n*L, which approaches
    (2n+1)pi/2. Relative indices come from the spacing; the absolute offset
    is the one that makes sqrt(f) most nearly proportional to beta_n*L.
    """
    result = _assign(pairs)
    ordered = sorted(pairs, key=lambda p: p.mean_frequency)
    return [p.with_order(n) for p, n in zip(ordered, result.orders)]


def _pair_spacing(s: np.ndarray) -> float:
    # no intra-pair gaps here; the lower quartile is a single step even
    # when a large share of orders is missing
    gaps = np.diff(s)
    if np.any(gaps <= 0):
        raise AmbiguousAssignment("two pairs share a mean frequency")
    sp0 = float(np.quantile(gaps, 0.25))
    k = np.maximum(np.round(gaps / sp0), 1)
    return float(np.sum(gaps) / np.sum(k))


def _assign(pairs: Sequence[ModePair]) -> OrderAssignment:
    if len(pairs) < 4:
        raise InsufficientData(f"order assignment needs >= 4 pairs, got {len(pairs)}")
    s = np.sort(np.sqrt([p.mean_frequency for p in pairs]))
    sp = _pair_spacing(s)
    k = np.round((s - s[0]) / sp)
    for _ in range(3):
        sp = float(np.polyfit(k, s, 1)[0]) if np.ptp(k) > 0 else sp
        k = np.round((s - s[0]) / sp)
    if len(np.unique(k)) != len(k):
        raise AmbiguousAssignment("two pairs map to the same order")
    n0_est = max(1, int(round((2 * s[0] / sp - 1) / 2)))
    candidates = range(1, 2 * n0_est + 12)
    scores = []
    for n0 in candidates:
        x = np.array([clamped_root(int(n0 + kk)) for kk in k])
        a = float(x @ s / (x @ x))
        scores.append(float(np.sum((s - a * x) ** 2)))
    scores = np.array(scores)
    best = int(np.argmin(scores))
    rest = np.delete(scores, best)
    runner = float(rest.min()) if len(rest) else math.inf
    if runner <= 1.1 * scores[best]:
        raise AmbiguousAssignment(f"offsets indistinguishable (residuals {scores[best]:.3e}, {runner:.3e})")
    n0 = candidates[best]
    return OrderAssignment([int(n0 + kk) for kk in k], n0, float(scores[best]), runner)


# -- end-to-end ---------------------------------------------------------------


@dataclass
class AnalyzeOptions:
    min_prominence: float | None = None  # PSD units; default snr_threshold * noise
    snr_threshold: float = 6.0
    min_separation: float | None = None  # Hz; default two bins
    baseline_window: int = 101
    pairing_fraction: float = 0.1
    window_widths: float = 6.0  # half-window margin in line widths
    cutoff: int | None = None
    mean_radius: float | None = None  # m, for axis/diameter differences
    sigma_radius: float = 0.0
    max_iter: int = 200


@dataclass
class PairRow:
    order: int
    f_low: float
    f_high: float
    delta: float
    ratio: float
    sigma_ratio: float | None
    area_low: float | None
    area_high: float | None
    theta_deg: float | None
    used: bool


@dataclass
class EllipticityReport:
    status: str  # "ok", "no_splitting" or "failed:<stage>"
    epsilon: float | None = None
    sigma_epsilon: float | None = None
    theta_deg: float | None = None
    sigma_theta_deg: float | None = None
    cutoff: int | None = None
    pairs_used: int = 0
    fitted_epsilon: float | None = None
    convergence: dict[str, Any] | None = None
    axis_difference: float | None = None
    sigma_axis_difference: float | None = None
    diameter_difference: float | None = None
    sigma_diameter_difference: float | None = None
    orientation_fraction: float | None = None
    splitting_fit: dict[str, Any] | None = None
    counts: dict[str, int] = field(default_factory=dict)
    pairs: list[PairRow] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict[str, Any]:
        return _json_safe(asdict(self))

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> EllipticityReport:
        doc = dict(doc)
        doc["pairs"] = [PairRow(**row) for row in doc.get("pairs", [])]
        return cls(**doc)

    @classmethod
    def read_json(cls, path: str | Path) -> EllipticityReport:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_order_csv(self, path: str | Path) -> None:
        """Per-order table: order, ratio, splitting, angle."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["order", "ratio", "delta_hz", "theta_deg", "used"])
            for r in self.pairs:
                theta = "" if r.theta_deg is None else f"{r.theta_deg:.3f}"
                w.writerow([r.order, f"{r.ratio:.6f}", f"{r.delta:.3f}", theta, int(r.used)])


def _windows(spectrum: Spectrum, clusters, spacing: float, margin_widths: float):
    bw = spectrum.bin_width
    out = []
    for cl in clusters:
        lo, hi = cl[0].frequency, cl[-1].frequency
        width = max(max(c.width for c in cl), 3 * bw)
        # inter-order distance in Hz around this cluster
        gap_lo = 2 * math.sqrt(lo) * spacing
        gap_hi = 2 * math.sqrt(hi) * spacing
        margin = max(margin_widths * width, 10 * bw)
        a = max(lo - margin, lo - 0.4 * gap_lo)
        b = min(hi + margin, hi + 0.4 * gap_hi)
        tall = sorted(cl, key=lambda c: -c.height)[:2]
        out.append(((a, b), [c.frequency for c in tall], width))
    return out


def analyze(spectrum: Spectrum, options: AnalyzeOptions | None = None) -> EllipticityReport:
    """Detect, fit, pair, order and reduce a spectrum to an ellipticity report.

    Never raises for numerical trouble: a failing stage sets
    ``status="failed:<stage>"`` and the report carries what was computed
    up to that point.
    """
    opt = options or AnalyzeOptions()
    report = EllipticityReport(status="ok")
    bw = spectrum.bin_width

    sigma = noise_sigma(spectrum, opt.baseline_window)
    prominence = opt.min_prominence
    if prominence is None:
        prominence = opt.snr_threshold * sigma if sigma > 0 else 1e-12 * float(spectrum.psd.max())
    separation = opt.min_separation if opt.min_separation is not None else 2 * bw
    cands = detect_peaks(spectrum, prominence, separation, opt.baseline_window)
    report.counts["candidates"] = len(cands)
    if len(cands) < 2:
        report.status = "failed:detect"
        report.messages.append(f"{len(cands)} candidate peaks")
        return report

    spacing = order_spacing(np.sqrt([c.frequency for c in cands]))
    clusters = cluster_candidates(cands, spacing, opt.pairing_fraction)
    fits: list[DoubleFit] = []
    failed = 0
    for window, seeds, width in _windows(spectrum, clusters, spacing, opt.window_widths):
        try:
            fits.append(fit_double_lorentzian(spectrum, window, seeds, width, max_iter=opt.max_iter))
        except (FitDiverged, WindowTooNarrow, InputError) as exc:
            failed += 1
            report.messages.append(f"window {window[0]:.1f}-{window[1]:.1f} Hz: {exc}")
    report.counts.update(windows=len(clusters), failed_windows=failed,
                         single_peaks=sum(f.single for f in fits),
                         unresolved=sum(f.unresolved for f in fits))

    pairs, singles = [], []
    for fit in fits:
        if fit.single or fit.unresolved:
            singles.append(fit)
            continue
        gap_limit = opt.pairing_fraction * 2 * math.sqrt(fit.low.f0) * spacing
        if fit.high.f0 - fit.low.f0 >= gap_limit:
            singles.append(fit)
            continue
        pairs.append(ModePair(1, fit.low.f0, fit.high.f0, fit.low.area, fit.high.area,
                              fit.low.sigma_f0, fit.high.sigma_f0, fit.low.sigma_area, fit.high.sigma_area))
    report.counts["pairs"] = len(pairs)
    report.counts["peaks"] = 2 * len(pairs) + len(singles)

    if len(pairs) < 3:
        report.status = "no_splitting"
        widths = [f.low.gamma / f.low.f0 for f in fits]
        report.epsilon = 1.0
        report.sigma_epsilon = float(RESOLUTION_FACTOR * np.median(widths)) if widths else None
        report.messages.append("no resolved mode pairs; splitting below the line width")
        return report

    try:
        pairs = assign_orders(pairs)
    except ModesplitError as exc:
        report.status = "failed:assign_orders"
        report.messages.append(str(exc))
        report.pairs = [_row(p, None, False) for p in pairs]
        return report

    try:
        est = estimate_plateau(pairs, opt.cutoff)
    except ModesplitError as exc:
        report.status = "failed:plateau"
        report.messages.append(str(exc))
        report.pairs = [_row(p, None, False) for p in pairs]
        return report
    fit: ConvergenceFit | None = est.convergence
    report.epsilon, report.sigma_epsilon = est.epsilon, est.sigma
    report.cutoff, report.pairs_used = est.cutoff, est.n_used
    if fit is not None:
        report.fitted_epsilon = fit.model.epsilon
        report.convergence = {
            "epsilon": fit.model.epsilon, "sigma_epsilon": fit.sigma_epsilon,
            "amplitude": fit.model.amplitude, "sigma_amplitude": fit.sigma_amplitude,
            "decay": fit.model.decay, "sigma_decay": _finite(fit.sigma_decay),
            "residual_norm": fit.residual_norm, "cutoff": fit.cutoff,
        }

    rows, thetas = [], []
    for p in pairs:
        est_theta = angle_from_measurements(p.area_low, p.area_high, (p.f_low / p.f_high) ** 2)
        theta = math.degrees(est_theta.theta)
        used = p.order >= est.cutoff
        rows.append(_row(p, theta, used))
        if used:
            thetas.append(theta)
    report.pairs = rows
    report.theta_deg = float(np.mean(thetas))
    report.sigma_theta_deg = float(np.std(thetas, ddof=1)) if len(thetas) > 1 else 0.0

    used_pairs = [p for p in pairs if p.order >= est.cutoff]
    report.orientation_fraction = orientation_fraction(used_pairs, report.theta_deg,
                                                       report.sigma_theta_deg)
    if report.orientation_fraction is not None and report.orientation_fraction < 0.9:
        report.messages.append("fewer than 90% of pairs have the expected amplitude orientation")
    report.splitting_fit = splitting_fit(used_pairs)

    if opt.mean_radius is not None:
        r = opt.mean_radius
        report.axis_difference = axis_difference_from(r, report.epsilon)
        report.diameter_difference = 2 * report.axis_difference
        report.sigma_axis_difference, report.sigma_diameter_difference = difference_uncertainty(
            r, report.epsilon, report.sigma_epsilon, opt.sigma_radius)
    return report


def splitting_fit(pairs: Sequence[ModePair]) -> dict[str, Any] | None:
    """Straight-line fit of splitting against order.

    Only the pairs passed in are fitted; the analyzer passes the plateau
    region (order >= cutoff), where the splitting grows linearly with order.
    """
    if len(pairs) < 3:
        return None
    n = np.array([p.order for p in pairs], float)
    d = np.array([p.f_high - p.f_low for p in pairs])
    (slope, intercept), cov = np.polyfit(n, d, 1, cov=True)
    return {"slope_hz_per_order": float(slope), "sigma_slope": float(math.sqrt(cov[0, 0])),
            "intercept_hz": float(intercept), "orders": [int(n.min()), int(n.max())],
            "region": "order >= cutoff"}


def orientation_fraction(pairs: Sequence[ModePair], theta_deg: float, sigma_theta_deg: float = 0.0,
                         n_sigma: float = 2.0) -> float | None:
    """Share of pairs whose high-frequency line is the weaker one after back-projection.

    Back-projection divides each fitted area by its weight at the mean angle.
    The expected ratio (f_high/f_low)^2 exceeds one by only 2(eps - 1), so a
    pair counts as reversed only when its ratio falls below one by more than
    ``n_sigma`` standard errors (area errors plus the error of the mean angle).
    """
    th = math.radians(theta_deg)
    if not (0 < th < math.pi / 2) or not pairs:
        return None
    dth = math.radians(sigma_theta_deg) / math.sqrt(len(pairs))
    tan2_rel = 2 * dth / (math.sin(th) * math.cos(th))
    ok = []
    for p in pairs:
        q = (p.area_low / math.sin(th) ** 2) / (p.area_high / math.cos(th) ** 2)
        rel = tan2_rel ** 2
        if p.sigma_area_low and p.sigma_area_high:
            rel += (p.sigma_area_low / p.area_low) ** 2 + (p.sigma_area_high / p.area_high) ** 2
        ok.append(q - 1.0 > -n_sigma * q * math.sqrt(rel))
    return float(np.mean(ok))


def _json_safe(obj):
    # strict JSON has no inf/nan
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


def _row(p: ModePair, theta, used) -> PairRow:
    return PairRow(p.order, p.f_low, p.f_high, frequency_splitting(p), p.ratio, p.sigma_ratio,
                   p.area_low, p.area_high, theta, used)


def aggregate_reports(reports: Sequence[EllipticityReport]) -> dict[str, float]:
    """Mean and sample standard deviation of epsilon over several samples."""
    eps = np.array([r.epsilon for r in reports if r.epsilon is not None])
    if len(eps) == 0:
        raise InsufficientData("no report carries an ellipticity")
    return {
        "n": int(len(eps)),
        "epsilon_mean": float(eps.mean()),
        "epsilon_std": float(eps.std(ddof=1)) if len(eps) > 1 else 0.0,
        "sigma_epsilon_median": float(np.median([r.sigma_epsilon for r in reports if r.sigma_epsilon is not None])),
    }

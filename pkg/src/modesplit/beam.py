"""Clamped-clamped Euler-Bernoulli flexural modes.

Closed-form frequencies and shapes for uniform beams, and a finite-difference
solver for beams whose section varies along the axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from modesplit.errors import ConvergenceError, InputError, ResolutionError
from modesplit.xsection import (
    Axis,
    EllipseSection,
    Material,
    SILICA,
    area,
    moment_for_displacement_along,
)

ROOT_ORDER_CAP = 1_000_000


@dataclass(frozen=True)
class TabulatedProfile:
    """Sections sampled at strictly increasing axial positions spanning [0, L]."""

    z: tuple[float, ...]
    sections: tuple[EllipseSection, ...]

    def __post_init__(self):
        if len(self.z) != len(self.sections) or len(self.z) < 2:
            raise InputError("profile needs at least two (z, section) samples")
        if np.any(np.diff(self.z) <= 0):
            raise InputError("profile z must be strictly increasing")

    def radii(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated semi-axes at positions ``z``."""
        r1 = np.interp(z, self.z, [s.r1 for s in self.sections])
        r2 = np.interp(z, self.z, [s.r2 for s in self.sections])
        return r1, r2

    @property
    def mean_radius(self) -> float:
        r = np.array([s.mean_radius for s in self.sections])
        return float(np.trapezoid(r, self.z) / (self.z[-1] - self.z[0]))

    @classmethod
    def read_csv(cls, path: str | Path) -> TabulatedProfile:
        """Read a ``z_m,r1_m,r2_m`` CSV file."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"z_m", "r1_m", "r2_m"} - set(reader.fieldnames or ())
            if missing:
                raise InputError(f"{path}: missing columns {sorted(missing)}")
            rows = [(float(r["z_m"]), float(r["r1_m"]), float(r["r2_m"])) for r in reader]
        return cls(
            z=tuple(r[0] for r in rows),
            sections=tuple(EllipseSection(r[1], r[2]) for r in rows),
        )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("z_m,r1_m,r2_m\n")
            for z, s in zip(self.z, self.sections):
                fh.write(f"{z:.9e},{s.r1:.9e},{s.r2:.9e}\n")


Profile = Union[EllipseSection, TabulatedProfile]


@dataclass(frozen=True)
class BeamSpec:
    """A doubly clamped beam.

    Attributes:
        length: Suspended length L (m).
        profile: A single :class:`EllipseSection` for a uniform beam, or a
            :class:`TabulatedProfile` for a varying one.
        material: Elastic constants.
        tension: Optional axial tension (N). Only the numerical solver uses it.
    """

    length: float
    profile: Profile
    material: Material = SILICA
    tension: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise InputError("length must be positive")
        if self.tension < 0:
            raise InputError("tension must be non-negative")
        if isinstance(self.profile, TabulatedProfile):
            z = self.profile.z
            if not (math.isclose(z[0], 0.0, abs_tol=1e-12 * self.length)
                    and math.isclose(z[-1], self.length, rel_tol=1e-9)):
                raise InputError("tabulated profile must span [0, L]")

    @property
    def uniform(self) -> bool:
        return isinstance(self.profile, EllipseSection)

    @property
    def section(self) -> EllipseSection:
        if not self.uniform:
            raise InputError("beam profile is not uniform")
        return self.profile

    @property
    def aspect_ratio(self) -> float:
        """Length over mean diameter; 1-11 mm at 250 nm gives 2000-22000."""
        return self.length / (2.0 * self.profile.mean_radius)

    def with_length(self, length: float) -> BeamSpec:
        return BeamSpec(length, self.profile, self.material, self.tension)

    def with_section(self, section: EllipseSection) -> BeamSpec:
        return BeamSpec(self.length, section, self.material, self.tension)


@dataclass
class Mode:
    order: int
    frequency: float  # Hz
    axis: Axis
    z: np.ndarray = field(repr=False)
    shape: np.ndarray = field(repr=False)


# -- closed form ------------------------------------------------------------


def _sech(x: float) -> float:
    e = math.exp(-abs(x))
    return 2.0 * e / (1.0 + e * e)


@lru_cache(maxsize=4096)
def clamped_root(n: int) -> float:
    """n-th positive root of cos(x)cosh(x) = 1, i.e. beta_n*L.

    Solved as cos(x) = sech(x), which stays finite for large x. Past
    ``ROOT_ORDER_CAP`` the asymptote (2n+1)pi/2 is returned; the two agree
    far below double precision there.
    """
    n = int(n)
    if n < 1:
        raise InputError("order must be >= 1")
    mid = (n + 0.5) * math.pi
    if n > ROOT_ORDER_CAP:
        return mid
    f = lambda x: math.cos(x) - _sech(x)
    return brentq(f, mid - math.pi / 4, mid + math.pi / 4, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _stiffness_per_mass(spec: BeamSpec, axis: Axis | str) -> float:
    s = spec.section
    return spec.material.young_modulus * moment_for_displacement_along(s, axis) / (
        spec.material.density * area(s)
    )


def eigenfrequency_exact(spec: BeamSpec, axis: Axis | str, n: int) -> float:
    """Euler-Bernoulli frequency (Hz) of order ``n`` for a uniform beam."""
    x = clamped_root(n)
    return x * x / (2 * math.pi * spec.length**2) * math.sqrt(_stiffness_per_mass(spec, axis))


def eigenfrequency_asymptotic(spec: BeamSpec, n: int) -> float:
    """f = sqrt(E/rho) (2n+1)^2 pi r / (16 L^2) for a circular uniform beam."""
    s = spec.section
    if not math.isclose(s.r1, s.r2, rel_tol=1e-12):
        raise InputError("asymptotic formula applies to circular sections")
    return spec.material.sound_speed * (2 * n + 1) ** 2 * math.pi * s.r1 / (16 * spec.length**2)


def clamped_shape(xi: np.ndarray, x: float, derivative: bool = False) -> np.ndarray:
    """Unnormalized clamped-clamped shape at ``xi = z/L`` for ``x = beta*L``.

    The hyperbolic terms are rewritten with exp(a - x) and exp(-a) so nothing
    overflows for large x. With ``derivative=True`` returns dw/da, a = x*xi.
    """
    xi = np.asarray(xi, dtype=float)
    a = x * xi
    e = math.exp(-x)
    s, c = math.sin(x), math.cos(x)
    # sigma = (cosh x - cos x) / (sinh x - sin x), scaled by exp(-x)
    d = 1.0 - e * e - 2.0 * e * s
    sigma = (1.0 + e * e - 2.0 * e * c) / d
    grow = (c - s - e) * np.exp(a - x) / d
    decay = (1.0 - (s + c) * e) * np.exp(-a) / d
    if derivative:
        return grow - decay + np.sin(a) + sigma * np.cos(a)
    return grow + decay - np.cos(a) + sigma * np.sin(a)


def _normalize(shape: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(shape))
    shape = shape / peak
    # first sample that clearly leaves zero decides the sign
    first = np.flatnonzero(np.abs(shape) > 1e-3)[0]
    return shape if shape[first] > 0 else -shape


def mode_shape(spec: BeamSpec, n: int, samples: int = 512, axis: Axis | str = Axis.LOW) -> Mode:
    if samples < 16:
        raise InputError("need at least 16 samples")
    z = np.linspace(0.0, spec.length, samples)
    w = clamped_shape(z / spec.length, clamped_root(n))
    return Mode(n, eigenfrequency_exact(spec, axis, n), Axis(axis), z, _normalize(w))


# -- finite differences -----------------------------------------------------


def _section_arrays(spec: BeamSpec, axis: Axis, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(E*I, rho*A) at positions z."""
    if spec.uniform:
        r1 = np.full_like(z, spec.section.r1)
        r2 = np.full_like(z, spec.section.r2)
    else:
        r1, r2 = spec.profile.radii(z)
    moment = np.pi * r1**3 * r2 / 4 if axis is Axis.HIGH else np.pi * r1 * r2**3 / 4
    return spec.material.young_modulus * moment, spec.material.density * np.pi * r1 * r2


def _second_difference(n_intervals: int) -> sp.csr_matrix:
    """Curvature at nodes 0..N from interior deflections 1..N-1 (unit spacing).

    Clamped ends enter through ghost nodes w[-1] = w[1], w[N+1] = w[N-1].
    """
    N = n_intervals
    rows, cols, vals = [], [], []
    for i in range(N + 1):
        for j, v in ((i - 1, 1.0), (i, -2.0), (i + 1, 1.0)):
            if j == -1:
                j = 1
            elif j == N + 1:
                j = N - 1
            if 1 <= j <= N - 1:
                rows.append(i)
                cols.append(j - 1)
                vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N + 1, N - 1))


def _first_difference(n_intervals: int) -> sp.csr_matrix:
    """Slopes on the N intervals from interior deflections (unit spacing)."""
    N = n_intervals
    d = sp.diags([np.ones(N), -np.ones(N)], [-1, 0], shape=(N, N + 1)).tocsr()
    return d[:, 1:N]


@dataclass
class _Discretization:
    z: np.ndarray
    bend: np.ndarray  # trapezoid-weighted E*I/h^3 at nodes 0..N (dimensionless)
    pull: np.ndarray  # T/h on intervals
    mass: np.ndarray  # rho*A*h at interior nodes
    B: sp.csr_matrix
    G: sp.csr_matrix
    scale: float  # converts dimensionless eigenvalue to omega^2


def _discretize(spec: BeamSpec, axis: Axis, n_intervals: int) -> _Discretization:
    N = n_intervals
    L = spec.length
    z = np.linspace(0.0, L, N + 1)
    EI, rhoA = _section_arrays(spec, axis, z)
    EI_ref, rhoA_ref = EI.mean(), rhoA.mean()
    h = 1.0 / N
    w = np.ones(N + 1)
    w[0] = w[-1] = 0.5
    bend = w * (EI / EI_ref) * h / h**4
    if spec.tension > 0:
        pull = np.full(N, spec.tension * L**2 / EI_ref / h)
    else:
        pull = np.zeros(N)
    mass = (rhoA / rhoA_ref)[1:N] * h
    scale = EI_ref / (rhoA_ref * L**4)
    return _Discretization(z, bend, pull, mass, _second_difference(N), _first_difference(N), scale)


def assemble(spec: BeamSpec, axis: Axis | str, grid_points: int) -> tuple[sp.csr_matrix, np.ndarray, float]:
    """Banded stiffness matrix K and lumped mass vector of the FD model.

    Returns ``(K, mass, scale)`` such that omega^2 = scale * lambda for
    K v = lambda diag(mass) v. K is symmetric positive definite with
    half-bandwidth 2.
    """
    d = _discretize(spec, Axis(axis), grid_points)
    K = d.B.T @ sp.diags(d.bend) @ d.B
    if d.pull.any():
        K = K + d.G.T @ sp.diags(d.pull) @ d.G
    return K.tocsr(), d.mass, d.scale


def _inverse_operator(d: _Discretization) -> LinearOperator:
    """x -> M^(1/2) K^-1 M^(1/2) x without forming K.

    K = B^T C B (+ G^T S G) is inverted through the mixed system
    [-C^-1, B; B^T, 0] whose condition number grows like N^2 instead of
    N^4, which keeps the lowest eigenvalues accurate on fine grids.
    """
    N = len(d.bend) - 1
    n = N - 1
    with_pull = bool(d.pull.any())
    blocks = [[sp.diags(-1.0 / d.bend), None, d.B]]
    if with_pull:
        blocks.append([None, sp.diags(-1.0 / d.pull), d.G])
        blocks.append([d.B.T, d.G.T, None])
    else:
        blocks.append([d.B.T, None])
        blocks = [[blocks[0][0], blocks[0][2]], blocks[1]]
    A = sp.bmat(blocks).tocsc()
    n_m, n_s = N + 1, (N if with_pull else 0)
    # interleave unknowns by position along the beam to keep the band narrow
    pos = np.concatenate([
        np.arange(N + 1, dtype=float),
        np.arange(N, dtype=float) + 0.5 if with_pull else np.empty(0),
        np.arange(1, N, dtype=float) + 0.25,
    ])
    perm = np.argsort(pos, kind="stable")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    lu = splu(A[perm][:, perm].tocsc(), permc_spec="NATURAL")
    root_m = np.sqrt(d.mass)
    offset = n_m + n_s

    def matvec(y):
        rhs = np.zeros(len(perm))
        rhs[offset:] = root_m * np.ravel(y)
        sol = lu.solve(rhs[perm])[inv]
        return root_m * sol[offset:]

    return LinearOperator((n, n), matvec=matvec, dtype=float)


def numerical_modes(
    spec: BeamSpec, axis: Axis | str, n_max: int, grid_points: int = 4000
) -> list[Mode]:
    """Lowest ``n_max`` flexural modes from a second-order FD model.

    ``grid_points`` is the number of intervals along the beam and must be at
    least ``10 * n_max``.
    """
    axis = Axis(axis)
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    if grid_points < 10 * n_max:
        raise ResolutionError(f"grid_points={grid_points} < 10*n_max={10 * n_max}")
    d = _discretize(spec, axis, grid_points)
    op = _inverse_operator(d)
    n = grid_points - 1
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        mu, vecs = eigsh(op, k=n_max, which="LA", tol=0.0, v0=v0,
                         ncv=min(n, max(2 * n_max + 1, 20)), maxiter=10 * n)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(str(exc)) from exc
    order = np.argsort(-mu)
    modes = []
    for k, idx in enumerate(order, start=1):
        lam = 1.0 / mu[idx]
        freq = math.sqrt(lam * d.scale) / (2 * math.pi)
        w = np.zeros(grid_points + 1)
        w[1:-1] = vecs[:, idx] / np.sqrt(d.mass)
        modes.append(Mode(k, freq, axis, d.z, _normalize(w)))
    return modes


def modal_mass(spec: BeamSpec, mode: Mode) -> float:
    """rho*A * integral of w^2 dz for the max-normalized shape (kg)."""
    _, rhoA = _section_arrays(spec, mode.axis, mode.z)
    return float(np.trapezoid(rhoA * mode.shape**2, mode.z))


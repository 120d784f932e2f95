"""Phase-space classification by central exponents, invariant-set audits and
avoidance statistics.

The survey samples one point per centre cell of an ``n x n`` raster of the
centre torus, paired with a base point from an ``m x m`` base grid (cell
``k`` uses base point ``k mod m^2``), so a run costs ``n^2`` orbits rather
than a full 4-dimensional grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .anosov_katok import InvariantSetSpec
from .lyapunov import benettin_spectrum
from .maps import MapExpr, wrap

NEGATIVE, ZERO, UNDECIDED = 0, 1, 2
LABELS = ("negative-central", "zero-central", "undecided")

# Base points for the extra hyperbolic block of the T^6 variant are the
# first block's points shifted by this irrational offset.
_EXTRA_BLOCK_SHIFT = np.array([0.6180339887498949, 0.4142135623730951])


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


def survey_points(dim: int, center, n_center: int = 64, n_base: int = 16) -> np.ndarray:
    """Survey sample points, shape ``(n_center^2, dim)`` in row-major cell order."""
    g = (np.arange(n_center) + 0.5) / n_center
    C = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    b = (np.arange(n_base) + 0.5) / n_base
    B = np.stack(np.meshgrid(b, b, indexing="ij"), -1).reshape(-1, 2)
    B = B[np.arange(len(C)) % len(B)]
    X = np.zeros((len(C), dim))
    X[:, list(center)] = C
    rest = [k for k in range(dim) if k not in center]
    for blk in range(len(rest) // 2):
        X[:, rest[2 * blk : 2 * blk + 2]] = wrap(B + blk * _EXTRA_BLOCK_SHIFT)
    return X


def _spectra(f: MapExpr, X, n_time: int, burn_in: int, threads: int = 1, chunk: int = 1024):
    parts = [X[k : k + chunk] for k in range(0, len(X), chunk)]

    def run(P):
        return benettin_spectrum(f, P, n_time, 1, burn_in).exponents

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(run, parts))
    else:
        out = [run(P) for P in parts]
    return np.concatenate(out)


def middle_pair(spectra: np.ndarray, n_central: int = 2) -> np.ndarray:
    k = (spectra.shape[1] - n_central) // 2
    return spectra[:, k : k + n_central]


def noise_floor(F: MapExpr, X, n_time: int, burn_in: int = 0, threads: int = 1) -> float:
    """Largest central magnitude of the reference map (e.g. ``A x T``) at ``X``."""
    return float(np.abs(middle_pair(_spectra(F, X, n_time, burn_in, threads))).max())


def label_cells(central: np.ndarray, threshold: float) -> np.ndarray:
    neg = (central < -threshold).all(axis=-1)
    zero = (np.abs(central) < 0.5 * threshold).all(axis=-1)
    return np.where(neg, NEGATIVE, np.where(zero, ZERO, UNDECIDED))


@dataclass
class SurveyRaster:
    """Per-cell labels, raw central pairs and full spectra on the centre raster."""

    n_center: int
    n_base: int
    points: np.ndarray
    labels: np.ndarray
    central: np.ndarray
    spectra: np.ndarray
    threshold: float
    n_time: int
    burn_in: int
    meta: dict = field(default_factory=dict)

    def fraction(self, label: int) -> float:
        return float((self.labels == label).mean())

    def interval(self, label: int) -> tuple[float, float]:
        return wilson_interval(int((self.labels == label).sum()), self.labels.size)

    @property
    def fractions(self) -> dict:
        return {name: self.fraction(k) for k, name in enumerate(LABELS)}

    def cell_of(self, X, center) -> tuple[np.ndarray, np.ndarray]:
        C = wrap(np.asarray(X)[:, list(center)])
        idx = np.minimum((C * self.n_center).astype(int), self.n_center - 1)
        return idx[:, 0], idx[:, 1]


def classify_phase_space(
    f: MapExpr,
    n_time: int,
    threshold: float,
    center=(2, 3),
    n_center: int = 64,
    n_base: int = 16,
    burn_in: int = 0,
    threads: int = 1,
    meta: dict | None = None,
) -> SurveyRaster:
    """Label each centre cell: both central exponents ``< -threshold`` is
    negative-central, both within ``threshold/2`` of 0 is zero-central, the
    rest undecided."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    X = survey_points(f.dim, center, n_center, n_base)
    spec = _spectra(f, X, n_time, burn_in, threads)
    central = middle_pair(spec)
    labels = label_cells(central, threshold)
    n = n_center
    return SurveyRaster(
        n, n_base, X, labels.reshape(n, n), central.reshape(n, n, 2), spec.reshape(n, n, -1),
        threshold, n_time, burn_in, dict(meta or {}),
    )


def orbit_entry(f: MapExpr, raster: SurveyRaster, n_steps: int, center=(2, 3)) -> np.ndarray:
    """Cells whose survey point's forward orbit visits a negative-central
    cell (by centre projection) within ``n_steps`` steps."""
    neg = raster.labels == NEGATIVE
    hit = neg.reshape(-1).copy()
    if not neg.any():
        return hit.reshape(neg.shape)
    X = raster.points.copy()
    for _ in range(n_steps):
        X = f._apply(X)
        i, j = raster.cell_of(X, center)
        hit |= neg[i, j]
    return hit.reshape(neg.shape)


@dataclass
class DensityReport:
    delta: float
    block: int
    passed: np.ndarray
    failures: list

    @property
    def pass_fraction(self) -> float:
        return float(self.passed.mean())


def density_audit(raster: SurveyRaster, delta: float, entry: np.ndarray | None = None) -> DensityReport:
    """Every ``delta``-block of the centre raster must contain a
    negative-central cell or (when ``entry`` is given) a cell whose orbit
    enters the negative-central class.  Failures are listed by block centre."""
    n = raster.n_center
    m = max(1, int(round(delta * n)))
    good = raster.labels == NEGATIVE
    if entry is not None:
        good = good | entry
    starts = range(0, n, m)
    passed = np.zeros((len(starts), len(starts)), dtype=bool)
    failures = []
    for a, i in enumerate(starts):
        for b, j in enumerate(starts):
            passed[a, b] = good[i : i + m, j : j + m].any()
            if not passed[a, b]:
                ci = (i + min(m, n - i) / 2) / n
                cj = (j + min(m, n - j) / 2) / n
                failures.append((ci, cj))
    return DensityReport(delta, m, passed, failures)


@dataclass
class AuditReport:
    fraction: float
    n_samples: int
    n_time: int
    failed: np.ndarray

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(int(round(self.fraction * self.n_samples)), self.n_samples)


def k_invariance_audit(
    T: MapExpr,
    K: InvariantSetSpec,
    n_samples: int,
    n_time: int,
    rng: np.random.Generator,
    tol: float = 1e-9,
) -> AuditReport:
    """Fraction of sampled ``K``-points whose length-``n_time`` orbit stays in
    ``K`` up to ``tol``."""
    X = K.sample(rng, n_samples)
    alive = np.ones(len(X), dtype=bool)
    for _ in range(n_time):
        X = T._apply(X)
        alive &= K.membership(X, tol)
    return AuditReport(float(alive.mean()), n_samples, n_time, np.flatnonzero(~alive))


def avoidance_statistics(T: MapExpr, X, N: int, box: tuple[float, float]) -> AuditReport:
    """Fraction of points whose length-``N`` orbit (including the start)
    never enters the open square ``(lo, hi)^2``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    lo, hi = box
    X = wrap(np.atleast_2d(np.asarray(X, dtype=float)))
    clear = np.ones(len(X), dtype=bool)
    for k in range(N):
        inside = ((X > lo) & (X < hi)).all(axis=1)
        clear &= ~inside
        if k + 1 < N:
            X = T._apply(X)
    return AuditReport(float(clear.mean()), len(clear), N, np.flatnonzero(~clear))


def birkhoff_dispersion(f: MapExpr, X, n: int, center=(2, 3)) -> float:
    """Standard deviation across ``X`` of the Birkhoff averages of
    ``cos(2 pi y_1)`` on the first centre coordinate (ergodicity evidence)."""
    if len(X) < 2:
        return float("nan")
    X = wrap(np.asarray(X, dtype=float))
    acc = np.zeros(len(X))
    for _ in range(n):
        acc += np.cos(2 * np.pi * X[:, center[0]])
        X = f._apply(X)
    return float((acc / n).std(ddof=1))

"""Smooth scalar profiles used to modulate shears and twists.

Every profile is vectorised over an ``(N, d)`` array of torus points and
returns its value together with the partial derivatives along the
coordinates it reads.  Compactly supported profiles are built from the
flat function ``exp(-1/t)`` so that they vanish *exactly* (bitwise zero)
outside their closed support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def min_image(t):
    """Representative of ``t`` mod 1 in ``[-1/2, 1/2)``."""
    return t - np.floor(t + 0.5)


def _flat(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _flat_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / (tp * tp)
    return out


def smoothstep(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``.

    Returns ``(value, derivative)``.
    """
    t = np.asarray(t, dtype=float)
    a, b = _flat(t), _flat(1.0 - t)
    da, db = _flat_prime(t), -_flat_prime(1.0 - t)
    den = a + b
    val = a / den
    dval = (da * den - a * (da + db)) / (den * den)
    return val, dval


@dataclass(frozen=True)
class RadialProfile:
    """Annular bump in a radius ``r``.

    Zero for ``r <= r0`` and ``r >= r3``, one on ``[r1, r2]``.  With
    ``r0 == r1 == 0`` it is a disk plateau.
    """

    r0: float
    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        if not (0.0 <= self.r0 <= self.r1 < self.r2 < self.r3 < 0.5):
            raise ValueError(f"bad radial profile radii {self!r}")

    @property
    def support(self) -> float:
        return self.r3

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        down, ddown = smoothstep((r - self.r2) / (self.r3 - self.r2))
        outer = 1.0 - down
        douter = -ddown / (self.r3 - self.r2)
        if self.r1 <= 0.0:
            return outer, douter
        up, dup = smoothstep((r - self.r0) / (self.r1 - self.r0))
        dup = dup / (self.r1 - self.r0)
        return up * outer, dup * outer + up * douter


class Factor:
    """A scalar function of a few torus coordinates."""

    coords = ()

    @property
    def winding_degree(self) -> int:
        return 0

    def evaluate(self, X):
        """Return ``(value (N,), grad (N, len(coords)))``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Plateau(Factor):
    """Bump in one circle coordinate: 1 within ``inner`` of ``center``,
    0 beyond ``outer``.  ``invert`` gives the complementary cutoff."""

    coord: int
    center: float
    inner: float
    outer: float
    invert: bool = False

    def __post_init__(self):
        if not (0.0 <= self.inner < self.outer < 0.5):
            raise ValueError(f"bad plateau widths {self!r}")

    @property
    def coords(self):
        return (self.coord,)

    def evaluate(self, X):
        d = min_image(X[:, self.coord] - self.center)
        s, ds = smoothstep((np.abs(d) - self.inner) / (self.outer - self.inner))
        val = 1.0 - s
        dval = -ds * np.sign(d) / (self.outer - self.inner)
        if self.invert:
            val, dval = s, -dval
        return val, dval[:, None]


@dataclass(frozen=True)
class Sine(Factor):
    """``sin(2 pi (freq * x[coord] + phase))`` with integer ``freq``."""

    coord: int
    freq: int
    phase: float = 0.0

    @property
    def coords(self):
        return (self.coord,)

    def evaluate(self, X):
        arg = 2.0 * np.pi * (self.freq * X[:, self.coord] + self.phase)
        return np.sin(arg), (2.0 * np.pi * self.freq * np.cos(arg))[:, None]


@dataclass(frozen=True)
class PlaneWave(Factor):
    """``sin(2 pi (k . x + phase))`` over several coordinates, integer ``k``."""

    over: tuple[int, ...]
    wavevector: tuple[int, ...]
    phase: float = 0.0

    @property
    def coords(self):
        return tuple(self.over)

    def evaluate(self, X):
        k = np.asarray(self.wavevector, dtype=float)
        arg = 2.0 * np.pi * (X[:, list(self.over)] @ k + self.phase)
        return np.sin(arg), 2.0 * np.pi * np.cos(arg)[:, None] * k[None, :]


@dataclass(frozen=True)
class Offset(Factor):
    """Signed displacement ``x[coord] - center`` (nearest representative).

    Discontinuous at the antipode of ``center``; only use it multiplied by
    a factor supported well inside the half-circle.
    """

    coord: int
    center: float

    @property
    def coords(self):
        return (self.coord,)

    def evaluate(self, X):
        d = min_image(X[:, self.coord] - self.center)
        return d, np.ones((len(d), 1))


def plane_offset(X, plane, center, copies=1):
    """Offset from the nearest of ``copies`` centres spaced ``1/copies`` apart
    along the first plane axis."""
    d = min_image(X[:, list(plane)] - np.asarray(center, dtype=float))
    if copies > 1:
        d[:, 0] = min_image(d[:, 0] * copies) / copies
    return d


@dataclass(frozen=True)
class Radial(Factor):
    """Radial profile of the distance to ``center`` in a coordinate plane.

    With ``copies > 1`` the profile is repeated with period ``1/copies``
    along the first plane axis.  ``invert`` gives ``1 - profile``, which is
    exactly zero on the plateau of a disk profile.
    """

    plane: tuple[int, int]
    center: tuple[float, float]
    profile: RadialProfile
    copies: int = 1
    invert: bool = False

    @property
    def coords(self):
        return tuple(self.plane)

    def evaluate(self, X):
        d = plane_offset(X, self.plane, self.center, self.copies)
        r = np.hypot(d[:, 0], d[:, 1])
        val, dval = self.profile(r)
        safe = np.where(r > 0, r, 1.0)
        grad = np.where((r > 0)[:, None], (dval / safe)[:, None] * d, 0.0)
        if self.invert:
            return 1.0 - val, -grad
        return val, grad


@dataclass(frozen=True)
class Winding(Factor):
    """Degree-``degree`` circle function, affine with ``slope`` near ``center``.

    ``w(t) = degree * t + (slope - degree) * d(t) * beta(d(t))`` where ``d`` is
    the signed offset from ``center`` and ``beta`` is a plateau equal to one
    for ``|d| <= inner``.  As a shear increment it is well defined on the
    torus because ``degree`` is an integer.
    """

    coord: int
    degree: int
    center: float
    slope: float
    inner: float
    outer: float

    def __post_init__(self):
        if not (0.0 <= self.inner < self.outer < 0.5):
            raise ValueError(f"bad winding widths {self!r}")

    @property
    def winding_degree(self) -> int:
        return self.degree

    @property
    def coords(self):
        return (self.coord,)

    def evaluate(self, X):
        t = X[:, self.coord]
        d = min_image(t - self.center)
        s, ds = smoothstep((np.abs(d) - self.inner) / (self.outer - self.inner))
        beta = 1.0 - s
        dbeta = -ds * np.sign(d) / (self.outer - self.inner)
        k, m = self.degree, self.slope - self.degree
        val = k * t + m * d * beta
        dval = k + m * beta + m * d * dbeta
        return val, dval[:, None]


@dataclass(frozen=True)
class Ramp(Factor):
    """Climb by ``degree`` over the arc ``[start, start + length]``.

    The climb is linear except on end zones of relative size ``ease``, where
    it is blended in and out with flat steps.  Zero everywhere else, so as a
    shear increment it is the identity off the arc and wraps ``degree``
    times across it.
    """

    coord: int
    degree: int
    start: float
    length: float
    ease: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.length < 1.0 or not 0.0 < self.ease < 0.5:
            raise ValueError(f"bad ramp {self!r}")

    @property
    def winding_degree(self) -> int:
        return self.degree

    @property
    def coords(self):
        return (self.coord,)

    def evaluate(self, X):
        u = np.mod(X[:, self.coord] - self.start, 1.0)
        on = u < self.length
        t = np.where(on, u / self.length, 0.0)
        # g = s_in * t * (1 - s_out) + s_out, linear on [ease, 1 - ease]
        s_in, ds_in = smoothstep(t / self.ease)
        s_out, ds_out = smoothstep((t - 1.0 + self.ease) / self.ease)
        ds_in, ds_out = ds_in / self.ease, ds_out / self.ease
        g = s_in * t * (1.0 - s_out) + s_out
        dg = (ds_in * t + s_in) * (1.0 - s_out) - s_in * t * ds_out + ds_out
        val = np.where(on, self.degree * g, 0.0)
        dval = np.where(on, self.degree * dg / self.length, 0.0)
        return val, dval[:, None]

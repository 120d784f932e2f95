"""Localised volume-preserving perturbations of ``A x T`` and their integrals.

Coordinates: the base block (where ``A`` acts) and the centre block (where
``T`` acts) are given by index pairs, ``(0, 1)`` and ``(2, 3)`` on T^4.  All
gadgets are compositions of shears and twists, so they are exactly
volume preserving and exactly the identity outside their closed supports.

* ``sw_shear`` couples the two blocks inside the disk of radius ``eps/4``
  about the centre ``c`` of ``[0, eps]^2``: the base is displaced along the
  contracting direction of ``A`` by an amount proportional to the signed
  centre offset, then the centre is twisted about ``c`` by an angle driven by
  a base plane wave.  The net effect contracts centre area on average.
* ``bm_rotation`` rotates the centre about ``c`` with an angle supported on
  a base annulus around the saved fixed point ``p*``, mixing the two centre
  directions.
* ``dw_accessibility_shear`` twists the centre by an angle that varies
  along the unstable direction of ``A``, producing su-holonomy.

Integrals use ``log |det Df|E^c|`` with areas on ``E^c`` measured through
the projection to the centre coordinates.  The integrand is then exactly
zero wherever ``f`` coincides with ``A x T`` to first order, and it
integrates to the sum of the central exponents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anosov_katok import AKMap
from .lyapunov import center_log_jacobian, estimate_center_plane
from .maps import (
    DEFAULT_A,
    Identity,
    Linear,
    MapExpr,
    Product,
    Shear,
    Twist,
    compose,
    eval_and_jacobian,
    hyperbolic_eigen,
    torus_distance,
    wrap,
)
from .profiles import Offset, Plateau, PlaneWave, Radial, RadialProfile


class SupportContractError(ValueError):
    """A gadget support would leave ``M^eps`` or meet the saved fibre ``V``."""


@dataclass(frozen=True)
class SupportRegion:
    """``M^eps``, ``A^eps`` and the saved-fibre neighbourhood ``V``."""

    eps: float = 0.2
    p_star: tuple[float, float] = (0.2, 0.4)
    r_v: float = 0.03
    dim: int = 4
    base: tuple[int, int] = (0, 1)
    center: tuple[int, int] = (2, 3)

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        if not 0.0 < self.r_v < 0.25:
            raise ValueError("r_v must lie in (0, 1/4)")

    @property
    def c(self) -> tuple[float, float]:
        return (self.eps / 2, self.eps / 2)

    @property
    def volume_M(self) -> float:
        return self.eps**2

    @property
    def volume_A(self) -> float:
        return (self.eps / 2) ** 2

    def _box(self, X, lo, hi):
        Y = np.atleast_2d(X)[:, list(self.center)]
        return np.all((Y >= lo) & (Y <= hi), axis=1)

    def in_M(self, X) -> np.ndarray:
        return self._box(X, 0.0, self.eps)

    def in_A(self, X) -> np.ndarray:
        return self._box(X, self.eps / 4, 3 * self.eps / 4)

    def in_V(self, X) -> np.ndarray:
        B = np.atleast_2d(X)[:, list(self.base)]
        return torus_distance(B, np.asarray(self.p_star)) < self.r_v

    def _uniform(self, rng, n):
        return rng.random((n, self.dim))

    def sample(self, rng: np.random.Generator, n: int, where: str) -> np.ndarray:
        """Uniform samples of ``'torus'``, ``'M'``, ``'A'``, ``'M-A'``
        (``M^eps`` minus ``A^eps``), ``'out-M'``, ``'torus-A'`` or ``'V'``."""
        X = self._uniform(rng, n)
        c = list(self.center)
        if where == "torus":
            return X
        if where == "M":
            X[:, c] *= self.eps
            return X
        if where == "A":
            X[:, c] = self.eps / 4 + X[:, c] * self.eps / 2
            return X
        if where == "V":
            r = self.r_v * np.sqrt(rng.random(n)) * (1 - 1e-12)
            a = 2 * np.pi * rng.random(n)
            X[:, list(self.base)] = wrap(
                np.asarray(self.p_star) + np.stack([r * np.cos(a), r * np.sin(a)], 1)
            )
            return X
        keep = {"M-A": lambda Y: self.in_M(Y) & ~self.in_A(Y),
                "out-M": lambda Y: ~self.in_M(Y),
                "torus-A": lambda Y: ~self.in_A(Y)}[where]
        out = []
        got = 0
        while got < n:
            Y = self._uniform(rng, 2 * n)
            if where == "M-A":
                Y[:, c] *= self.eps
            Y = Y[keep(Y)]
            out.append(Y)
            got += len(Y)
        return np.concatenate(out)[:n]

    def region_volume(self, where: str) -> float:
        return {
            "torus": 1.0,
            "M": self.volume_M,
            "A": self.volume_A,
            "M-A": self.volume_M - self.volume_A,
            "out-M": 1.0 - self.volume_M,
            "torus-A": 1.0 - self.volume_A,
        }[where]

    def saved_fibre_cutoff(self, inner: float, outer: float, other: int) -> Plateau:
        """Cutoff in base coordinate ``base[other]`` vanishing on the strip
        ``|x - p*| <= inner`` (which contains ``V``)."""
        if inner < self.r_v:
            raise SupportContractError("support contract violated: cutoff meets V")
        return Plateau(self.base[other], self.p_star[other], inner, outer, invert=True)

    def saved_fibre_hole(self, inner: float, outer: float) -> Radial:
        """Base factor vanishing on the disk of radius ``inner`` about ``p*``."""
        if inner < self.r_v:
            raise SupportContractError("support contract violated: cutoff meets V")
        return Radial(self.base, self.p_star, RadialProfile(0.0, 0.0, inner, outer), invert=True)

    def check_center_disk(self, radius: float):
        """A centre disk about ``c`` must lie in the open square."""
        if not 0.0 < radius < self.eps / 2:
            raise SupportContractError(
                f"support contract violated: centre radius {radius} leaves M^eps"
            )


@dataclass(frozen=True)
class ShearParams:
    """Parameters of ``sw_shear``.

    ``amplitude``: base displacement (along the contracting direction of
    ``A``) at the edge of the plateau; ``twist``: peak centre twist angle;
    ``radius``: support radius as a fraction of ``eps/4``; ``plateau``:
    plateau radius as a fraction of the support radius.
    """

    amplitude: float = 0.4
    twist: float = 1.0
    radius: float = 1.0
    plateau: float = 0.6
    wavevector: tuple[int, int] = (1, 0)
    v_inner: float = 0.04
    v_outer: float = 0.08
    c1_budget: float = 25.0


@dataclass(frozen=True)
class RotationParams:
    """Parameters of ``bm_rotation``: angle, base annulus radii around
    ``p*`` and centre disk (plateau, support) as fractions of ``eps/2``."""

    angle: float = np.pi / 2
    annulus: tuple[float, float, float, float] = (0.04, 0.07, 0.12, 0.16)
    center_plateau: float = 0.3
    center_support: float = 0.5


@dataclass(frozen=True)
class AccessParams:
    """Parameters of ``dw_accessibility_shear``: peak twist angle, support
    radius (fraction of ``eps/4``), plateau fraction, base wavevector."""

    amplitude: float = 0.3
    radius: float = 1.0
    plateau: float = 0.6
    wavevector: tuple[int, int] = (0, 1)
    v_inner: float = 0.04
    v_outer: float = 0.08


def sw_shear(region: SupportRegion, params: ShearParams = ShearParams(), A=DEFAULT_A) -> MapExpr:
    """Shub-Wilkinson style coupling of base and centre inside ``A^eps``."""
    if params.amplitude == 0.0 and params.twist == 0.0:
        return Identity(region.dim)
    R = params.radius * region.eps / 4
    region.check_center_disk(R)
    if R > region.eps / 4 + 1e-15:
        raise SupportContractError("support contract violated: sw support leaves A^eps")
    _, _, es = hyperbolic_eigen(A)
    prof = RadialProfile(0.0, 0.0, params.plateau * R, R)
    rad = Radial(region.center, region.c, prof)
    drive = Offset(region.center[1], region.c[1])
    parts = []
    for k, t in enumerate(region.base):
        amp = params.amplitude * es[k] / R
        if amp == 0.0:
            continue
        cut = region.saved_fibre_cutoff(params.v_inner, params.v_outer, 1 - k)
        parts.append(Shear(region.dim, t, (rad, drive, cut), amp))
    tw = []
    if params.twist:
        mod = (PlaneWave(region.base, params.wavevector), region.saved_fibre_hole(params.v_inner, params.v_outer))
        tw.append(Twist(region.dim, region.center, region.c, prof, params.twist, mod))
    return compose(*tw, *parts)


def bm_rotation(region: SupportRegion, params: RotationParams = RotationParams()) -> MapExpr:
    """Centre rotation about ``c`` driven by a base annulus around ``p*``."""
    if params.angle == 0.0:
        return Identity(region.dim)
    r0, r1, r2, r3 = params.annulus
    if r0 < region.r_v:
        raise SupportContractError("support contract violated: rotation annulus meets V")
    half = region.eps / 2
    region.check_center_disk(params.center_support * half)
    cprof = RadialProfile(0.0, 0.0, params.center_plateau * half, params.center_support * half)
    annulus = Radial(region.base, region.p_star, RadialProfile(r0, r1, r2, r3))
    return Twist(region.dim, region.center, region.c, cprof, params.angle, (annulus,))


def dw_accessibility_shear(region: SupportRegion, params: AccessParams = AccessParams()) -> MapExpr:
    """Centre twist whose angle varies along the unstable direction of ``A``."""
    if params.amplitude == 0.0:
        return Identity(region.dim)
    R = params.radius * region.eps / 4
    region.check_center_disk(R)
    prof = RadialProfile(0.0, 0.0, params.plateau * R, R)
    mod = (PlaneWave(region.base, params.wavevector), region.saved_fibre_hole(params.v_inner, params.v_outer))
    return Twist(region.dim, region.center, region.c, prof, params.amplitude, mod)


def product_map(A, T: MapExpr, variant: str = "t4") -> MapExpr:
    """``A x T`` on T^4, or ``A x A x T`` on T^6 for ``variant='t6'``."""
    base = Linear(np.asarray(A))
    if variant == "t4":
        return Product(base, T)
    if variant == "t6":
        return Product(Product(base, Linear(np.asarray(A))), T)
    raise ValueError(f"unknown variant {variant!r}")


def assemble_f(A, T: MapExpr, h: MapExpr, h_tilde: MapExpr, variant: str = "t4") -> MapExpr:
    """``f = h_tilde o (A x T) o h``."""
    F = product_map(A, T, variant)
    if h.dim != F.dim or h_tilde.dim != F.dim:
        raise ValueError("mismatched regions: gadget and product dimensions differ")
    return compose(h_tilde, F, h)


def region_for_variant(eps: float, variant: str = "t4", **kw) -> SupportRegion:
    if variant == "t4":
        return SupportRegion(eps, dim=4, base=(0, 1), center=(2, 3), **kw)
    if variant == "t6":
        return SupportRegion(eps, dim=6, base=(0, 1), center=(4, 5), **kw)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class PipelineSpec:
    """All pieces of the assembled map."""

    region: SupportRegion
    A: np.ndarray
    ak: AKMap
    sw: MapExpr
    bm: MapExpr
    dw: MapExpr
    variant: str = "t4"
    h: MapExpr = field(init=False)
    h_tilde: MapExpr = field(init=False)
    F: MapExpr = field(init=False)
    f: MapExpr = field(init=False)
    f_local: MapExpr = field(init=False)

    def __post_init__(self):
        self.h = compose(self.bm, self.sw)
        self.h_tilde = self.dw
        self.F = product_map(self.A, self.ak.T, self.variant)
        self.f = assemble_f(self.A, self.ak.T, self.h, self.h_tilde, self.variant)
        # conjugate of f by h_tilde: same exponents, all perturbations act
        # before F, so the centre integrand is supported in M^eps
        self.f_local = compose(self.F, self.h, self.h_tilde)

    @property
    def hyperbolic_guesses(self):
        """Unperturbed unstable and stable directions, as (d, k) arrays."""
        _, eu, es = hyperbolic_eigen(self.A)
        d = self.region.dim
        nblocks = 1 if self.variant == "t4" else 2
        U = np.zeros((d, nblocks))
        S = np.zeros((d, nblocks))
        for b in range(nblocks):
            U[2 * b : 2 * b + 2, b] = eu
            S[2 * b : 2 * b + 2, b] = es
        return U, S

    def with_gadgets(self, sw=None, bm=None, dw=None) -> "PipelineSpec":
        return PipelineSpec(
            self.region,
            self.A,
            self.ak,
            self.sw if sw is None else sw,
            self.bm if bm is None else bm,
            self.dw if dw is None else dw,
            self.variant,
        )

    def c1_distance(self, rng: np.random.Generator, n: int = 4096) -> float:
        """Sup over samples in ``M^eps`` of ``|D(h_tilde) D F D(h) - D F|`` (C^1 proxy)."""
        X = self.region.sample(rng, n, "M")
        _, J = eval_and_jacobian(self.f, X)
        _, J0 = eval_and_jacobian(self.F, X)
        return float(np.abs(J - J0).max())


@dataclass
class IntegralEstimate:
    """Monte Carlo estimate of ``int_region log |det Df|E^c| dw``."""

    region: str
    integral: float
    stderr: float
    mean: float
    n: int
    excluded: int
    volume: float
    flagged: bool

    def interval(self, z: float = 2.5758293035489004) -> tuple[float, float]:
        return self.integral - z * self.stderr, self.integral + z * self.stderr


def center_integrand(pipe: PipelineSpec, f: MapExpr, X, n_time: int = 1, n_plane: int = 30):
    """``(1/n_time) log |det Df^n|E^c|`` (centre-projected areas) and the
    resolved mask.  The plane is re-estimated at every step so that round-off
    never drifts it towards the unstable bundle."""
    U, S = pipe.hyperbolic_guesses
    center = pipe.region.center
    total = np.zeros(len(X))
    ok = np.ones(len(X), dtype=bool)
    Y = X
    for _ in range(n_time):
        est = estimate_center_plane(f, Y, n_plane, n_plane, center, U, S)
        total += center_log_jacobian(f, Y, est.frame, center)
        ok &= est.resolved
        Y = f._apply(Y)
    return total / n_time, ok


def integrated_central_exponent(
    pipe: PipelineSpec,
    f: MapExpr,
    rng: np.random.Generator,
    where: str = "M",
    n_samples: int = 4000,
    n_time: int = 1,
    n_plane: int = 30,
    chunk: int = 2000,
) -> IntegralEstimate:
    """Monte Carlo integral of the centre log-Jacobian over a region."""
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    vals = []
    oks = []
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        X = pipe.region.sample(rng, m, where)
        v, ok = center_integrand(pipe, f, X, n_time, n_plane)
        vals.append(v)
        oks.append(ok)
        left -= m
    v = np.concatenate(vals)
    ok = np.concatenate(oks)
    excluded = int((~ok).sum())
    v = v[ok]
    vol = pipe.region.region_volume(where)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(len(v)))
    return IntegralEstimate(
        where, vol * mean, vol * se, mean, len(v), excluded, vol, excluded > 0.01 * n_samples
    )


@dataclass
class RatioEstimate:
    ratio: float
    stderr: float
    numerator: IntegralEstimate
    denominator: IntegralEstimate

    def passes(self, factor: float) -> bool:
        return self.ratio + self.stderr < factor


class UnresolvedContribution(RuntimeError):
    pass


def localization_ratio(
    pipe: PipelineSpec,
    f: MapExpr,
    rng: np.random.Generator,
    n_samples: int = 4000,
    n_outside: int = 20000,
    n_plane: int = 30,
) -> RatioEstimate:
    """``int_{M \\ A^eps} |g| / |int_{A^eps} g|`` with ``g`` the centre log-Jacobian."""
    den = integrated_central_exponent(pipe, f, rng, "A", n_samples, 1, n_plane)
    lo, hi = den.interval(1.959963984540054)
    if lo <= 0.0 <= hi:
        raise UnresolvedContribution("central contribution not resolved")
    X = pipe.region.sample(rng, n_outside, "torus-A")
    parts = []
    oks = []
    for k in range(0, n_outside, 2000):
        v, ok = center_integrand(pipe, f, X[k : k + 2000], 1, n_plane)
        parts.append(np.abs(v))
        oks.append(ok)
    a = np.concatenate(parts)
    ok = np.concatenate(oks)
    a = a[ok]
    vol = pipe.region.region_volume("torus-A")
    num = IntegralEstimate(
        "torus-A", vol * a.mean(), vol * a.std(ddof=1) / np.sqrt(len(a)), a.mean(), len(a),
        int((~ok).sum()), vol, (~ok).sum() > 0.01 * n_outside,
    )
    D = abs(den.integral)
    r = num.integral / D
    se = r * np.hypot(num.stderr / max(num.integral, 1e-300), den.stderr / D)
    return RatioEstimate(float(r), float(se), num, den)


def build_pipeline(
    eps: float = 0.2,
    variant: str = "t4",
    A=DEFAULT_A,
    sw: ShearParams = ShearParams(),
    bm: RotationParams = RotationParams(),
    dw: AccessParams = AccessParams(),
    ak: AKMap | None = None,
) -> PipelineSpec:
    """Assemble the default pipeline (``ak`` defaults to the 3-stage map)."""
    from .anosov_katok import default_ak_map

    region = region_for_variant(eps, variant)
    if ak is None:
        ak = default_ak_map(eps)
    return PipelineSpec(
        region,
        np.asarray(A),
        ak,
        sw_shear(region, sw, A),
        bm_rotation(region, bm),
        dw_accessibility_shear(region, dw),
        variant,
    )

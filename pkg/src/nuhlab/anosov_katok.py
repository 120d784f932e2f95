"""Successive-conjugation construction of the elliptic factor ``T`` on T^2.

Everything happens in rearranged coordinates ``z = Phi(y)``.  ``Phi`` is a
volume-preserving change of coordinates that is the identity on the square
``[0, eps]^2`` and pulls the horizontal band ``T^1 x (0, eps)`` back to a
ribbon winding densely around the torus.  The invariant set is the
complementary tube ``K = Phi^{-1}(T^1 x [eps, 1])`` (plus its boundary
circle at height 0), which has measure exactly ``1 - eps``.

Stage ``n`` carries a rotation number ``alpha_n = p_n / q_n`` and a gadget
``h_n``: a row of twist disks of period ``1/q_n`` centred in the band.
With ``H_n = h_1 o ... o h_n`` the realised maps are

    T_n = Phi^{-1} o H_{n-1} o R_{alpha_n} o H_{n-1}^{-1} o Phi,

so ``T_n^{q_n} = Id`` and ``T_n`` is a rigid rotation on K in the
rearranged coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .maps import (
    Identity,
    MapExpr,
    Shear,
    Translation,
    Twist,
    compose,
    eval_and_jacobian,
    eval_map,
    power,
    torus_distance,
    wrap,
)
from .profiles import Ramp, RadialProfile


@dataclass(frozen=True)
class Rearrangement:
    """``Phi^{-1} = P2 o P1`` with ``P1: y2 += ramp(y1)`` winding
    ``vertical_degree`` times and ``P2: y1 += ramp(y2)`` winding
    ``horizontal_degree`` times.  Both ramps vanish on
    ``[-margin, eps + margin]``, so ``Phi`` is the identity on a
    neighbourhood of the square."""

    eps: float
    vertical_degree: int = 8
    horizontal_degree: int = 3
    margin: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        if self.eps + 2 * self.margin >= 1.0:
            raise ValueError("margin too large for eps")

    def _ramp(self, coord, degree):
        start = self.eps + self.margin
        return Ramp(coord, degree, start, 1.0 - start - self.margin)

    def inverse_map(self) -> MapExpr:
        """``Phi^{-1}``: rearranged coordinates to torus coordinates."""
        parts = []
        if self.horizontal_degree:
            parts.append(Shear(2, 0, (self._ramp(1, self.horizontal_degree),)))
        if self.vertical_degree:
            parts.append(Shear(2, 1, (self._ramp(0, self.vertical_degree),)))
        return compose(*parts) if parts else Identity(2)

    def forward_map(self) -> MapExpr:
        """``Phi``: torus coordinates to rearranged coordinates."""
        return self.inverse_map().inverse()


@dataclass(frozen=True)
class StageParams:
    """Parameters of one stage.

    ``subdivision`` disks per period ``1/q`` (0 means no gadget) centred at
    rearranged height ``height * eps``, each of radius
    ``0.9 * min(height * eps, (1 - height) * eps, 0.5 / (q * subdivision))``
    with an outer smoothing annulus of ``width``.  The first disk centre
    sits at ``phase + 0.5 / (q * subdivision)``.  ``c0_budget`` is the
    declared bound on the sup-distance between consecutive realised maps.
    """

    q: int
    subdivision: int = 1
    width: float = 0.02
    angle: float = 0.8
    phase: float = 0.0
    height: float = 0.5
    c0_budget: float = 0.75

    def __post_init__(self):
        if self.q < 1 or self.subdivision < 0:
            raise ValueError("bad stage denominator or subdivision")
        if self.subdivision and not self.width > 0.0:
            raise ValueError("smoothing width must be positive")
        if not 0.0 < self.height < 1.0:
            raise ValueError("gadget height must lie strictly inside the band")


@dataclass
class AKStage:
    """One stage: rotation ``p/q``, gadget, accumulated conjugacy, measured closeness."""

    index: int
    p: int
    q: int
    params: StageParams
    gadget: MapExpr
    conjugacy: MapExpr
    c0_closeness: float = float("nan")
    c1_closeness: float = float("nan")

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.p, self.q)


def _gadget(params: StageParams, eps: float) -> MapExpr:
    if params.subdivision == 0 or params.angle == 0.0:
        return Identity(2)
    copies = params.q * params.subdivision
    radius = 0.9 * min(params.height * eps, (1.0 - params.height) * eps, 0.5 / copies)
    if params.width >= radius:
        raise ValueError(
            f"smoothing width {params.width} too large for subdivision "
            f"{params.subdivision} at q={params.q} (disk radius {radius:.4g})"
        )
    profile = RadialProfile(0.0, 0.0, radius - params.width, radius)
    center = (params.phase + 0.5 / copies, params.height * eps)
    return Twist(2, (0, 1), center, profile, params.angle, (), copies)


def build_stage(prev: AKStage | None, params: StageParams, eps: float) -> AKStage:
    """Append a stage; ``alpha_n = alpha_{n-1} + 1/q_n`` with ``alpha_0 = 0``."""
    if prev is None:
        index, alpha, H = 1, Fraction(1, params.q), Identity(2)
    else:
        if params.q % prev.q:
            raise ValueError(f"q={params.q} is not a multiple of q={prev.q}")
        index = prev.index + 1
        alpha = prev.alpha + Fraction(1, params.q)
        H = prev.conjugacy
    gadget = _gadget(params, eps)
    p = (alpha % 1) * params.q
    return AKStage(index, int(p), params.q, params, gadget, compose(H, gadget))


def stage_maps(stages: Sequence[AKStage], rearrangement: Rearrangement, detune: float = 0.0):
    """Realised ``T_n`` for every stage (``detune`` is added to the last rotation)."""
    phi = rearrangement.forward_map()
    phi_inv = rearrangement.inverse_map()
    out = []
    H = Identity(2)
    for k, st in enumerate(stages):
        a = float(st.alpha) + (detune if k == len(stages) - 1 else 0.0)
        out.append(compose(phi_inv, H, Translation((a, 0.0)), H.inverse(), phi))
        H = st.conjugacy
    return out


def validation_grid(n: int = 128) -> np.ndarray:
    g = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)


@dataclass
class AKMap:
    """Realised elliptic factor with its stage chain and measured diagnostics."""

    stages: list[AKStage]
    rearrangement: Rearrangement
    T: MapExpr
    period: int
    detune: float = 0.0
    period_defect: float = float("nan")
    derivative_bound: float = float("nan")
    k_conjugacy_bound: float = float("nan")
    closeness: list[dict] = field(default_factory=list)

    @property
    def eps(self) -> float:
        return self.rearrangement.eps


def ak_map(
    stages: Sequence[AKStage],
    rearrangement: Rearrangement,
    detune: float = 0.0,
    grid: int = 128,
) -> AKMap:
    """Realise the last stage and measure C^0/C^1 closeness on a ``grid``^2 grid."""
    stages = list(stages)
    if not stages:
        raise ValueError("need at least one stage")
    for a, b in zip(stages, stages[1:]):
        if b.q % a.q or b.index != a.index + 1:
            raise ValueError("inconsistent stage chain")
    Ts = stage_maps(stages, rearrangement, detune)
    X = validation_grid(grid)
    prev_Y, prev_J = X, np.broadcast_to(np.eye(2), (len(X), 2, 2))
    rows = []
    for st, Tn in zip(stages, Ts):
        Y, J = eval_and_jacobian(Tn, X)
        st.c0_closeness = float(torus_distance(Y, prev_Y).max())
        st.c1_closeness = float(np.abs(J - prev_J).max())
        rows.append(
            dict(
                stage=st.index,
                p=st.p,
                q=st.q,
                c0=st.c0_closeness,
                c1=st.c1_closeness,
                c0_budget=st.params.c0_budget,
                within_budget=st.c0_closeness <= st.params.c0_budget,
            )
        )
        prev_Y, prev_J = Y, J
    T = Ts[-1]
    period = stages[-1].q
    back = power(T, X, period)
    _, J = eval_and_jacobian(T, X)
    phi = rearrangement.forward_map()
    _, Jp = eval_and_jacobian(phi, X)
    _, Jq = eval_and_jacobian(rearrangement.inverse_map(), X)
    return AKMap(
        stages=stages,
        rearrangement=rearrangement,
        T=T,
        period=period,
        detune=detune,
        period_defect=float(torus_distance(back, X).max()),
        derivative_bound=float(np.linalg.norm(J, 2, axis=(1, 2)).max()),
        k_conjugacy_bound=float(
            np.linalg.norm(Jp, 2, axis=(1, 2)).max() * np.linalg.norm(Jq, 2, axis=(1, 2)).max()
        ),
        closeness=rows,
    )


# Gadgets keep clear of the disk of radius eps/4 about (eps/2, eps/2), where
# the perturbations live, so the conjugacy is the identity there.
DEFAULT_STAGES = (
    StageParams(q=2, subdivision=1, width=0.04, angle=0.8, phase=0.1),
    StageParams(q=12, subdivision=1, width=0.01, angle=0.8, height=0.88),
    StageParams(q=120, subdivision=0),
)


def default_ak_map(
    eps: float,
    stage_params: Sequence[StageParams] = DEFAULT_STAGES,
    vertical_degree: int = 8,
    horizontal_degree: int = 3,
    detune: float = 0.0,
    grid: int = 128,
) -> AKMap:
    prev = None
    stages = []
    for sp in stage_params:
        prev = build_stage(prev, sp, eps)
        stages.append(prev)
    rear = Rearrangement(eps, vertical_degree, horizontal_degree)
    return ak_map(stages, rear, detune, grid)


@dataclass(frozen=True)
class InvariantSetSpec:
    """``K`` = points whose rearranged height lies in one of the closed
    ``tubes`` (intervals of the second rearranged coordinate)."""

    stage: int
    eps: float
    tubes: tuple[tuple[float, float], ...]
    rearrangement: Rearrangement | None
    shift: tuple[float, float] = (0.0, 0.0)

    @property
    def measure(self) -> float:
        """Closed-form measure; the rearrangement preserves area."""
        return float(sum(hi - lo for lo, hi in self.tubes))

    def heights(self, X) -> np.ndarray:
        X = wrap(np.atleast_2d(np.asarray(X, dtype=float)) - np.asarray(self.shift))
        if self.rearrangement is not None:
            X = eval_map(self.rearrangement.forward_map(), X)
        return X[:, 1]

    def membership(self, X, tol: float = 0.0) -> np.ndarray:
        h = self.heights(X)
        inside = np.zeros(len(h), dtype=bool)
        for lo, hi in self.tubes:
            d = np.maximum(lo - h, h - hi)
            # heights are circular: also test the wrapped representative
            d = np.minimum(d, np.maximum(lo - (h - 1.0), (h - 1.0) - hi))
            d = np.minimum(d, np.maximum(lo - (h + 1.0), (h + 1.0) - hi))
            inside |= d <= tol
        return inside

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform samples of K (rejection from the uniform measure)."""
        out = []
        while sum(len(o) for o in out) < n:
            X = rng.random((2 * n, 2))
            out.append(X[self.membership(X)])
        return np.concatenate(out)[:n]

    def corrupted(self, offset: float) -> "InvariantSetSpec":
        """The same set translated by ``offset`` in both coordinates (negative control)."""
        return InvariantSetSpec(self.stage, self.eps, self.tubes, self.rearrangement, (offset, offset))


def invariant_set(akmap: AKMap) -> InvariantSetSpec:
    eps = akmap.eps
    return InvariantSetSpec(akmap.stages[-1].index, eps, ((eps, 1.0),), akmap.rearrangement)


def rotation_tube_set(eps: float) -> InvariantSetSpec:
    """Horizontal tube ``T^1 x [eps, 1]`` (invariant under any horizontal rotation)."""
    return InvariantSetSpec(0, eps, ((eps, 1.0),), None)


def transitivity_probe(T: MapExpr, seed, N: int, delta: float, chunk: int = 4096) -> float:
    """Fraction of cells of the ``delta``-grid on T^2 visited by the orbit of ``seed``."""
    if delta <= 0 or N < 1:
        raise ValueError("need delta > 0 and N >= 1")
    m = int(np.ceil(1.0 / delta - 1e-12))
    seen = np.zeros((m, m), dtype=bool)
    x = np.atleast_2d(np.asarray(seed, dtype=float)).copy()
    for k in range(N):
        idx = np.minimum((x[0] * m).astype(int), m - 1)
        seen[idx[0], idx[1]] = True
        if k + 1 < N:
            x = eval_map(T, x)
    return float(seen.mean())

"""Cone fields, a bunching proxy, approximate stable/unstable leaves and
su-quadrilateral holonomy.

Leaves are polylines in the lifted torus (consecutive vertices are joined
by their shortest displacement).  An unstable leaf through ``x`` is grown by
pulling ``x`` back ``n_iter`` steps, laying a short segment along the
unperturbed unstable direction there and pushing it forward with uniform
arc-length resampling after every step; stable leaves use the inverse map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lyapunov import estimate_center_plane
from .maps import MapExpr, _as_batch, eval_map, torus_displacement, wrap


@dataclass(frozen=True)
class ConeField:
    """Cones of half-angle ``aperture`` about reference subspaces (columns of
    ``(d, k)`` arrays).

    With ``adapt > 0`` the reference at ``x`` is the constant reference
    transported ``adapt`` steps along the orbit (pushed forward from
    ``f^{-adapt}(x)`` for the unstable cone, pulled back from ``f^{adapt}(x)``
    for the stable one), i.e. cones about the approximate invariant bundles.
    """

    unstable: np.ndarray
    stable: np.ndarray
    aperture: float = 0.3
    adapt: int = 0

    def __post_init__(self):
        if not 0.0 < self.aperture < np.pi / 4:
            raise ValueError("aperture must lie in (0, pi/4)")
        U = np.linalg.qr(np.asarray(self.unstable, float))[0]
        S = np.linalg.qr(np.asarray(self.stable, float))[0]
        object.__setattr__(self, "unstable", U)
        object.__setattr__(self, "stable", S)
        if _tan_angle(U[:, :1].T, S)[0] <= np.tan(self.aperture) * 2:
            raise ValueError("unstable and stable cones intersect")

    def reference(self, f: MapExpr, X, which: str, finv: MapExpr | None = None) -> np.ndarray:
        """Orthonormal reference frames at the points ``X``, shape ``(N, d, k)``."""
        R0 = self.unstable if which == "unstable" else self.stable
        R = np.broadcast_to(R0, (len(X),) + R0.shape).copy()
        if self.adapt == 0:
            return R
        finv = f.inverse() if finv is None else finv
        fwd, back = (f, finv) if which == "unstable" else (finv, f)
        orbit = [X]
        for _ in range(self.adapt):
            orbit.append(back._apply(orbit[-1]))
        for Y in orbit[:0:-1]:
            _, R = fwd._push(Y, R)
            R = np.linalg.qr(R)[0]
        return R


def _boundary_vectors(R, aperture, count=8):
    """Unit vectors on the cone boundary about the first column of each frame
    in ``R`` (batched), plus the axis itself: shape ``(N, d, count + 1)``."""
    N, d, k = R.shape
    axis = R[:, :, 0]
    full = np.linalg.qr(np.concatenate([R, np.broadcast_to(np.eye(d), (N, d, d))], axis=2))[0]
    comp = np.concatenate([full[:, :, k:d], R[:, :, 1:]], axis=2)
    rng = np.random.default_rng(0)
    C = rng.standard_normal((comp.shape[2], count))
    W = comp @ C
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    V = axis[:, :, None] + np.tan(aperture) * W
    V = np.concatenate([axis[:, :, None], V], axis=2)
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def _tan_angle(V, R):
    """Tangent of the angle between vectors (rows of ``V``) and span of ``R``;
    ``V`` is ``(..., m, d)`` and ``R`` is ``(d, k)`` or ``(..., d, k)``."""
    P = R @ np.swapaxes(R, -1, -2)
    par = V @ P
    perp = V - par
    return np.linalg.norm(perp, axis=-1) / np.maximum(np.linalg.norm(par, axis=-1), 1e-300)


@dataclass
class ConeReport:
    angle_ratio: float          # worst tan(image angle) / tan(aperture), < 1 is strict invariance
    axis_expansion: float       # worst per-step growth of the cone axis
    worst_expansion: float      # worst per-step growth over boundary vectors
    n_samples: int
    n_steps: int

    @property
    def margins(self) -> tuple[float, float]:
        return 1.0 - self.angle_ratio, self.worst_expansion - 1.0

    @property
    def passed(self) -> bool:
        a, e = self.margins
        return a > 0.0 and e > 0.0


def _push_n(f: MapExpr, X, V, n):
    for _ in range(n):
        X, V = f._push(X, V)
    return X, V


def verify_cone_invariance(f: MapExpr, cones: ConeField, X, n_steps: int = 1) -> dict:
    """Check ``Df^n`` maps the unstable cone at ``x`` into the unstable cone at
    ``f^n(x)`` with expansion, and ``Df^{-n}`` likewise for stable cones.

    Returns a :class:`ConeReport` per cone; failures show up as non-positive
    margins, never as exceptions.
    """
    X, _ = _as_batch(X, f.dim)
    X = wrap(X)
    finv = f.inverse()
    out = {}
    for which, g in (("unstable", f), ("stable", finv)):
        R = cones.reference(f, X, which, finv)
        V = _boundary_vectors(R, cones.aperture)
        Y, W = _push_n(g, X, V, n_steps)
        R1 = cones.reference(f, Y, which, finv)
        ratio = _tan_angle(np.swapaxes(W, 1, 2), R1) / np.tan(cones.aperture)
        growth = np.linalg.norm(W, axis=1) ** (1.0 / n_steps)
        out[which] = ConeReport(
            float(ratio.max()), float(growth[:, 0].min()), float(growth.min()), len(X), n_steps
        )
    return out


@dataclass
class BunchingReport:
    margin: float
    worst_center_spread: float
    min_unstable_rate: float
    excluded: int
    n_steps: int


def bunching_check(f: MapExpr, X, unstable_guess, stable_guess, center=(2, 3), n_steps: int = 1, n_plane: int = 30):
    """Proxy for centre bunching: ``log(|Df^n|E^c| |(Df^n|E^c)^{-1}|) / n``
    must stay below the unstable rate ``log |Df^n e_u| / n``.  Returns the
    worst margin over resolved samples."""
    X, _ = _as_batch(X, f.dim)
    est = estimate_center_plane(f, X, n_plane, n_plane, center, unstable_guess, stable_guess)
    E = est.frame
    _, W = _push_n(f, X, E.copy(), n_steps)
    # W = Df^n E; singular values of the 2x2 map E -> span(W)
    s = np.linalg.svd(W, compute_uv=False)
    spread = np.log(s[:, 0] / s[:, -1]) / n_steps
    u = np.broadcast_to(np.asarray(unstable_guess, float).reshape(f.dim, -1), (len(X), f.dim, 1)).copy()
    _, U = _push_n(f, X, u, n_steps)
    rate = np.log(np.linalg.norm(U[:, :, 0], axis=1)) / n_steps
    ok = est.resolved
    margin = rate[ok] - spread[ok]
    return BunchingReport(
        float(margin.min()), float(spread[ok].max()), float(rate[ok].min()), int((~ok).sum()), n_steps
    )


@dataclass
class LeafPolyline:
    """Lifted polyline; ``points[index]`` is the base point.

    ``coordinate`` is the signed displacement of each vertex from the base
    point projected on the seed (hyperbolic) direction; a leaf inside its
    cone is a graph over it.
    """

    base: np.ndarray
    kind: str
    points: np.ndarray
    index: int
    arclength: np.ndarray
    coordinate: np.ndarray
    refinement: int
    truncated: bool = False

    @property
    def is_graph(self) -> bool:
        return bool(np.all(np.diff(self.coordinate) > 0))

    def _interp(self, t, grid):
        P = np.stack([np.interp(t, grid, self.points[:, k]) for k in range(self.points.shape[1])])
        return wrap(P)

    def at_coordinate(self, s: float) -> np.ndarray:
        """Point whose hyperbolic coordinate is ``s`` (wrapped)."""
        if not self.is_graph:
            raise ValueError("leaf is not a graph over its hyperbolic direction")
        if s < self.coordinate[0] - 1e-15 or s > self.coordinate[-1] + 1e-15:
            raise ValueError("requested coordinate beyond the leaf")
        return self._interp(s, self.coordinate)

    def at(self, s: float) -> np.ndarray:
        """Point at signed arc length ``s`` from the base point (wrapped)."""
        t = self.arclength[self.index] + s
        if t < self.arclength[0] - 1e-15 or t > self.arclength[-1] + 1e-15:
            raise ValueError("requested arc length beyond the leaf")
        return self._interp(t, self.arclength)


def _unwrap(P):
    steps = torus_displacement(P[:-1], P[1:])
    return np.concatenate([P[:1], P[:1] + np.cumsum(steps, axis=0)])


def _resample(P, idx, half, n_side):
    """Uniform arc-length resampling of a lifted polyline on ``[-half, half]``
    around vertex ``idx``; returns new points, new index and whether the
    polyline was shorter than requested."""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)]) - np.concatenate([[0.0], np.cumsum(seg)])[idx]
    lo, hi = max(-half, s[0]), min(half, s[-1])
    truncated = lo > -half + 1e-15 or hi < half - 1e-15
    t = np.concatenate([np.linspace(lo, 0.0, n_side + 1)[:-1], np.linspace(0.0, hi, n_side + 1)])
    Q = np.stack([np.interp(t, s, P[:, k]) for k in range(P.shape[1])], axis=1)
    return Q, n_side, truncated


def approximate_leaf(
    f: MapExpr,
    x,
    kind: str,
    length: float,
    direction,
    refinement: int = 0,
    n_iter: int = 10,
    n_side: int = 48,
    finv: MapExpr | None = None,
) -> LeafPolyline:
    """Local ``kind`` ('unstable' or 'stable') leaf through ``x`` of total arc
    length ``length``; ``direction`` seeds the initial segment."""
    if kind not in ("unstable", "stable"):
        raise ValueError("kind must be 'unstable' or 'stable'")
    finv = f.inverse() if finv is None else finv
    fwd, back = (f, finv) if kind == "unstable" else (finv, f)
    x = wrap(np.asarray(x, dtype=float).reshape(1, -1))
    n = n_side * (2**refinement)
    y = x
    for _ in range(n_iter):
        y = back._apply(y)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    half = 0.5 * length
    # growth per step of the seed direction at the pulled-back point
    h0 = half * 1e-3
    t = np.linspace(-h0, h0, 2 * n + 1)
    P = y + t[:, None] * d[None, :]
    idx = n
    truncated = False
    for k in range(n_iter):
        P = _unwrap(fwd._apply(wrap(P)))
        P, idx, truncated = _resample(P, idx, half, n)
    # the pushed base point equals x up to round-off; pin it exactly
    shift = torus_displacement(P[idx], x[0])
    P = P + shift
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    coord = (P - P[idx]) @ d
    return LeafPolyline(x[0], kind, P, idx, s, coord, refinement, truncated)


class LoopNotClosed(RuntimeError):
    pass


@dataclass
class HolonomyResult:
    base: np.ndarray
    legs: tuple[float, float, float, float]
    endpoint: np.ndarray
    displacement: np.ndarray
    error: float
    residual: float
    refinements: tuple[int, int] = (0, 1)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.displacement))

    @property
    def significant(self) -> bool:
        return self.magnitude > 3.0 * self.error


@dataclass
class _LoopContext:
    f: MapExpr
    finv: MapExpr
    eu: np.ndarray
    es: np.ndarray
    base: tuple[int, ...]
    center: tuple[int, ...]
    n_iter: int
    n_side: int


def _leaf(ctx: _LoopContext, x, kind, refinement, length) -> LeafPolyline:
    return approximate_leaf(
        ctx.f, x, kind, length, ctx.eu if kind == "unstable" else ctx.es,
        refinement, ctx.n_iter, ctx.n_side, ctx.finv,
    )


def _nearest_in_base(leaf: LeafPolyline, target, base) -> float:
    """Signed arc length of the vertex whose base coordinates are nearest ``target``."""
    d = np.linalg.norm(torus_displacement(target, wrap(leaf.points)[:, base]), axis=1)
    k = int(np.argmin(d))
    return float(leaf.arclength[k] - leaf.arclength[leaf.index])


def _loop(ctx: _LoopContext, x, a1, a2, refinement, length, tol, max_iter=40):
    """Legs are signed arc lengths.  The return legs ``(a3, a4)`` are found
    by damped Newton on the base-coordinate closure, seeded at the vertex of
    the last stable leaf nearest the start (stable leaves of strongly
    perturbed maps need not be graphs over the linear stable direction)."""
    b = list(ctx.base)
    p1 = _leaf(ctx, x, "unstable", refinement, length).at(a1)
    p2 = _leaf(ctx, p1, "stable", refinement, length).at(a2)
    u_leaf = _leaf(ctx, p2, "unstable", refinement, length)
    half = 0.5 * length

    def close(a):
        p3 = u_leaf.at(a[0])
        p4 = _leaf(ctx, p3, "stable", refinement, length).at(a[1])
        return p4, torus_displacement(x[b], p4[b])

    a3 = -a1
    a = np.array([a3, _nearest_in_base(_leaf(ctx, u_leaf.at(a3), "stable", refinement, length), x[b], b)])
    p4, r = close(a)
    h = 1e-7
    for _ in range(max_iter):
        if np.linalg.norm(r) < tol:
            break
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            J[:, k] = (close(a + e)[1] - r) / h
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-4:
            cand = a + t * step
            if np.abs(cand).max() < half:
                q4, rr = close(cand)
                if np.linalg.norm(rr) < np.linalg.norm(r):
                    a, p4, r = cand, q4, rr
                    break
            t *= 0.5
        else:
            break
    res = float(np.linalg.norm(r))
    if res >= tol:
        raise LoopNotClosed(f"loop not closed (residual {res:.3g})")
    return (a1, a2, float(a[0]), float(a[1])), p4, res


def su_quadrilateral(
    f: MapExpr,
    x,
    legs: tuple[float, float],
    eu,
    es,
    base=(0, 1),
    center=(2, 3),
    refinement: int = 0,
    n_iter: int = 10,
    n_side: int = 48,
    tol: float = 1e-8,
    finv: MapExpr | None = None,
) -> HolonomyResult:
    """u, s, u, s legs: signed arc lengths ``legs[0]``, ``legs[1]`` and shot
    return legs closing the base coordinates; centre displacement and a
    two-refinement error estimate."""
    x = wrap(np.asarray(x, dtype=float))
    finv = f.inverse() if finv is None else finv
    d = f.dim
    EU = np.zeros(d)
    ES = np.zeros(d)
    EU[list(base)] = eu
    ES[list(base)] = es
    ctx = _LoopContext(f, finv, EU, ES, tuple(base), tuple(center), n_iter, n_side)
    length = 6.0 * max(abs(legs[0]), abs(legs[1]))
    out = []
    for ref in (refinement, refinement + 1):
        L, p4, res = _loop(ctx, x, legs[0], legs[1], ref, length, tol)
        disp = torus_displacement(x[list(center)], p4[list(center)])
        out.append((L, p4, res, disp))
    (L, p4, res, disp), (_, _, res2, disp2) = out[1], out[0]
    err = float(np.linalg.norm(disp - disp2))
    return HolonomyResult(x, L, p4, disp, err, max(res, res2), (refinement, refinement + 1))


@dataclass
class ReachRaster:
    """Holonomy magnitudes on a grid of centre positions over ``A^eps``."""

    centers: np.ndarray
    magnitude: np.ndarray
    error: np.ndarray
    failed: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def significant(self) -> np.ndarray:
        return (~self.failed) & (self.magnitude > 3.0 * self.error)

    @property
    def significant_fraction(self) -> float:
        return float(self.significant.mean())


def accessibility_reach(
    f: MapExpr,
    base_point,
    lo: float,
    hi: float,
    grid: int,
    legs: tuple[float, float],
    eu,
    es,
    base=(0, 1),
    center=(2, 3),
    **kw,
) -> ReachRaster:
    """``su_quadrilateral`` at the centres of a ``grid x grid`` raster of the
    centre square ``[lo, hi]^2`` with the base coordinates fixed."""
    g = lo + (np.arange(grid) + 0.5) * (hi - lo) / grid
    C = np.stack(np.meshgrid(g, g, indexing="ij"), -1)
    mag = np.zeros((grid, grid))
    err = np.zeros((grid, grid))
    failed = np.zeros((grid, grid), dtype=bool)
    finv = f.inverse()
    for i in range(grid):
        for j in range(grid):
            x = np.zeros(f.dim)
            x[list(base)] = base_point
            x[list(center)] = C[i, j]
            try:
                r = su_quadrilateral(f, x, legs, eu, es, base, center, finv=finv, **kw)
                mag[i, j], err[i, j] = r.magnitude, r.error
            except (LoopNotClosed, ValueError, np.linalg.LinAlgError):
                failed[i, j] = True
    return ReachRaster(C, mag, err, failed, dict(lo=lo, hi=hi, grid=grid, legs=legs))

"""Volume-preserving maps of flat tori as immutable expression trees.

Points are float arrays with coordinates in ``[0, 1)``; every public entry
point accepts a single point of shape ``(d,)`` or a batch ``(N, d)``.
Maps carry exact Jacobians: each node knows how to push a stack of tangent
vectors forward, so ``jacobian(Compose(g, f), x) = J_g(f(x)) J_f(x)`` falls
out of the tree walk.

Primitives
----------
Identity, Linear (unimodular integer matrix), Translation, Shear (one
coordinate plus a function of the others), Twist (rotation in a coordinate
plane by an angle that depends on the radius and on the other coordinates).
Product and Compose assemble them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as _cartesian
from typing import Iterator, Sequence

import numpy as np

from .profiles import Factor, Radial, RadialProfile, min_image, plane_offset


def wrap(X):
    """Reduce coordinates to ``[0, 1)``; values already there are returned bitwise."""
    X = np.asarray(X, dtype=float)
    Y = X - np.floor(X)
    # x - floor(x) rounds to 1.0 for tiny negative x
    return np.where(Y >= 1.0, 0.0, Y)


def torus_displacement(a, b):
    """Nearest-representative displacement ``b - a``."""
    return min_image(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))


def torus_distance(a, b):
    """Flat torus metric, per-coordinate ``min(|a-b|, 1-|a-b|)`` combined in l2."""
    return np.linalg.norm(torus_displacement(a, b), axis=-1)


def _as_batch(x, dim):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != dim:
        raise ValueError(f"point dimension {X.shape[1]} does not match map dimension {dim}")
    return X, single


class MapExpr:
    """Base class of the expression tree."""

    dim: int

    def _push(self, X, V):
        """Image of points ``X`` and of tangent stacks ``V`` (N, d, k)."""
        raise NotImplementedError

    def _apply(self, X):
        Y, _ = self._push(X, None)
        return Y

    def inverse(self) -> "MapExpr":
        raise NotImplementedError(f"{type(self).__name__} has no closed-form inverse")

    def __call__(self, x):
        return eval_map(self, x)

    def __matmul__(self, other: "MapExpr") -> "MapExpr":
        return Compose(self, other)

    def primitives(self) -> Iterator["MapExpr"]:
        yield self


@dataclass(frozen=True)
class Identity(MapExpr):
    dim: int

    def _push(self, X, V):
        return X, V

    def inverse(self):
        return self


@dataclass(frozen=True, eq=False)
class Linear(MapExpr):
    """Toral automorphism ``x -> M x mod 1`` for an integer matrix with det +-1."""

    matrix: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        M = np.asarray(self.matrix)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("Linear needs a square matrix")
        if not np.array_equal(M, np.round(M)):
            raise ValueError("Linear matrix must have integer entries")
        M = np.round(M).astype(np.int64)
        det = round(np.linalg.det(M))
        if abs(det) != 1:
            raise ValueError(f"Linear matrix must be unimodular, det = {det}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "dim", M.shape[0])

    def _push(self, X, V):
        Mf = self.matrix.astype(float)
        Y = wrap(X @ Mf.T)
        if V is not None:
            V = np.einsum("ij,njk->nik", Mf, V)
        return Y, V

    def inverse(self):
        inv = np.round(np.linalg.inv(self.matrix)).astype(np.int64)
        return Linear(inv)


@dataclass(frozen=True, eq=False)
class Translation(MapExpr):
    """Rigid rotation ``x -> x + v mod 1``."""

    vector: tuple[float, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        object.__setattr__(self, "dim", len(self.vector))

    def _push(self, X, V):
        return wrap(X + np.asarray(self.vector)), V

    def inverse(self):
        return Translation(tuple(-v for v in self.vector))


def _factor_product(factors, X):
    """Value and full gradient (N, d) of a product of factors."""
    N, d = X.shape
    vals = []
    grads = []
    for fac in factors:
        v, g = fac.evaluate(X)
        vals.append(v)
        grads.append(g)
    total = np.ones(N)
    for v in vals:
        total = total * v
    grad = np.zeros((N, d))
    for i, fac in enumerate(factors):
        others = np.ones(N)
        for j, v in enumerate(vals):
            if j != i:
                others = others * v
        for c, col in zip(fac.coords, grads[i].T):
            grad[:, c] += others * col
    return total, grad


def _factor_coords(factors):
    return {c for fac in factors for c in fac.coords}


@dataclass(frozen=True, eq=False)
class Shear(MapExpr):
    """``x[target] += amplitude * prod(factors)(x)``.

    The increment never reads ``x[target]``, so the Jacobian is unipotent and
    the inverse is the same shear with the amplitude negated.  A factor of
    nonzero degree (a winding) must appear alone with amplitude +-1.
    """

    dim: int
    target: int
    factors: tuple[Factor, ...]
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not 0 <= self.target < self.dim:
            raise ValueError("shear target out of range")
        used = _factor_coords(self.factors)
        if self.target in used:
            raise ValueError("shear increment may not depend on its own target coordinate")
        if any(c >= self.dim for c in used):
            raise ValueError("factor coordinate out of range")
        if any(f.winding_degree for f in self.factors):
            if len(self.factors) != 1 or abs(self.amplitude) != 1.0:
                raise ValueError("winding factors must stand alone with amplitude +-1")

    def increment(self, X):
        val, grad = _factor_product(self.factors, X)
        return self.amplitude * val, self.amplitude * grad

    def _push(self, X, V):
        inc, grad = self.increment(X)
        Y = X.copy()
        Y[:, self.target] = wrap(X[:, self.target] + inc)
        if V is not None:
            V = V.copy()
            cols = sorted(_factor_coords(self.factors))
            if cols:
                V[:, self.target, :] += np.einsum("nk,nkj->nj", grad[:, cols], V[:, cols, :])
        return Y, V

    def inverse(self):
        return Shear(self.dim, self.target, self.factors, -self.amplitude)


@dataclass(frozen=True, eq=False)
class Twist(MapExpr):
    """Rotation of the ``plane`` coordinates about ``center``.

    Angle = ``angle * radial(r) * prod(modulation)(other coords)``.  Because
    the in-plane dependence is through the radius only, the Jacobian has
    determinant one; the inverse negates the angle.

    With ``copies > 1`` the twist is repeated about the centres
    ``center + (j / copies, 0)``; the radial support must then be shorter
    than half the spacing so the copies are disjoint.
    """

    dim: int
    plane: tuple[int, int]
    center: tuple[float, float]
    radial: RadialProfile
    angle: float
    modulation: tuple[Factor, ...] = ()
    copies: int = 1

    def __post_init__(self):
        object.__setattr__(self, "plane", tuple(self.plane))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "modulation", tuple(self.modulation))
        if set(self.plane) & _factor_coords(self.modulation):
            raise ValueError("twist modulation may not read the rotated plane")
        if len(set(self.plane)) != 2 or max(self.plane) >= self.dim:
            raise ValueError("bad twist plane")
        if self.copies < 1 or self.radial.support >= 0.5 / self.copies:
            raise ValueError("twist copies overlap")

    @property
    def _factors(self):
        return (Radial(self.plane, self.center, self.radial, self.copies),) + self.modulation

    def theta(self, X):
        val, grad = _factor_product(self._factors, X)
        return self.angle * val, self.angle * grad

    def _push(self, X, V):
        i, j = self.plane
        th, gth = self.theta(X)
        d = plane_offset(X, self.plane, self.center, self.copies)
        c, s = np.cos(th), np.sin(th)
        rot = np.stack([c * d[:, 0] - s * d[:, 1], s * d[:, 0] + c * d[:, 1]], axis=1)
        Y = X.copy()
        moved = th != 0.0
        local = X[:, [i, j]] - d
        Y[:, [i, j]] = np.where(moved[:, None], wrap(rot + local), X[:, [i, j]])
        if V is not None:
            V = V.copy()
            vi, vj = V[:, i, :].copy(), V[:, j, :].copy()
            # d(rot)/dtheta = J rot
            dthv = np.einsum("nk,nkj->nj", gth, V)
            V[:, i, :] = c[:, None] * vi - s[:, None] * vj - rot[:, 1:2] * dthv
            V[:, j, :] = s[:, None] * vi + c[:, None] * vj + rot[:, 0:1] * dthv
        return Y, V

    def inverse(self):
        return Twist(
            self.dim, self.plane, self.center, self.radial, -self.angle, self.modulation, self.copies
        )


@dataclass(frozen=True, eq=False)
class Product(MapExpr):
    """``(x, y) -> (first(x), second(y))`` on coordinate blocks."""

    first: MapExpr
    second: MapExpr
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.first.dim + self.second.dim)

    def _push(self, X, V):
        d1 = self.first.dim
        if V is None:
            Y1, _ = self.first._push(X[:, :d1], None)
            Y2, _ = self.second._push(X[:, d1:], None)
            return np.concatenate([Y1, Y2], axis=1), None
        Y1, V1 = self.first._push(X[:, :d1], V[:, :d1, :])
        Y2, V2 = self.second._push(X[:, d1:], V[:, d1:, :])
        return np.concatenate([Y1, Y2], axis=1), np.concatenate([V1, V2], axis=1)

    def inverse(self):
        return Product(self.first.inverse(), self.second.inverse())

    def primitives(self):
        yield from self.first.primitives()
        yield from self.second.primitives()


@dataclass(frozen=True, eq=False)
class Compose(MapExpr):
    """``outer o inner``: evaluates ``inner`` first."""

    outer: MapExpr
    inner: MapExpr
    dim: int = field(init=False)

    def __post_init__(self):
        if self.outer.dim != self.inner.dim:
            raise ValueError(f"cannot compose maps of dimension {self.outer.dim} and {self.inner.dim}")
        object.__setattr__(self, "dim", self.inner.dim)

    def _push(self, X, V):
        X, V = self.inner._push(X, V)
        return self.outer._push(X, V)

    def inverse(self):
        return Compose(self.inner.inverse(), self.outer.inverse())

    def primitives(self):
        yield from self.inner.primitives()
        yield from self.outer.primitives()


def compose(*maps: MapExpr) -> MapExpr:
    """``compose(f, g, h) = f o g o h``; identity maps are dropped."""
    live = [m for m in maps if not isinstance(m, Identity)]
    if not maps:
        raise ValueError("compose needs at least one map")
    if not live:
        return maps[0]
    out = live[-1]
    for m in reversed(live[:-1]):
        out = Compose(m, out)
    return out


def embed(m: MapExpr, dim: int, offset: int) -> MapExpr:
    """Act with ``m`` on coordinates ``offset:offset+m.dim`` of a ``dim``-torus."""
    parts = []
    if offset:
        parts.append(Identity(offset))
    parts.append(m)
    rest = dim - offset - m.dim
    if rest < 0:
        raise ValueError("embedding does not fit")
    out = parts[0]
    for p in parts[1:]:
        out = Product(out, p)
    if rest:
        out = Product(out, Identity(rest))
    return out


# --- public operations -------------------------------------------------------


def eval_map(f: MapExpr, x):
    X, single = _as_batch(x, f.dim)
    Y = f._apply(wrap(X))
    return Y[0] if single else Y


def push_forward(f: MapExpr, x, V):
    """Image points and ``Df(x) V`` for tangent stacks ``V`` of shape (N, d, k)."""
    X, single = _as_batch(x, f.dim)
    V = np.asarray(V, dtype=float)
    if single and V.ndim == 2:
        V = V[None]
    Y, W = f._push(wrap(X), V)
    return (Y[0], W[0]) if single else (Y, W)


def jacobian(f: MapExpr, x):
    X, single = _as_batch(x, f.dim)
    eye = np.broadcast_to(np.eye(f.dim), (len(X), f.dim, f.dim)).copy()
    _, J = f._push(wrap(X), eye)
    return J[0] if single else J


def eval_and_jacobian(f: MapExpr, x):
    X, single = _as_batch(x, f.dim)
    eye = np.broadcast_to(np.eye(f.dim), (len(X), f.dim, f.dim)).copy()
    Y, J = f._push(wrap(X), eye)
    return (Y[0], J[0]) if single else (Y, J)


def jacobian_fd_check(f: MapExpr, x, step: float = 1e-5) -> float:
    """Max relative entrywise gap between the analytic Jacobian and a
    Richardson-extrapolated central difference (steps ``step`` and
    ``step/2``, fourth order).

    Displacements of the images are taken to the nearest torus representative.
    The relative error of an entry is normalised by ``max(1, |J_ij|)``.
    """
    if not 0.0 < step < 1e-3:
        raise ValueError("step must lie in (0, 1e-3)")
    X, _ = _as_batch(x, f.dim)
    X = wrap(X)
    J = jacobian(f, X)

    def central(h):
        fd = np.empty_like(J)
        for k in range(f.dim):
            e = np.zeros(f.dim)
            e[k] = h
            plus = eval_map(f, wrap(X + e))
            minus = eval_map(f, wrap(X - e))
            fd[:, :, k] = torus_displacement(minus, plus) / (2.0 * h)
        return fd

    fd = (4.0 * central(0.5 * step) - central(step)) / 3.0
    err = np.abs(J - fd) / np.maximum(1.0, np.abs(J))
    return float(err.max())


def iterate(f: MapExpr, x, n: int) -> np.ndarray:
    """Orbit ``[x, f(x), ..., f^n(x)]`` as an array of shape (n+1, ...)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    X, single = _as_batch(x, f.dim)
    X = wrap(X)
    out = np.empty((n + 1,) + X.shape)
    out[0] = X
    for k in range(n):
        X = f._apply(X)
        out[k + 1] = X
    return out[:, 0] if single else out


def orbit_stream(f: MapExpr, x, n: int) -> Iterator[np.ndarray]:
    """Yield ``f^1(x), ..., f^n(x)`` without storing the orbit."""
    if n < 0:
        raise ValueError("n must be non-negative")
    X, single = _as_batch(x, f.dim)
    X = wrap(X)
    for _ in range(n):
        X = f._apply(X)
        yield X[0] if single else X


def power(f: MapExpr, x, n: int):
    """``f^n(x)`` (streamed)."""
    X, single = _as_batch(x, f.dim)
    X = wrap(X)
    for _ in range(n):
        X = f._apply(X)
    return X[0] if single else X


def fixed_points_of_linear(matrix) -> list[np.ndarray]:
    """All fixed points of the toral automorphism ``x -> A x mod 1``.

    Solves ``(A - I) x = k`` for integer ``k``; the solutions form the finite
    group ``(A - I)^{-1} Z^d / Z^d`` of order ``|det(A - I)|``.  Computed with
    exact rationals.
    """
    A = np.asarray(matrix)
    if not np.array_equal(A, np.round(A)):
        raise ValueError("matrix must be integer")
    A = np.round(A).astype(np.int64)
    d = A.shape[0]
    if abs(round(np.linalg.det(A))) != 1:
        raise ValueError("matrix must be unimodular")
    B = [[Fraction(int(A[i, j]) - (i == j)) for j in range(d)] for i in range(d)]
    det = _frac_det(B)
    if det == 0:
        raise ValueError("A - I is singular; fixed set is not finite")
    Binv = _frac_inv(B)
    n = abs(int(det))
    seen = {}
    # (A - I)^{-1} Z^d mod 1 is generated by the columns of Binv; integer
    # vectors with entries in [0, n) already reach every class.
    for k in _cartesian(range(n), repeat=d):
        pt = tuple((sum(Binv[i][j] * k[j] for j in range(d))) % 1 for i in range(d))
        seen[pt] = True
        if len(seen) == n:
            break
    pts = sorted(seen)
    return [np.array([float(c) for c in p]) for p in pts]


def _frac_det(B):
    M = [row[:] for row in B]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            fac = M[r][c] / M[c][c]
            M[r] = [a - fac * b for a, b in zip(M[r], M[c])]
    return det


def _frac_inv(B):
    n = len(B)
    M = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(B)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [a / p for a in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                fac = M[r][c]
                M[r] = [a - fac * b for a, b in zip(M[r], M[c])]
    return [row[n:] for row in M]


def max_abs_det_error(f: MapExpr, X) -> float:
    """``max | |det J| - 1 |`` over the batch."""
    J = jacobian(f, X)
    return float(np.max(np.abs(np.abs(np.linalg.det(J)) - 1.0)))


CAT_MAP = np.array([[2, 1], [1, 1]])
DEFAULT_A = np.array([[5, 3], [3, 2]])


def hyperbolic_eigen(matrix):
    """Eigen-data of a hyperbolic 2x2 automorphism: (lambda_u, e_u, e_s)."""
    A = np.asarray(matrix, dtype=float)
    w, v = np.linalg.eig(A)
    order = np.argsort(-np.abs(w))
    w, v = w[order], v[:, order]
    return float(abs(w[0])), v[:, 0] / np.linalg.norm(v[:, 0]), v[:, 1] / np.linalg.norm(v[:, 1])

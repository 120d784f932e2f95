"""Finite-time Lyapunov spectra, centre-plane estimation and central exponents.

All routines are batched over an ``(N, d)`` array of points.  Central
directions are those of the two middle exponents of the sorted 4-spectrum
(for the T^6 variant: the two smallest in absolute value).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import MapExpr, _as_batch, wrap


class SplittingError(RuntimeError):
    """The centre plane could not be resolved at some point."""


@dataclass
class LyapunovEstimate:
    """Finite-time spectrum (descending) and its checkpoint history.

    ``exponents`` has shape ``(N, d)``; ``history`` maps a checkpoint step
    count to the running averages at that step.
    """

    exponents: np.ndarray
    n: int
    renorm: int
    burn_in: int
    sums: np.ndarray
    history: dict = field(default_factory=dict)

    @property
    def zero_sum_error(self) -> np.ndarray:
        return np.abs(self.exponents.sum(axis=1))


def _qr_positive(V):
    Q, R = np.linalg.qr(V)
    sgn = np.sign(np.diagonal(R, axis1=1, axis2=2))
    sgn[sgn == 0] = 1.0
    return Q * sgn[:, None, :], R * sgn[:, :, None]


def benettin_spectrum(
    f: MapExpr,
    x,
    n: int,
    renorm: int = 1,
    burn_in: int = 0,
    checkpoints=(),
) -> LyapunovEstimate:
    """QR (Benettin) spectrum over ``n`` steps after ``burn_in`` discarded steps.

    The frame is re-orthonormalised every ``renorm`` steps.  During burn-in
    the frame is propagated but its growth is not accumulated, which removes
    the transient of the initial frame.
    """
    if not n >= renorm >= 1:
        raise ValueError("need n >= renorm >= 1")
    X, single = _as_batch(x, f.dim)
    X = wrap(X)
    N, d = X.shape
    Q = np.broadcast_to(np.eye(d), (N, d, d)).copy()
    S = np.zeros((N, d))
    history = {}
    checkpoints = set(int(c) for c in checkpoints)
    total = burn_in + n
    for k in range(1, total + 1):
        X, Q = f._push(X, Q)
        if k % renorm == 0 or k == total or k == burn_in:
            if not np.all(np.isfinite(Q)):
                bad = np.flatnonzero(~np.isfinite(Q).all(axis=(1, 2)))
                raise FloatingPointError(
                    f"non-finite Jacobian product at step {k} for samples {bad[:5].tolist()}"
                )
            Q, R = _qr_positive(Q)
            if k > burn_in:
                S += np.log(np.abs(np.diagonal(R, axis1=1, axis2=2)))
        steps = k - burn_in
        if steps in checkpoints:
            history[steps] = np.sort(S / steps, axis=1)[:, ::-1]
    exps = np.sort(S / n, axis=1)[:, ::-1]
    if single:
        exps = exps[0]
        S = S[0]
        history = {k: v[0] for k, v in history.items()}
    return LyapunovEstimate(exps, n, renorm, burn_in, S, history)


def central_exponents(f: MapExpr, x, n: int, burn_in: int = 0, n_central: int = 2) -> np.ndarray:
    """The ``n_central`` exponents of smallest magnitude, descending.

    For a partially hyperbolic map with one expanding and one contracting
    direction per base block these are the middle exponents of the sorted
    spectrum.
    """
    est = benettin_spectrum(f, x, n, 1, burn_in)
    E = np.atleast_2d(est.exponents)
    d = E.shape[1]
    k = (d - n_central) // 2
    out = E[:, k : k + n_central]
    return out[0] if np.ndim(est.exponents) == 1 else out


@dataclass
class CenterPlaneEstimate:
    """Orthonormal 2-frames spanning the estimated centre bundle.

    ``frame`` has shape ``(N, d, 2)``; ``angle`` is the smallest principal
    angle between the centre-unstable and centre-stable estimates outside
    their common plane (conditioning); ``residual`` is the sine of the
    largest principal angle between ``Df E^c(x)`` and ``E^c(f(x))`` when
    requested, else NaN.
    """

    points: np.ndarray
    frame: np.ndarray
    angle: np.ndarray
    residual: np.ndarray
    resolved: np.ndarray


def _subspace_intersection(U, S):
    """Batched intersection of two 3-planes in R^4 (or two (d-k)-planes).

    Returns an orthonormal basis of the common subspace of dimension
    ``U.shape[2] + S.shape[2] - d`` and the conditioning angle.
    """
    N, d, ku = U.shape
    ks = S.shape[2]
    m = ku + ks - d
    # orthonormal complement of S; the intersection is the kernel of Sperp^T U
    full, _ = np.linalg.qr(np.concatenate([S, np.broadcast_to(np.eye(d), (N, d, d))], axis=2))
    Sperp = full[:, :, ks:d]
    M = np.einsum("nkj,nki->nji", Sperp, U)  # (N, d-ks, ku)
    _, sv, Vt = np.linalg.svd(M)
    coeff = np.swapaxes(Vt, 1, 2)[:, :, ku - m :]  # kernel directions
    E = np.einsum("nij,njk->nik", U, coeff)
    E, _ = _qr_positive(E)
    angle = sv[:, -1] if sv.shape[1] else np.ones(N)
    return E, angle


def estimate_center_plane(
    f: MapExpr,
    x,
    n_forward: int = 30,
    n_backward: int = 30,
    center=(2, 3),
    unstable_guess=None,
    stable_guess=None,
    angle_tol: float = 1e-6,
    residual: bool = False,
    strict: bool = False,
) -> CenterPlaneEstimate:
    """Centre plane as the intersection of the centre-unstable 3-plane (pushed
    forward from ``f^{-n_backward}(x)``) and the centre-stable 3-plane (pulled
    back from ``f^{n_forward}(x)``).

    ``unstable_guess`` / ``stable_guess`` are the hyperbolic directions of
    the unperturbed map, stacked with the centre coordinate directions to
    seed the frames.
    """
    X, _ = _as_batch(x, f.dim)
    X = wrap(X)
    N, d = X.shape
    n_c = len(center)
    finv = f.inverse()
    I = np.eye(d)
    Ccols = I[:, list(center)]
    if unstable_guess is None or stable_guess is None:
        rest = [k for k in range(d) if k not in center]
        unstable_guess = I[:, rest[: len(rest) // 2]]
        stable_guess = I[:, rest[len(rest) // 2 :]]
    cu0 = np.concatenate([np.asarray(unstable_guess, float).reshape(d, -1), Ccols], axis=1)
    cs0 = np.concatenate([np.asarray(stable_guess, float).reshape(d, -1), Ccols], axis=1)

    # centre-unstable: backward pseudo-orbit, then push a frame forward along it
    Y = X.copy()
    back = [Y]
    for _ in range(n_backward):
        Y = finv._apply(Y)
        back.append(Y)
    F = np.broadcast_to(cu0, (N,) + cu0.shape).copy()
    for Y in back[:0:-1]:
        _, F = f._push(Y, F)
        F, _ = _qr_positive(F)
    U = F
    # centre-stable: forward pseudo-orbit, pull a frame back along it
    Z = X.copy()
    fwd = [Z]
    for _ in range(n_forward):
        Z = f._apply(Z)
        fwd.append(Z)
    F = np.broadcast_to(cs0, (N,) + cs0.shape).copy()
    for Z in fwd[:0:-1]:
        _, F = finv._push(Z, F)
        F, _ = _qr_positive(F)
    S = F
    E, angle = _subspace_intersection(U, S)
    E = E[:, :, :n_c]
    resolved = np.isfinite(angle) & (angle > angle_tol) & np.isfinite(E).all(axis=(1, 2))
    res = np.full(N, np.nan)
    if residual:
        nxt = estimate_center_plane(
            f, f._apply(X), n_forward, n_backward, center, unstable_guess, stable_guess, angle_tol
        )
        _, W = f._push(X, E)
        W, _ = _qr_positive(W)
        P = nxt.frame
        # sine of the largest principal angle between span(W) and span(P)
        proj = W - np.einsum("nij,nkj,nkl->nil", P, P, W)
        res = np.linalg.norm(proj, 2, axis=(1, 2))
        resolved &= nxt.resolved
    if strict and not resolved.all():
        raise SplittingError(f"splitting not resolved at {int((~resolved).sum())} of {N} points")
    return CenterPlaneEstimate(X, E, angle, res, resolved)


def center_log_jacobian(f: MapExpr, X, E, center=(2, 3)) -> np.ndarray:
    """``log |det|`` of ``Df`` restricted to the planes ``E(x) -> Df E(x)``,
    with areas measured through the projection to the centre coordinates.

    Because the projection is the identity on the centre block, this
    vanishes exactly wherever ``Df`` is block diagonal with a unimodular
    centre block.
    """
    c = list(center)
    Pc = E[:, c, :]
    _, W = f._push(X, E)
    Wc = W[:, c, :]
    return np.log(np.abs(np.linalg.det(Wc))) - np.log(np.abs(np.linalg.det(Pc)))

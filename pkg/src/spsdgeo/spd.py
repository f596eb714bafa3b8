"""Affine-invariant geometry of symmetric positive definite matrices.

All matrix functions go through :func:`sym_eig`, so every operation here is
an explicit function of a symmetric eigendecomposition. Inputs are
symmetrized before decomposition and outputs are symmetrized before they
are returned.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySet,
    NoConvergence,
    NonFinite,
    NotPositiveDefinite,
    ValidationError,
)

SPD_TOL = 1e-12


@dataclass(frozen=True)
class MeanConfig:
    """Stopping rule shared by the fixed-point mean iterations."""

    eps: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError(f"max_iter must be a positive integer, got {self.max_iter}")


def symmetrize(A):
    return 0.5 * (A + A.T)


def fix_signs(V):
    """Flip columns so each one's largest-magnitude entry is nonnegative.

    Ties go to the lowest row index (``np.argmax`` returns the first hit).
    """
    V = np.array(V, dtype=float, copy=True)
    if V.size == 0:
        return V
    rows = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[rows, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    A : ndarray, shape (d, d)
        Symmetric matrix. It is symmetrized as ``(A + A.T) / 2`` first.

    Returns
    -------
    w : ndarray, shape (d,)
        Eigenvalues in descending order.
    V : ndarray, shape (d, d)
        Orthonormal eigenvectors as columns, sign-fixed by :func:`fix_signs`.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix has NaN or Inf entries")
    w, V = np.linalg.eigh(symmetrize(A))
    return w[::-1].copy(), fix_signs(V[:, ::-1])


def _check_pd(w, what="matrix"):
    if w.size and not (w[0] > 0 and w[-1] > SPD_TOL * w[0]):
        raise NotPositiveDefinite(
            f"{what} is not positive definite (eigenvalues in [{w[-1]:.3e}, {w[0]:.3e}])"
        )


def spd_fn(P, f, t=None):
    """Principal matrix function ``V diag(f(w)) V^T``.

    ``f`` is one of ``"power"`` (exponent ``t``), ``"log"``, ``"exp"``,
    ``"sqrt"`` or ``"invsqrt"``. Everything but ``"exp"`` requires ``P`` to
    be positive definite; ``"exp"`` accepts any symmetric matrix.
    """
    w, V = sym_eig(P)
    if f == "exp":
        fw = np.exp(w)
    else:
        _check_pd(w)
        if f == "log":
            fw = np.log(w)
        elif f == "sqrt":
            fw = np.sqrt(w)
        elif f == "invsqrt":
            fw = 1.0 / np.sqrt(w)
        elif f == "power":
            if t is None:
                raise ValidationError("power requires an exponent t")
            fw = w ** float(t)
        else:
            raise ValidationError(f"unknown matrix function {f!r}")
    return symmetrize((V * fw) @ V.T)


def sqrtm(P):
    return spd_fn(P, "sqrt")


def invsqrtm(P):
    return spd_fn(P, "invsqrt")


def logm(P):
    return spd_fn(P, "log")


def expm(S):
    return spd_fn(S, "exp")


def powm(P, t):
    return spd_fn(P, "power", t)


def _half_powers(P):
    w, V = sym_eig(P)
    _check_pd(w)
    s = np.sqrt(w)
    return symmetrize((V * s) @ V.T), symmetrize((V / s) @ V.T)


def _same_shape(*mats):
    shape = np.shape(mats[0])
    for M in mats[1:]:
        if np.shape(M) != shape:
            raise DimensionMismatch(f"shape {np.shape(M)} does not match {shape}")


def spd_geodesic(P1, P2, t):
    """Point at time ``t`` on the geodesic from ``P1`` to ``P2``."""
    _same_shape(P1, P2)
    if t == 0:
        return symmetrize(np.asarray(P1, dtype=float))
    if t == 1:
        return symmetrize(np.asarray(P2, dtype=float))
    s, isq = _half_powers(P1)
    return symmetrize(s @ powm(isq @ P2 @ isq, t) @ s)


def spd_distance(P1, P2):
    """Affine-invariant distance ``||log(P1^{-1/2} P2 P1^{-1/2})||_F``."""
    _same_shape(P1, P2)
    _, isq = _half_powers(P1)
    w, _ = sym_eig(isq @ P2 @ isq)
    _check_pd(w)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_exp(P, S):
    """Exponential map at ``P`` applied to the symmetric tangent ``S``."""
    _same_shape(P, S)
    s, isq = _half_powers(P)
    return symmetrize(s @ expm(isq @ S @ isq) @ s)


def spd_log(P, P0):
    """Logarithmic map at ``P`` of the point ``P0``."""
    _same_shape(P, P0)
    s, isq = _half_powers(P)
    return symmetrize(s @ logm(isq @ P0 @ isq) @ s)


def transport_matrix(P1, P2):
    """``E = (P2 P1^{-1})^{1/2}`` in the symmetric form
    ``P1^{1/2} (P1^{-1/2} P2 P1^{-1/2})^{1/2} P1^{-1/2}``."""
    _same_shape(P1, P2)
    s, isq = _half_powers(P1)
    return s @ sqrtm(isq @ P2 @ isq) @ isq


def spd_pt(P1, P2, S):
    """Parallel transport of ``S`` from the tangent space at ``P1`` to ``P2``."""
    _same_shape(P1, P2, S)
    E = transport_matrix(P1, P2)
    return symmetrize(E @ S @ E.T)


def spd_inner(S1, S2, P):
    """Affine-invariant inner product ``tr(P^{-1} S1 P^{-1} S2)``."""
    _same_shape(S1, S2, P)
    _, isq = _half_powers(P)
    A = isq @ S1 @ isq
    B = isq @ S2 @ isq
    return float(np.sum(A * B))


def spd_whiten(Pbar, P):
    """Whitened tangent coordinates ``log(Pbar^{-1/2} P Pbar^{-1/2})``."""
    _same_shape(Pbar, P)
    _, isq = _half_powers(Pbar)
    return logm(isq @ P @ isq)


def _stack(mats):
    if len(mats) == 0:
        raise EmptySet("cannot average an empty set")
    mats = [np.asarray(M, dtype=float) for M in mats]
    if any(M.shape != mats[0].shape for M in mats):
        raise DimensionMismatch("all matrices must share one shape")
    arr = np.asarray(mats)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch("all matrices must be square and share one shape")
    return arr


def spd_mean(mats, cfg=None, *, return_info=False):
    """Riemannian (Karcher) mean by the fixed-point iteration.

    Starts from the arithmetic mean, then alternates
    ``S <- mean_i Log_P(P_i)`` and ``P <- Exp_P(S)``. The returned point is
    the iterate at which ``||S||_F <= cfg.eps`` was observed.

    Parameters
    ----------
    mats : sequence of ndarray, shape (d, d)
        SPD matrices.
    cfg : MeanConfig, optional
    return_info : bool
        Also return ``{"iterations": int, "grad_norm": float}``.

    Raises
    ------
    EmptySet
        If ``mats`` is empty.
    NoConvergence
        If ``cfg.max_iter`` steps did not reach the tolerance. The exception
        carries the last iterate.
    """
    cfg = cfg or MeanConfig()
    arr = _stack(mats)
    n = arr.shape[0]
    if n == 1:
        P = symmetrize(arr[0])
        _check_pd(sym_eig(P)[0])
        return (P, {"iterations": 0, "grad_norm": 0.0}) if return_info else P

    P = symmetrize(arr.mean(axis=0))
    grad_norm = np.inf
    for it in range(cfg.max_iter + 1):
        s, isq = _half_powers(P)
        T = np.zeros_like(P)
        for Pi in arr:
            T += logm(isq @ Pi @ isq)
        T /= n
        S = symmetrize(s @ T @ s)
        grad_norm = float(np.linalg.norm(S))
        if grad_norm <= cfg.eps:
            info = {"iterations": it, "grad_norm": grad_norm}
            return (P, info) if return_info else P
        if it == cfg.max_iter:
            break
        P = symmetrize(s @ expm(T) @ s)
    raise NoConvergence(
        f"SPD mean did not converge in {cfg.max_iter} iterations "
        f"(gradient norm {grad_norm:.3e} > {cfg.eps:.1e})",
        last=P,
        iterations=cfg.max_iter,
        grad_norm=grad_norm,
    )

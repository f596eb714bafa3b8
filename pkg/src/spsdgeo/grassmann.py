"""Grassmann manifold in the thin (d x r) representation.

A subspace is represented by a frame ``G`` with orthonormal columns. Tangent
vectors at ``G`` are d x r matrices ``Delta`` with ``G.T @ Delta = 0``; their
inner product is the plain trace ``tr(Delta1.T @ Delta2)``. Full d x d
orthogonal frames (:class:`OrthFrame`) are only used where a rotation of the
whole ambient space is needed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySet, NoConvergence, SubspaceTooFar
from .spd import MeanConfig, sym_eig

ANGLE_TOL = 1e-10


@dataclass(frozen=True)
class OrthFrame:
    """A d x d orthogonal matrix whose leftmost ``r`` columns span the subspace."""

    q: np.ndarray
    r: int

    @property
    def thin(self):
        return self.q[:, : self.r]

    @property
    def perp(self):
        return self.q[:, self.r :]


def _thin(G):
    return G.thin if isinstance(G, OrthFrame) else np.asarray(G, dtype=float)


def _check_pair(G1, G2):
    if G1.shape != G2.shape:
        raise DimensionMismatch(f"frame shapes differ: {G1.shape} vs {G2.shape}")


def horizontal(G, X):
    """Project ``X`` onto the horizontal space at ``G``."""
    return X - G @ (G.T @ X)


def orth_complete(G):
    """Complete ``G`` to an orthogonal frame ``[G | G_perp]``.

    ``G_perp`` holds the eigenvectors of ``I - G G^T`` with eigenvalue one,
    ordered and sign-fixed by :func:`~spsdgeo.spd.sym_eig`.
    """
    G = np.asarray(G, dtype=float)
    d, r = G.shape
    _, V = sym_eig(np.eye(d) - G @ G.T)
    return OrthFrame(np.hstack([G, V[:, : d - r]]), r)


def grass_exp(G, Delta):
    """Exponential map ``(G V cos(S) + U sin(S)) V^T`` with ``Delta = U S V^T``.

    Any vertical component of ``Delta`` is discarded.
    """
    G = np.asarray(G, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    _check_pair(G, Delta)
    U, s, Vt = np.linalg.svd(horizontal(G, Delta), full_matrices=False)
    return (G @ Vt.T * np.cos(s) + U * np.sin(s)) @ Vt


def _skew_exp(B):
    """Closed-form ``expm([[0, -B^T], [B, 0]])`` for a (d - r) x r block ``B``."""
    m, r = B.shape
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    V = Vt.T
    c, sn = np.cos(s), np.sin(s)
    top_left = (V * c) @ Vt + np.eye(r) - V @ Vt
    bottom_right = (U * c) @ U.T + np.eye(m) - U @ U.T
    top_right = -(V * sn) @ U.T
    bottom_left = (U * sn) @ Vt
    return np.block([[top_left, top_right], [bottom_left, bottom_right]])


def grass_exp_full(Q, B):
    """``Q expm(B^skew)`` for the full orthogonal representation."""
    B = np.asarray(B, dtype=float)
    d, r = Q.q.shape[0], Q.r
    if B.shape != (d - r, r):
        raise DimensionMismatch(f"B must have shape {(d - r, r)}, got {B.shape}")
    return OrthFrame(Q.q @ _skew_exp(B), r)


def _checked_cross(G, G0):
    M = G.T @ G0
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin < ANGLE_TOL:
        raise SubspaceTooFar(
            f"largest principal angle is pi/2 (smallest cosine {smin:.3e} < {ANGLE_TOL:.0e})"
        )
    return M


def grass_log(G, G0):
    """Logarithmic map ``U arctan(S) V^T`` where
    ``(I - G G^T) G0 (G^T G0)^{-1} = U S V^T``."""
    G = np.asarray(G, dtype=float)
    G0 = _thin(G0)
    _check_pair(G, G0)
    M = _checked_cross(G, G0)
    A = np.linalg.solve(M.T, horizontal(G, G0).T).T
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U * np.arctan(s)) @ Vt


def grass_log_full(Q, Q0):
    """Block ``B0`` with ``Log_G(G0) = G_perp B0``; ``Q0`` may be thin or full."""
    return Q.perp.T @ grass_log(Q.thin, _thin(Q0))


def grass_geodesic(G1, G2, t):
    G1 = np.asarray(G1, dtype=float)
    if t == 0:
        return G1.copy()
    return grass_exp(G1, t * grass_log(G1, G2))


def principal_angles(G1, G2):
    """Principal angles in ascending order.

    Cosines come from ``G1^T G2`` and sines from ``(I - G1 G1^T) G2``; both
    are clamped to [0, 1] and combined with ``arctan2`` so that small and
    near-right angles are both resolved to full precision.
    """
    G1 = _thin(G1)
    G2 = _thin(G2)
    _check_pair(G1, G2)
    cos = np.clip(np.linalg.svd(G1.T @ G2, compute_uv=False), 0.0, 1.0)
    sin = np.clip(np.linalg.svd(horizontal(G1, G2), compute_uv=False), 0.0, 1.0)
    # descending cosines pair with ascending sines
    return np.arctan2(np.sort(sin), cos)


def grass_distance(G1, G2):
    return float(np.linalg.norm(principal_angles(G1, G2)))


def grass_project(G1, G2):
    """Representative of ``[G2]`` closest to ``G1``: ``G2 O2 O1^T`` where
    ``G1^T G2 = O1 S O2^T``."""
    G1 = np.asarray(G1, dtype=float)
    G2 = _thin(G2)
    _check_pair(G1, G2)
    M = _checked_cross(G1, G2)
    O1, _, O2t = np.linalg.svd(M)
    return G2 @ O2t.T @ O1.T


def grass_project_full(Q1, Q2):
    return grass_exp_full(Q1, grass_log_full(Q1, Q2))


def grass_pt(Q, Btilde, t, Delta):
    """Transport ``Delta`` (tangent at ``Q.thin``) along ``t -> Q expm(t Btilde^skew)``.

    Returns ``Q expm(t Btilde^skew) Q^T Delta``, the thin representative of
    the transported tangent; at ``t = 1`` this is the endpoint transport.
    """
    Delta = np.asarray(Delta, dtype=float)
    Btilde = np.asarray(Btilde, dtype=float)
    d, r = Q.q.shape[0], Q.r
    if Delta.shape != (d, r) or Btilde.shape != (d - r, r):
        raise DimensionMismatch("tangent or direction block has the wrong shape")
    return Q.q @ (_skew_exp(t * Btilde) @ (Q.q.T @ Delta))


def grass_mean(frames, cfg=None, *, return_info=False):
    """Karcher mean of subspaces, initialized at the first frame.

    Iterates ``D <- mean_i Log_G(G_i)``, ``G <- Exp_G(D)`` and returns the
    iterate at which ``||D||_F <= cfg.eps``.
    """
    cfg = cfg or MeanConfig()
    if len(frames) == 0:
        raise EmptySet("cannot average an empty set of frames")
    frames = [_thin(G) for G in frames]
    for G in frames[1:]:
        _check_pair(frames[0], G)
    G = frames[0].copy()
    if len(frames) == 1:
        return (G, {"iterations": 0, "grad_norm": 0.0}) if return_info else G

    grad_norm = np.inf
    for it in range(cfg.max_iter + 1):
        D = sum(grass_log(G, Gi) for Gi in frames) / len(frames)
        grad_norm = float(np.linalg.norm(D))
        if grad_norm <= cfg.eps:
            info = {"iterations": it, "grad_norm": grad_norm}
            return (G, info) if return_info else G
        if it == cfg.max_iter:
            break
        G = grass_exp(G, D)
    raise NoConvergence(
        f"Grassmann mean did not converge in {cfg.max_iter} iterations "
        f"(gradient norm {grad_norm:.3e} > {cfg.eps:.1e})",
        last=G,
        iterations=cfg.max_iter,
        grad_norm=grad_norm,
    )


def random_frame(rng, d, r):
    """Orthonormal d x r frame from the QR factor of a Gaussian matrix."""
    Q, R = np.linalg.qr(rng.standard_normal((d, r)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def gauge_fix(G):
    """Canonical representative of ``[G]`` independent of the input basis.

    Projects ``[G]`` onto the coordinate axes it loads most heavily
    (largest diagonal entries of ``G G^T``, ties to the lowest index), i.e.
    ``grass_project(E, G)`` for the corresponding axis frame ``E``.
    """
    G = np.asarray(G, dtype=float)
    d, r = G.shape
    lev = np.sum(G * G, axis=1)
    axes = np.sort(np.argsort(-lev, kind="stable")[:r])
    E = np.zeros((d, r))
    E[axes, np.arange(r)] = 1.0
    try:
        return grass_project(E, G)
    except SubspaceTooFar:
        return G.copy()


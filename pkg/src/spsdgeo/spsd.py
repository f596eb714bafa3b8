"""Fixed-rank SPSD matrices in the structure space ``C = G P G^T``.

A point is a pair (frame, core) with an orthonormal d x r frame and an
r x r SPD core. The pair is defined up to the gauge ``(G O, O^T P O)``.
Geodesics, log/exp maps and transport are taken componentwise, and they are
only meaningful once the second point has been aligned to the first with
:func:`align_pair` (its frame replaced by ``grass_project(G1, G2)``).
"""

from dataclasses import dataclass, field

import numpy as np

from . import grassmann as gr
from . import spd
from .errors import (
    BaseMismatch,
    DimensionMismatch,
    EmptySet,
    NotAligned,
    RankMismatch,
    ValidationError,
)
from .spd import MeanConfig, symmetrize

RANK_TOL = 1e-9
ALIGN_TOL = 1e-8


@dataclass(frozen=True)
class SpsdPoint:
    frame: np.ndarray
    core: np.ndarray

    @property
    def d(self):
        return self.frame.shape[0]

    @property
    def r(self):
        return self.frame.shape[1]

    def compose(self):
        return spsd_compose(self)


@dataclass(frozen=True)
class SpsdTangent:
    """Tangent ``(Delta, S)``; ``base`` records the point it is attached to."""

    grass: np.ndarray
    spd: np.ndarray
    base: SpsdPoint | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SpsdMetricConfig:
    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValidationError(f"k must be positive, got {self.k}")


@dataclass
class CanonicalSet:
    """A set aligned to its mean frame: every ``items[i].frame`` is a fixed
    point of ``grass_project(mean_frame, .)``."""

    mean_frame: np.ndarray
    mean_core: np.ndarray
    items: list
    labels: list | None = None
    info: dict = field(default_factory=dict)

    @property
    def mean(self):
        return SpsdPoint(self.mean_frame, self.mean_core)

    def __len__(self):
        return len(self.items)


def spsd_factor(C, r, *, rank_tol=RANK_TOL, truncate=False):
    """Factor a rank-``r`` PSD matrix as ``(G, P)`` with ``G`` the top-``r``
    eigenvectors and ``P = G^T C G``.

    With ``truncate=True`` eigenvalues beyond the ``r``-th are dropped instead
    of raising; the top ``r`` must still clear ``rank_tol``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {C.shape}")
    d = C.shape[0]
    if not 1 <= r < d:
        raise ValidationError(f"rank must satisfy 1 <= r < d={d}, got {r}")
    w, V = spd.sym_eig(C)
    if not w[0] > 0:
        raise RankMismatch("matrix has no positive eigenvalue", actual_rank=0)
    rank = int(np.sum(w > rank_tol * w[0]))
    if rank < r or (rank > r and not truncate):
        raise RankMismatch(f"numerical rank is {rank}, expected {r}", actual_rank=rank)
    G = V[:, :r]
    return SpsdPoint(G, symmetrize(G.T @ C @ G))


def spsd_compose(X):
    G = X.frame
    return symmetrize(G @ X.core @ G.T)


def as_point(X, r=None, **kw):
    """Accept an :class:`SpsdPoint` as is, or factor a dense matrix at rank ``r``."""
    if isinstance(X, SpsdPoint):
        if r is not None and X.r != r:
            raise RankMismatch(f"point has rank {X.r}, expected {r}", actual_rank=X.r)
        return X
    if r is None:
        raise ValidationError("a rank is required to factor a dense matrix")
    return spsd_factor(X, r, **kw)


def _same_point(A, B):
    return A is B or (np.array_equal(A.frame, B.frame) and np.array_equal(A.core, B.core))


def spsd_inner(t1, t2, base, cfg=None):
    """``<D1, D2> + k <S1, S2>_P`` with the trace inner product on frames."""
    cfg = cfg or SpsdMetricConfig()
    for t in (t1, t2):
        if t.base is not None and not _same_point(t.base, base):
            raise BaseMismatch("tangent is attached to a different base point")
    return float(np.sum(t1.grass * t2.grass)) + cfg.k * spd.spd_inner(t1.spd, t2.spd, base.core)


def align_pair(X1, X2):
    """Re-gauge ``X2`` so that its frame is ``grass_project(X1.frame, X2.frame)``."""
    G2 = gr.grass_project(X1.frame, X2.frame)
    O = X2.frame.T @ G2
    return SpsdPoint(G2, symmetrize(O.T @ X2.core @ O))


def is_aligned(G_ref, G, tol=ALIGN_TOL):
    return np.linalg.norm(gr.grass_project(G_ref, G) - G) <= tol


def _require_aligned(X1, X2):
    if not is_aligned(X1.frame, X2.frame):
        raise NotAligned("second point is not aligned to the first; call align_pair first")


def spsd_geodesic(X1, X2, t):
    """Approximate geodesic ``(grass_geodesic(G1, G2, t), spd_geodesic(P1, P2, t))``.

    ``X2`` must already be aligned to ``X1``.
    """
    _require_aligned(X1, X2)
    return SpsdPoint(
        gr.grass_geodesic(X1.frame, X2.frame, t),
        spd.spd_geodesic(X1.core, X2.core, t),
    )


def spsd_curve_length(X1, X2, cfg=None):
    """Length of the approximate geodesic, ``sqrt(d_G^2 + k d_P^2)``.

    Aligns ``X2`` to ``X1`` internally. This is not a metric.
    """
    cfg = cfg or SpsdMetricConfig()
    X2 = align_pair(X1, X2)
    dg = gr.grass_distance(X1.frame, X2.frame)
    dp = spd.spd_distance(X1.core, X2.core)
    return float(np.sqrt(dg**2 + cfg.k * dp**2))


def spsd_log(base, X):
    """Approximate log map; ``X`` is aligned to ``base`` internally."""
    X = align_pair(base, X)
    return SpsdTangent(
        gr.grass_log(base.frame, X.frame),
        spd.spd_log(base.core, X.core),
        base,
    )


def spsd_exp(base, tangent):
    if tangent.grass.shape != base.frame.shape or tangent.spd.shape != base.core.shape:
        raise DimensionMismatch("tangent shape does not match the base point")
    return SpsdPoint(
        gr.grass_exp(base.frame, tangent.grass),
        spd.spd_exp(base.core, tangent.spd),
    )


def spsd_pt(src, dst, tangent):
    """Transport a tangent at ``src`` to ``dst`` componentwise.

    ``dst`` must be aligned to ``src``. The frame part uses the endpoint form
    of the Grassmann transport along the geodesic from ``src.frame`` to
    ``dst.frame``; the core part is the SPD transport.
    """
    _require_aligned(src, dst)
    Q = gr.orth_complete(src.frame)
    B = gr.grass_log_full(Q, dst.frame)
    return SpsdTangent(
        gr.grass_pt(Q, B, 1.0, tangent.grass),
        spd.spd_pt(src.core, dst.core, tangent.spd),
        dst,
    )


def canonical_item(mean_frame, X):
    """``X`` re-gauged onto ``grass_project(mean_frame, X.frame)``."""
    return align_pair(SpsdPoint(mean_frame, np.empty((0, 0))), X)


def spsd_mean(points, cfg=None, labels=None):
    """Riemannian mean of fixed-rank SPSD matrices (Grassmann mean of the
    ranges, then SPD mean of the cores aligned to it).

    Parameters
    ----------
    points : sequence of SpsdPoint
    cfg : MeanConfig, optional
        Used for both inner mean iterations.
    labels : sequence of int, optional
        Carried through to the returned :class:`CanonicalSet` untouched.

    Returns
    -------
    mean : SpsdPoint
    aligned : CanonicalSet
        The input items in the canonical gauge of the mean frame.
    """
    cfg = cfg or MeanConfig()
    if len(points) == 0:
        raise EmptySet("cannot average an empty set")
    shape = points[0].frame.shape
    for X in points:
        if X.frame.shape != shape:
            raise RankMismatch(
                f"frame shape {X.frame.shape} differs from {shape}", actual_rank=X.r
            )
    Gbar, ginfo = gr.grass_mean([X.frame for X in points], cfg, return_info=True)
    # fix the representative so re-gauged inputs give the same canonical set
    Gbar = gr.gauge_fix(Gbar)
    items = [canonical_item(Gbar, X) for X in points]
    Pbar, pinfo = spd.spd_mean([X.core for X in items], cfg, return_info=True)
    info = {"grassmann": ginfo, "spd": pinfo}
    cs = CanonicalSet(Gbar, Pbar, items, None if labels is None else list(labels), info)
    return cs.mean, cs


def spsd_canonicalize(points, cfg=None, labels=None):
    return spsd_mean(points, cfg, labels)[1]

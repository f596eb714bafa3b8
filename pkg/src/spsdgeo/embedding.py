"""Tangent-space embedding of SPSD sets and PCA reduction."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import svd

from . import spd
from .errors import DimensionMismatch, EmptySet, InvalidComponentCount, ValidationError, ZeroVariance
from .spd import MeanConfig, fix_signs
from .spsd import SpsdPoint, canonical_item, spsd_log, spsd_mean


@dataclass
class TangentBatch:
    base: SpsdPoint
    items: list
    points: list
    set_ids: np.ndarray

    @property
    def dim(self):
        d, r = self.base.frame.shape
        return d * r + r * r

    def __len__(self):
        return len(self.items)


def embed_set(sets, base=None, cfg=None):
    """Log-map every item of one or more sets at a shared base point.

    ``sets`` is a list of lists of :class:`SpsdPoint`. Without ``base`` the
    SPSD mean of their union is used. Items are re-gauged onto the base frame
    first, so each tangent is the velocity of the aligned approximate
    geodesic.
    """
    cfg = cfg or MeanConfig()
    union = [X for S in sets for X in S]
    if not union:
        raise EmptySet("nothing to embed")
    ids = np.concatenate([np.full(len(S), j, dtype=int) for j, S in enumerate(sets)])
    if base is None:
        base, cs = spsd_mean(union, cfg)
        points = cs.items
    else:
        points = [canonical_item(base.frame, X) for X in union]
    items = [spsd_log(base, X) for X in points]
    return TangentBatch(base, items, points, ids)


def vectorize(batch, k_mode="auto", whiten_spd=False):
    """Stack each tangent as ``[vec(Delta), k * vec(S)]`` (column-major).

    With ``k_mode="auto"`` the weight is ``std(Delta entries) / std(S entries)``
    using population standard deviations pooled over the batch. With
    ``whiten_spd`` the core part is ``log(Pbar^{-1/2} P Pbar^{-1/2})``.

    Returns
    -------
    vectors : ndarray, shape (N, d*r + r*r)
    k_used : float
    """
    if len(batch) == 0:
        raise EmptySet("empty batch")
    D = np.array([t.grass.reshape(-1, order="F") for t in batch.items])
    if whiten_spd:
        S = np.array(
            [spd.spd_whiten(batch.base.core, X.core).reshape(-1, order="F") for X in batch.points]
        )
    else:
        S = np.array([t.spd.reshape(-1, order="F") for t in batch.items])
    if isinstance(k_mode, str):
        if k_mode != "auto":
            raise ValidationError(f"k_mode must be 'auto' or a number, got {k_mode!r}")
        s_std = float(np.std(S))
        if s_std == 0.0:
            raise ZeroVariance("all SPD tangent entries are identical; cannot match scales")
        k = float(np.std(D)) / s_std
    else:
        k = float(k_mode)
        if not k > 0:
            raise ValidationError(f"k must be positive, got {k}")
    return np.hstack([D, k * S]), k


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray
    m: int
    k_used: float | None = None


def pca_fit(vectors, m, k_used=None):
    """Mean-centered PCA keeping the top ``m`` principal directions."""
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("expected an N x D array")
    n, dim = X.shape
    if int(m) != m or not 1 <= m <= min(n, dim):
        raise InvalidComponentCount(f"m must be in [1, {min(n, dim)}], got {m}")
    mu = X.mean(axis=0)
    # gesvd: the divide-and-conquer driver can fail to converge on benign input
    _, _, Vt = svd(X - mu, full_matrices=False, lapack_driver="gesvd")
    return PcaModel(mu, fix_signs(Vt[:m].T), int(m), k_used)


def pca_apply(model, vectors):
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    if X.shape[1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"vectors have length {X.shape[1]}, model expects {model.mean.shape[0]}"
        )
    return (X - model.mean) @ model.basis

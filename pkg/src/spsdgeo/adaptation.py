"""Transport maps between Riemannian means and the set-level adaptation
pipeline built on them.

The source set is moved onto the target set by transporting it from the
source mean to the target mean: a congruence ``E P E^T`` on SPD cores and a
fixed rotation ``O_bar Q_bar^T`` on canonically aligned frames. Labels are
never consulted.
"""

from dataclasses import dataclass, field

import numpy as np

from . import grassmann as gr
from . import spd
from .errors import DimensionMismatch, NoConvergence, NotAligned, ValidationError
from .spd import MeanConfig, symmetrize
from .spsd import (
    SpsdMetricConfig,
    SpsdPoint,
    align_pair,
    as_point,
    canonical_item,
    is_aligned,
    spsd_compose,
    spsd_mean,
)


@dataclass(frozen=True)
class SpdTransport:
    source_mean: np.ndarray
    target_mean: np.ndarray
    E: np.ndarray

    @classmethod
    def between(cls, source_mean, target_mean):
        return cls(source_mean, target_mean, spd.transport_matrix(source_mean, target_mean))


def spd_gamma_plus(transport, P):
    """``E P E^T``: moves ``P`` from around the source mean to around the target mean."""
    P = np.asarray(P, dtype=float)
    if P.shape != transport.E.shape:
        raise DimensionMismatch(f"matrix shape {P.shape} does not match E {transport.E.shape}")
    E = transport.E
    return symmetrize(E @ P @ E.T)


def completed_target(Qbar, Vbar):
    """Completion ``O_bar = Q_bar expm(B0^skew)`` of ``Vbar`` that is its own
    projection onto ``Q_bar``."""
    return gr.grass_exp_full(Qbar, gr.grass_log_full(Qbar, Vbar))


def grass_gamma_plus(Qbar, Vbar_full, G):
    """``O_bar Q_bar^T G`` for a frame ``G`` aligned to ``Q_bar.thin``."""
    G = np.asarray(G, dtype=float)
    if not is_aligned(Qbar.thin, G):
        raise NotAligned("frame is not aligned to the source mean")
    return Vbar_full.q @ (Qbar.q.T @ G)


@dataclass(frozen=True)
class DaConfig:
    rank: int
    metric: SpsdMetricConfig = field(default_factory=SpsdMetricConfig)
    mean: MeanConfig = field(default_factory=MeanConfig)
    mean_subsample: int | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.rank) != self.rank or self.rank < 1:
            raise ValidationError(f"rank must be a positive integer, got {self.rank}")
        if self.mean_subsample is not None and self.mean_subsample < 2:
            raise ValidationError(
                f"mean_subsample must be at least 2 when set, got {self.mean_subsample}"
            )


@dataclass(frozen=True)
class SpsdTransport:
    """Frozen transport from the source mean ``(Gbar, Pbar)`` to the target
    mean ``(Vbar, Rbar)``; ``Vbar`` is stored in the gauge aligned to ``Gbar``."""

    source_frame: np.ndarray
    source_core: np.ndarray
    target_frame: np.ndarray
    target_core: np.ndarray
    rotation: np.ndarray
    E: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def r(self):
        return self.source_frame.shape[1]

    @property
    def d(self):
        return self.source_frame.shape[0]


def build_spsd_transport(source_mean, target_mean, cfg=None, diagnostics=None):
    """Transport from ``source_mean`` to the target mean.

    ``target_mean`` may be an :class:`SpsdPoint` or a dense rank-``r`` matrix
    (factored at ``source_mean.r``). It is re-gauged onto ``source_mean``
    before the frame rotation and core congruence are formed.
    """
    r = source_mean.r
    if cfg is not None and cfg.rank != r:
        raise ValidationError(f"config rank {cfg.rank} differs from the source mean rank {r}")
    target = as_point(target_mean, r)
    if target.d != source_mean.d:
        raise DimensionMismatch(f"ambient dimensions differ: {source_mean.d} vs {target.d}")
    target = align_pair(source_mean, target)
    Qbar = gr.orth_complete(source_mean.frame)
    Obar = completed_target(Qbar, target.frame)
    return SpsdTransport(
        source_frame=source_mean.frame,
        source_core=source_mean.core,
        target_frame=target.frame,
        target_core=target.core,
        rotation=Obar.q @ Qbar.q.T,
        E=spd.transport_matrix(source_mean.core, target.core),
        diagnostics=dict(diagnostics or {}),
    )


def apply_spsd_transport(transport, X):
    """``(O_bar Q_bar^T G, E P E^T)`` for an item aligned to the source mean."""
    if not is_aligned(transport.source_frame, X.frame):
        raise NotAligned("item is not aligned to the source mean frame")
    E = transport.E
    return SpsdPoint(transport.rotation @ X.frame, symmetrize(E @ X.core @ E.T))


def _subsample(points, m, rng):
    if m is None or m >= len(points):
        return points
    idx = np.sort(rng.choice(len(points), size=m, replace=False))
    return [points[i] for i in idx]


def _mean(points, cfg, stage):
    try:
        mean, cs = spsd_mean(points, cfg)
    except NoConvergence as exc:
        exc.stage = stage
        raise
    return mean, cs.info


def adapt_points(X, Y, cfg):
    """Algorithm-level adaptation on structure pairs.

    Returns the adapted source items as :class:`SpsdPoint` objects together
    with the transport that produced them.
    """
    Xp = [as_point(C, cfg.rank) for C in X]
    Yp = [as_point(C, cfg.rank) for C in Y]
    rng = np.random.default_rng(cfg.seed)
    src_mean, src_info = _mean(_subsample(Xp, cfg.mean_subsample, rng), cfg.mean, "source")
    tgt_mean, tgt_info = _mean(_subsample(Yp, cfg.mean_subsample, rng), cfg.mean, "target")
    transport = build_spsd_transport(
        src_mean, tgt_mean, cfg, diagnostics={"source_mean": src_info, "target_mean": tgt_info}
    )
    adapted = [apply_spsd_transport(transport, canonical_item(src_mean.frame, Xi)) for Xi in Xp]
    return adapted, transport


def da_adapt(X, Y, cfg):
    """Adapt the source set ``X`` to the target set ``Y``.

    Parameters
    ----------
    X, Y : sequence of ndarray or SpsdPoint
        Rank-``cfg.rank`` SPSD matrices, dense d x d or already factored.
    cfg : DaConfig

    Returns
    -------
    adapted : list of ndarray
        Dense d x d adapted source matrices in input order.
    transport : SpsdTransport
        The frozen map, reusable by :func:`da_oos`.
    """
    adapted, transport = adapt_points(X, Y, cfg)
    return [spsd_compose(A) for A in adapted], transport


def da_oos_point(transport, Xstar):
    X = as_point(Xstar, transport.r)
    return apply_spsd_transport(transport, canonical_item(transport.source_frame, X))


def da_oos(transport, Xstar):
    """Out-of-sample extension with the frozen transport."""
    return spsd_compose(da_oos_point(transport, Xstar))


def da_multi(sets, reference_index, cfg):
    """Adapt every set to ``sets[reference_index]``; the reference is returned as is."""
    if len(sets) < 2:
        raise ValidationError("at least two sets are required")
    if not 0 <= reference_index < len(sets):
        raise ValidationError(f"reference index {reference_index} out of range")
    ref = sets[reference_index]
    out = []
    for j, S in enumerate(sets):
        if j == reference_index:
            out.append([np.array(C, dtype=float) if not isinstance(C, SpsdPoint)
                        else spsd_compose(C) for C in S])
        else:
            out.append(da_adapt(S, ref, cfg)[0])
    return out

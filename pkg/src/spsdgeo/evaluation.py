"""Covariance descriptors, a synthetic two-domain benchmark, a nearest
centroid classifier and agreement metrics."""

from dataclasses import dataclass

import numpy as np

from . import grassmann as gr
from . import spd
from .errors import (
    EmptyClass,
    IndexOutOfRange,
    LengthMismatch,
    RankMismatch,
    TooFewPoints,
    ValidationError,
    ZeroVector,
)
from .io import MatrixSet
from .spsd import SpsdPoint, SpsdTangent, spsd_exp, spsd_factor


def cosine_angle(p, q):
    """Angle between two vectors, in [0, pi]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    npn, nqn = np.linalg.norm(p), np.linalg.norm(q)
    if npn == 0 or nqn == 0:
        raise ZeroVector("cosine angle is undefined for a zero vector")
    return float(np.arccos(np.clip(p @ q / (npn * nqn), -1.0, 1.0)))


def sample_covariance(points):
    """Unbiased covariance of the rows of ``points``."""
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewPoints("need at least two points")
    Xc = X - X.mean(axis=0)
    return spd.symmetrize(Xc.T @ Xc / (X.shape[0] - 1))


@dataclass(frozen=True)
class FeatureConfig:
    window: int
    neighbors: int
    rank: int
    grid: tuple | None = None
    min_valid: int | None = None

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValidationError(f"window must be an odd positive integer, got {self.window}")
        if self.neighbors < 1:
            raise ValidationError("neighbors must be positive")
        if self.grid is not None and self.neighbors > self.window**2:
            raise ValidationError("neighbors cannot exceed window**2")
        if self.rank < 1:
            raise ValidationError("rank must be positive")
        if self.min_valid is None:
            object.__setattr__(self, "min_valid", self.rank + 1)
        if self.min_valid < self.rank + 1:
            raise ValidationError(f"min_valid must be at least rank + 1 = {self.rank + 1}")


def _valid(pixels):
    return np.all(np.isfinite(pixels), axis=1) & np.any(pixels != 0, axis=1)


def _patch(i, grid, w):
    nx, ny = grid
    ix, iy = divmod(i, ny)
    h = w // 2
    xs = np.arange(max(ix - h, 0), min(ix + h + 1, nx))
    ys = np.arange(max(iy - h, 0), min(iy + h + 1, ny))
    return (xs[:, None] * ny + ys[None, :]).ravel()


def local_covariance(pixels, i, cfg, valid=None):
    """Rank-``r`` local covariance descriptor of pixel ``i``, or ``None``.

    Candidates are the valid pixels (finite, not all zero) of the W x W patch
    around ``i``, cropped at the border, including ``i`` itself; without a
    grid every pixel is a candidate. The ``J`` candidates with the smallest
    angle to pixel ``i`` (ties to the lower index) form the neighborhood.
    ``None`` is returned when fewer than ``min_valid`` candidates exist or
    the covariance does not reach rank ``r``.
    """
    X = np.asarray(pixels, dtype=float)
    n = X.shape[0]
    if not 0 <= i < n:
        raise IndexOutOfRange(f"pixel index {i} out of range [0, {n})")
    if cfg.grid is not None and cfg.grid[0] * cfg.grid[1] != n:
        raise ValidationError(f"grid {cfg.grid} does not match {n} pixels")
    if valid is None:
        valid = _valid(X)
    if not valid[i]:
        raise ZeroVector(f"pixel {i} is zero or non-finite")
    cand = np.arange(n) if cfg.grid is None else _patch(i, cfg.grid, cfg.window)
    cand = cand[valid[cand]]
    if cand.size < cfg.min_valid:
        return None
    p = X[i]
    C = X[cand]
    cosv = C @ p / (np.linalg.norm(C, axis=1) * np.linalg.norm(p))
    ang = np.arccos(np.clip(cosv, -1.0, 1.0))
    order = np.lexsort((cand, ang))[: cfg.neighbors]
    nbrs = C[order]
    if nbrs.shape[0] < 2:
        return None
    try:
        return spsd_factor(sample_covariance(nbrs), cfg.rank, truncate=True)
    except (RankMismatch, ValidationError):
        return None


def extract_features(pixels, cfg, indices=None):
    """Descriptors for ``indices`` (default all valid pixels); skipped pixels
    are dropped. Returns ``(kept_indices, points)``."""
    X = np.asarray(pixels, dtype=float)
    valid = _valid(X)
    if indices is None:
        indices = np.flatnonzero(valid)
    kept, pts = [], []
    for i in indices:
        X_i = local_covariance(X, int(i), cfg, valid)
        if X_i is not None:
            kept.append(int(i))
            pts.append(X_i)
    return kept, pts


DISTORTIONS = ("subspace_rotation", "core_congruence")


@dataclass(frozen=True)
class SynthConfig:
    d: int = 20
    r: int = 4
    classes: int = 5
    per_class: int = 40
    seed: int = 0
    distortion: tuple = DISTORTIONS
    noise_scale: float = 0.1
    class_spread: float = 0.5
    rotation_angle: float = 1.0
    congruence_scale: float = 0.5

    def __post_init__(self):
        if self.classes < 2 or self.per_class < 2:
            raise ValidationError("need at least two classes and two items per class")
        if not self.d > self.r >= 1:
            raise ValidationError(f"need d > r >= 1, got d={self.d}, r={self.r}")
        object.__setattr__(self, "distortion", tuple(self.distortion))
        bad = set(self.distortion) - set(DISTORTIONS)
        if bad:
            raise ValidationError(f"unknown distortion(s): {sorted(bad)}")
        if self.noise_scale < 0:
            raise ValidationError("noise_scale must be nonnegative")


def _unit_sym(rng, r):
    A = rng.standard_normal((r, r))
    A = A + A.T
    return A / np.linalg.norm(A)


def _random_tangent(rng, X, scale):
    """Gaussian tangent at ``X`` with entrywise scale ``scale``; the core
    part is drawn in whitened coordinates."""
    G, P = X.frame, X.core
    D = gr.horizontal(G, rng.standard_normal(G.shape)) * scale
    W = rng.standard_normal(P.shape) * scale
    W = (W + W.T) / np.sqrt(2)
    s = spd.sqrtm(P)
    return SpsdTangent(D, spd.symmetrize(s @ W @ s), X)


def synth_generate(cfg):
    """Two domains sharing class structure, the target under known distortions.

    Class prototypes are spread around a random base point ``(G0, P0)`` by
    tangent steps of length ``class_spread``. Each domain draws its own
    items around the prototypes. The target is then distorted by a rotation
    ``U`` of the ambient space that turns ``[G0]`` by ``rotation_angle`` in
    every principal direction, acting as ``C -> U C U^T``, and by the core
    congruence
    ``E0 = P0^{1/2} B P0^{-1/2}`` with ``B`` SPD.

    Returns
    -------
    source, target : MatrixSet
    truth : dict
        ``rotation``, ``congruence``, ``base_frame``, ``base_core``,
        ``prototypes`` and the config echo.
    """
    rng = np.random.default_rng(cfg.seed)
    d, r = cfg.d, cfg.r
    G0 = gr.random_frame(rng, d, r)
    P0 = spd.expm(0.5 * _unit_sym(rng, r) * np.sqrt(r))
    base = SpsdPoint(G0, P0)

    protos = []
    for _ in range(cfg.classes):
        D = gr.horizontal(G0, rng.standard_normal((d, r)))
        D *= cfg.class_spread / np.linalg.norm(D)
        S = spd.symmetrize(spd.sqrtm(P0) @ _unit_sym(rng, r) @ spd.sqrtm(P0)) * cfg.class_spread
        protos.append(spsd_exp(base, SpsdTangent(D, S, base)))

    def draw():
        items = []
        for X in protos:
            for _ in range(cfg.per_class):
                items.append(spsd_exp(X, _random_tangent(rng, X, cfg.noise_scale)))
        return items

    src = draw()
    tgt = draw() if cfg.noise_scale > 0 else list(src)

    U = np.eye(d)
    if "subspace_rotation" in cfg.distortion:
        # rotate [G0] towards a random direction, every principal angle equal
        Q0 = gr.orth_complete(G0)
        Ub, _, Vbt = np.linalg.svd(rng.standard_normal((d - r, r)), full_matrices=False)
        U = Q0.q @ gr._skew_exp(cfg.rotation_angle * Ub @ Vbt) @ Q0.q.T
    E0 = np.eye(r)
    if "core_congruence" in cfg.distortion:
        B = spd.expm(cfg.congruence_scale * _unit_sym(rng, r) * np.sqrt(r))
        E0 = spd.sqrtm(P0) @ B @ spd.invsqrtm(P0)
    tgt = [SpsdPoint(U @ X.frame, spd.symmetrize(E0 @ X.core @ E0.T)) for X in tgt]

    labels = [c for c in range(cfg.classes) for _ in range(cfg.per_class)]
    truth = {
        "rotation": U,
        "congruence": E0,
        "base_frame": G0,
        "base_core": P0,
        "prototypes": protos,
        "config": {
            "d": d, "r": r, "classes": cfg.classes, "per_class": cfg.per_class,
            "seed": cfg.seed, "distortion": list(cfg.distortion),
            "noise_scale": cfg.noise_scale,
        },
    }
    return MatrixSet(src, labels, r, d), MatrixSet(tgt, list(labels), r, d), truth


def nearest_centroid(train, labels, test, classes=None):
    """Assign each test row to the class with the nearest training centroid.

    Ties go to the lowest class id. ``classes`` fixes the candidate set; a
    listed class without training rows raises :class:`EmptyClass`.
    """
    train = np.atleast_2d(np.asarray(train, dtype=float))
    test = np.atleast_2d(np.asarray(test, dtype=float))
    labels = np.asarray(labels)
    if labels.shape[0] != train.shape[0]:
        raise LengthMismatch("labels and training rows differ in length")
    if train.shape[1] != test.shape[1]:
        raise ValidationError("train and test dimensions differ")
    classes = np.unique(labels) if classes is None else np.sort(np.asarray(classes))
    cents = []
    for c in classes:
        rows = train[labels == c]
        if rows.shape[0] == 0:
            raise EmptyClass(f"class {c} has no training vectors")
        cents.append(rows.mean(axis=0))
    cents = np.array(cents)
    d2 = ((test[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    return classes[np.argmin(d2, axis=1)]


@dataclass(frozen=True)
class ConfusionSummary:
    classes: tuple
    true_counts: tuple
    pred_counts: tuple
    n: int
    p_o: float
    p_e: float
    kappa: float
    undefined: bool = False

    @property
    def accuracy(self):
        return self.p_o


def cohen_kappa(true_labels, predicted_labels):
    """Cohen's kappa, ``(p_o - p_e) / (1 - p_e)``.

    When ``p_e == 1`` (one class everywhere) kappa is reported as 1.0 and
    ``undefined`` is set.
    """
    t = list(true_labels)
    p = list(predicted_labels)
    if len(t) != len(p):
        raise LengthMismatch(f"{len(t)} true labels vs {len(p)} predictions")
    if not t:
        raise LengthMismatch("need at least one observation")
    n = len(t)
    classes = sorted(set(t) | set(p))
    nt = [t.count(c) for c in classes]
    npred = [p.count(c) for c in classes]
    p_o = sum(a == b for a, b in zip(t, p)) / n
    p_e = sum(a * b for a, b in zip(nt, npred)) / n**2
    if p_e == 1:
        return ConfusionSummary(tuple(classes), tuple(nt), tuple(npred), n, p_o, p_e, 1.0, True)
    kappa = (p_o - p_e) / (1 - p_e)
    return ConfusionSummary(tuple(classes), tuple(nt), tuple(npred), n, p_o, p_e, kappa)

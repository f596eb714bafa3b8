"""Command-line interface.

Exit status is 0 on success, 2 for invalid input and 3 for numerical
failures. A JSON run report (command, configuration, timings, convergence
diagnostics, metrics) goes to ``--report`` or, if omitted, to stderr.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import io as sio
from .adaptation import DaConfig, adapt_points, da_oos_point
from .embedding import embed_set, pca_apply, pca_fit, vectorize
from .errors import NoConvergence, NumericalError, ParseError, ValidationError
from .evaluation import (
    DISTORTIONS,
    FeatureConfig,
    SynthConfig,
    cohen_kappa,
    extract_features,
    nearest_centroid,
    synth_generate,
)
from .spd import MeanConfig
from .spsd import SpsdMetricConfig, spsd_curve_length, spsd_mean


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


class Report:
    def __init__(self, command, args):
        self.data = {
            "command": command,
            "config": {k: v for k, v in vars(args).items() if k not in ("func",)},
            "timings": {},
            "diagnostics": {},
            "metrics": {},
        }
        self._t0 = time.perf_counter()

    def time(self, name, t0):
        self.data["timings"][name] = time.perf_counter() - t0

    def finish(self, status, path=None, error=None):
        self.data["status"] = status
        if error is not None:
            self.data["error"] = {"type": type(error).__name__, "message": str(error)}
        self.data["timings"]["total"] = time.perf_counter() - self._t0
        text = json.dumps(_to_jsonable(self.data), sort_keys=True, indent=1)
        if path:
            with open(path, "w", newline="\n") as fh:
                fh.write(text + "\n")
        else:
            print(text, file=sys.stderr)


def _mean_cfg(args):
    return MeanConfig(eps=args.eps, max_iter=args.max_iter)


def _points(mset, rank, force):
    if mset.r is not None and mset.r != rank and all(hasattr(X, "frame") for X in mset.items):
        raise ValidationError(f"dataset has rank {mset.r}, --rank is {rank}")
    return mset.points(rank, truncate=force)


def _write_points(points, path, labels, storage, rank, d):
    sio.write_dataset(sio.MatrixSet(points, labels, rank, d), path, storage=storage)


def cmd_mean(args, rep):
    mset = sio.read_dataset(args.input)
    pts = _points(mset, args.rank, args.force_rank)
    t0 = time.perf_counter()
    mean, cs = spsd_mean(pts, _mean_cfg(args))
    rep.time("mean", t0)
    rep.data["diagnostics"] = cs.info
    _write_points([mean], args.output, None, args.storage, args.rank, mean.d)


def cmd_adapt(args, rep):
    src = sio.read_dataset(args.source)
    tgt = sio.read_dataset(args.target)
    cfg = DaConfig(
        rank=args.rank,
        metric=SpsdMetricConfig(args.k),
        mean=_mean_cfg(args),
        mean_subsample=args.mean_subsample,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    adapted, transport = adapt_points(
        _points(src, args.rank, args.force_rank), _points(tgt, args.rank, args.force_rank), cfg
    )
    rep.time("adapt", t0)
    rep.data["diagnostics"] = transport.diagnostics
    _write_points(adapted, args.output, src.labels, args.storage, args.rank, src.d)
    if args.transport_out:
        sio.write_transport(transport, args.transport_out)


def cmd_oos(args, rep):
    transport = sio.read_transport(args.transport)
    mset = sio.read_dataset(args.input)
    pts = _points(mset, transport.r, args.force_rank)
    t0 = time.perf_counter()
    out = [da_oos_point(transport, X) for X in pts]
    rep.time("oos", t0)
    _write_points(out, args.output, mset.labels, args.storage, transport.r, transport.d)


def cmd_embed(args, rep):
    sets = [sio.read_dataset(p) for p in args.input]
    pts = [_points(s, args.rank, args.force_rank) for s in sets]
    t0 = time.perf_counter()
    batch = embed_set(pts, cfg=_mean_cfg(args))
    k_mode = "auto" if args.k_mode == "auto" else float(args.k_mode)
    vecs, k = vectorize(batch, k_mode, whiten_spd=args.whiten)
    model = pca_fit(vecs, args.components, k_used=k)
    scores = pca_apply(model, vecs)
    rep.time("embed", t0)
    rep.data["metrics"]["k_used"] = k
    rows = []
    j = 0
    for sid, s in enumerate(sets):
        for i in range(len(s)):
            label = "" if s.labels is None else s.labels[i]
            rows.append([sid, i, label] + [float(v) for v in scores[j]])
            j += 1
    header = ["set", "index", "label"] + [f"pc{c + 1}" for c in range(args.components)]
    sio.write_csv(args.output, header, rows)


def cmd_dist(args, rep):
    mset = sio.read_dataset(args.input)
    pts = _points(mset, args.rank, args.force_rank)
    mcfg = SpsdMetricConfig(args.k)
    t0 = time.perf_counter()
    if args.pairwise:
        n = len(pts)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = spsd_curve_length(pts[i], pts[j], mcfg)
        header = ["index"] + [f"d{j}" for j in range(n)]
        rows = [[i] + [float(v) for v in D[i]] for i in range(n)]
    else:
        mean, cs = spsd_mean(pts, _mean_cfg(args))
        rep.data["diagnostics"] = cs.info
        header = ["index", "distance"]
        rows = [[i, spsd_curve_length(mean, X, mcfg)] for i, X in enumerate(pts)]
    rep.time("dist", t0)
    sio.write_csv(args.output, header, rows)


def _pair(text, name):
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"{name} must look like 'nx,ny', got {text!r}") from exc
    return a, b


def cmd_features(args, rep):
    header, rows = sio.read_csv(args.input)
    lab_col = header.index("label") if "label" in header else None
    cols = [c for c in range(len(header)) if c != lab_col]
    try:
        pixels = np.array([[float(r[c]) for c in cols] for r in rows])
        labels = None if lab_col is None else [int(r[lab_col]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed pixel CSV: {exc}") from exc
    grid = _pair(args.grid, "--grid") if args.grid else None
    cfg = FeatureConfig(args.window, args.neighbors, args.rank, grid, args.min_valid)
    t0 = time.perf_counter()
    kept, pts = extract_features(pixels, cfg)
    rep.time("features", t0)
    rep.data["metrics"].update({"pixels": len(rows), "descriptors": len(pts)})
    out = sio.MatrixSet(pts, None if labels is None else [labels[i] for i in kept],
                        args.rank, pixels.shape[1], kept)
    sio.write_dataset(out, args.output, storage=args.storage)


def cmd_synth(args, rep):
    distort = tuple(v for v in args.distort.split(",") if v) if args.distort else ()
    cfg = SynthConfig(d=args.d, r=args.r, classes=args.classes, per_class=args.per_class,
                      seed=args.seed, distortion=distort, noise_scale=args.noise)
    src, tgt, truth = synth_generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    sio.write_dataset(src, os.path.join(args.out_dir, "source.json"))
    sio.write_dataset(tgt, os.path.join(args.out_dir, "target.json"))
    gt = {k: truth[k] for k in ("rotation", "congruence", "base_frame", "base_core", "config")}
    with open(os.path.join(args.out_dir, "ground_truth.json"), "w", newline="\n") as fh:
        json.dump(_to_jsonable(gt), fh, sort_keys=True)
        fh.write("\n")


def _read_embedding(path, set_id):
    header, rows = sio.read_csv(path)
    try:
        pcs = [i for i, h in enumerate(header) if h.startswith("pc")]
        li, si = header.index("label"), header.index("set")
    except ValueError as exc:
        raise ParseError(f"{path} is not an embedding CSV") from exc
    if set_id is not None:
        rows = [r for r in rows if int(r[si]) == set_id]
    if any(r[li] == "" for r in rows):
        raise ValidationError(f"{path} has unlabeled rows")
    try:
        X = np.array([[float(r[i]) for i in pcs] for r in rows])
        y = np.array([int(r[li]) for r in rows])
    except ValueError as exc:
        raise ParseError(f"malformed embedding CSV {path}: {exc}") from exc
    if len(rows) == 0:
        raise ValidationError(f"no rows selected from {path}")
    return X, y


def cmd_eval(args, rep):
    Xtr, ytr = _read_embedding(args.train, args.train_set)
    Xte, yte = _read_embedding(args.test, args.test_set)
    pred = nearest_centroid(Xtr, ytr, Xte)
    cs = cohen_kappa(yte.tolist(), pred.tolist())
    metrics = {}
    for m in args.metric.split(","):
        if m == "kappa":
            metrics["kappa"] = cs.kappa
            metrics["kappa_undefined"] = cs.undefined
        elif m == "accuracy":
            metrics["accuracy"] = cs.p_o
        else:
            raise ValidationError(f"unknown metric {m!r}")
    metrics["n"] = cs.n
    rep.data["metrics"].update(metrics)
    text = json.dumps(metrics, sort_keys=True)
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _common(p, rank=True):
    if rank:
        p.add_argument("--rank", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--force-rank", action="store_true",
                   help="truncate dense inputs to the top --rank eigenpairs")
    p.add_argument("--report")


def build_parser():
    ap = argparse.ArgumentParser(prog="spsdgeo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mean", help="SPSD mean of a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--storage", choices=("dense", "factored"), default="factored")
    _common(p)
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("adapt", help="adapt a source dataset to a target dataset")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--transport-out")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--mean-subsample", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--storage", choices=("dense", "factored"), default="factored")
    _common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("oos", help="apply a saved transport to new data")
    p.add_argument("--transport", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--storage", choices=("dense", "factored"), default="factored")
    _common(p, rank=False)
    p.set_defaults(func=cmd_oos)

    p = sub.add_parser("embed", help="tangent-space PCA embedding of one or more datasets")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--k-mode", default="auto")
    p.add_argument("--whiten", action="store_true")
    p.add_argument("--output", required=True)
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("dist", help="curve lengths to the mean or between all pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--pairwise", action="store_true")
    p.add_argument("--output", required=True)
    _common(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("features", help="local covariance descriptors from a pixel CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--grid")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--neighbors", type=int, required=True)
    p.add_argument("--min-valid", type=int)
    p.add_argument("--output", required=True)
    p.add_argument("--storage", choices=("dense", "factored"), default="factored")
    _common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("synth", help="generate a synthetic two-domain dataset")
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distort", default=",".join(DISTORTIONS))
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="nearest-centroid evaluation of embeddings")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train-set", type=int)
    p.add_argument("--test-set", type=int)
    p.add_argument("--metric", default="kappa,accuracy")
    p.add_argument("--output")
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    rep = Report(args.command, args)
    try:
        args.func(args, rep)
    except ValidationError as exc:
        rep.finish("invalid", args.report, exc)
        return 2
    except NumericalError as exc:
        if isinstance(exc, NoConvergence):
            rep.data["diagnostics"]["no_convergence"] = {
                "stage": getattr(exc, "stage", None),
                "iterations": exc.iterations,
                "grad_norm": exc.grad_norm,
            }
        rep.finish("numerical_failure", args.report, exc)
        return 3
    except OSError as exc:
        rep.finish("invalid", args.report, exc)
        return 2
    rep.finish("ok", args.report)
    return 0


if __name__ == "__main__":
    sys.exit(main())

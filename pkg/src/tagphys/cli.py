"""Command-line entry point: ``tagphys <command> ...``.

Exit status: 0 success, 1 domain error, 2 I/O or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clothsim import ClothSpec, SimConfig, export_trajectory, load_trajectory, simulate
from .dataset import load_t2p, save_t2p, stratified_split
from .errors import SchemaError, TagPhysError
from .forest import (
    PUBLISHED_HYPERPARAMS,
    Forest,
    SearchSpace,
    default_search_space,
    fit_forest,
    normalized_mae,
    randomized_search,
)
from .metrics import (
    categorical_scores,
    continuous_error,
    geometry_sequence_scores,
    material_set_score,
    percentage_error,
)
from .params import FOREST_GROUPS, PHYSICS_COLUMNS, PhysicsParams
from .physmap import (
    ParamBounds,
    PredictConfig,
    default_bounds,
    fallback_bounds,
    physics_document,
    predict_physics,
    sample_random_physics,
)
from .presets import PRESETS
from .retrieval import select_mode_cv
from .tagparse import STRUCTURES, FabricAttributes, default_vocabulary, parse_tag

CONFIG_ENV = "TAGPHYS_CONFIG"
BUILTIN_CONFIG = {
    "friction": 0.3,
    "internal_damping": 1.0,
    "dt_mode": "mean",
    "dt_tol": 2.0,
    "bounds_margin": 0.10,
    "seed": 0,
}
ATTRIBUTE_KEYS = {"id", "composition", "family", "structure", "density_gsm", "thickness_mm"}


class UsageError(Exception):
    pass


def _echo(args, msg):
    if not getattr(args, "quiet", False):
        print(msg)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def load_config(path=None) -> dict:
    """Built-in defaults overlaid by the config file (``--config`` or $TAGPHYS_CONFIG)."""
    cfg = dict(BUILTIN_CONFIG)
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        cfg.update(json.loads(Path(path).read_text(encoding="utf-8")))
    return cfg


def _merged(args, cfg, key, flag=None):
    value = getattr(args, flag or key, None)
    return cfg[key] if value is None else value


def _load_dataset(path):
    path = Path(path)
    return load_t2p(path, "json" if path.suffix.lower() == ".json" else "csv")


def _read_json(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}") from None


def parse_attribute_document(doc: dict, strict: bool = False, vocab=None) -> tuple[str | None, FabricAttributes]:
    """(id, attributes) from one garment attribute object."""
    if not isinstance(doc, dict):
        raise SchemaError("attribute document must be a JSON object")
    if strict:
        extra = sorted(set(doc) - ATTRIBUTE_KEYS)
        if extra:
            raise SchemaError(f"unknown keys {extra}")
    for key in ("composition", "family", "structure"):
        if key not in doc:
            raise SchemaError(f"attribute document missing {key!r}")
    comp = doc["composition"]
    if isinstance(comp, list):
        comp = ", ".join(f"{c['percent']}% {c['fiber']}" for c in comp)
    attrs = parse_tag(
        comp,
        doc["family"],
        doc["structure"],
        doc.get("density_gsm"),
        doc.get("thickness_mm"),
        vocab,
    )
    return doc.get("id"), attrs


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    ds = load_t2p(args.input, args.format)
    out = Path(args.out)
    fmt = "csv" if out.suffix.lower() == ".csv" else "json"
    save_t2p(ds, out, fmt)
    _echo(args, f"ingested {len(ds)} records (vocabulary {ds.vocab_fingerprint}) -> {out}")
    return 0


def _groups(arg) -> list[str]:
    if arg in (None, "all"):
        return list(FOREST_GROUPS)
    groups = [g.strip() for g in arg.split(",") if g.strip()]
    unknown = [g for g in groups if g not in FOREST_GROUPS]
    if unknown:
        raise UsageError(f"unknown groups {unknown}; choose from {list(FOREST_GROUPS)}")
    return groups


def cmd_train(args) -> int:
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    ds = _load_dataset(args.dataset)
    train, val, test = stratified_split(ds, seed=args.seed, key=args.split_key)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    space = SearchSpace.load(args.space) if args.space else None
    manifest = {"vocab_fingerprint": ds.vocab_fingerprint, "seed": args.seed, "search": args.search, "groups": {}}
    search_reports = {}
    rows = []
    for group in _groups(args.groups):
        if args.search == "random":
            hp, report = randomized_search(
                train, group, space or default_search_space(), args.iters, args.folds, args.seed, args.split_key
            )
            search_reports[group] = report.to_dict()
        else:
            hp = PUBLISHED_HYPERPARAMS[group]
        cols = FOREST_GROUPS[group]
        forest = fit_forest(train.features(), train.targets(group), hp, args.seed, cols, ds.vocab_fingerprint, group)
        fname = f"forest_{group}.json"
        forest.save(out / fname)
        scale = np.ptp(train.targets(group), axis=0)
        scores = {}
        for name, part in (("val", val), ("test", test)):
            if len(part):
                y = part.targets(group)
                p = forest.predict(part.features())
                scores[name] = {"mae": float(np.mean(np.abs(y - p))), "nmae": normalized_mae(y, p, scale)}
        manifest["groups"][group] = {"file": fname, "hyperparams": hp.to_dict(), "scores": scores}
        rows.append((group, scores.get("val", {}).get("nmae"), scores.get("test", {}).get("nmae")))
    manifest["split"] = {"train": len(train), "val": len(val), "test": len(test)}
    (out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
    if search_reports:
        (out / "search_report.json").write_text(_dump(search_reports), encoding="utf-8")
    _echo(args, f"{'group':<20}{'val NMAE':>12}{'test NMAE':>12}")
    for g, v, t in rows:
        fmt = lambda x: f"{x:12.4f}" if x is not None else f"{'-':>12}"  # noqa: E731
        _echo(args, f"{g:<20}{fmt(v)}{fmt(t)}")
    return 0


def load_models(models_dir, vocab_fingerprint=None) -> dict:
    models_dir = Path(models_dir)
    manifest_path = models_dir / "manifest.json"
    files = (
        {g: models_dir / e["file"] for g, e in json.loads(manifest_path.read_text())["groups"].items()}
        if manifest_path.exists()
        else {g: models_dir / f"forest_{g}.json" for g in FOREST_GROUPS}
    )
    return {g: Forest.load(p, vocab_fingerprint) for g, p in files.items()}


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    ds = _load_dataset(args.dataset)
    models = load_models(args.models, ds.vocab_fingerprint)
    config = PredictConfig(
        friction=float(cfg["friction"]),
        internal_damping=float(cfg["internal_damping"]),
        dt_mode=_merged(args, cfg, "dt_mode"),
        dt_tol=float(_merged(args, cfg, "dt_tol")),
        seed=int(_merged(args, cfg, "seed")),
        bounds_margin=float(cfg["bounds_margin"]),
    )
    raw = _read_json(args.attrs)
    single = isinstance(raw, dict)
    docs = [raw] if single else raw
    out = []
    for i, doc in enumerate(docs):
        gid, attrs = parse_attribute_document(doc, args.strict, ds.vocab)
        pred = predict_physics(attrs, models, ds, config)
        out.append(physics_document(attrs, pred, gid or f"garment-{i}"))
    Path(args.out).write_text(_dump(out[0] if single else out), encoding="utf-8")
    _echo(args, f"wrote {len(out)} parameter set(s) -> {args.out}")
    return 0


def _attr_rows(path):
    raw = _read_json(path)
    return [raw] if isinstance(raw, dict) else raw


def evaluate_attributes(gt_docs, pred_docs) -> dict:
    vocab = default_vocabulary()
    gt = [parse_attribute_document(d, vocab=vocab)[1] for d in gt_docs]
    pred = [parse_attribute_document(d, vocab=vocab)[1] for d in pred_docs]
    mat = material_set_score([g.composition for g in gt], [p.composition for p in pred])
    pct = percentage_error([g.composition for g in gt], [p.composition for p in pred])
    s_acc, s_f1 = categorical_scores([g.structure for g in gt], [p.structure for p in pred], STRUCTURES)
    f_acc, f_f1 = categorical_scores([g.family for g in gt], [p.family for p in pred], vocab.families)
    report = {
        "n": len(gt),
        "material": {"accuracy": mat.accuracy, "f1": mat.f1},
        "percentage": {"mae": pct.mae, "nmae": pct.nmae},
        "structure": {"accuracy": s_acc, "macro_f1": s_f1},
        "family": {"accuracy": f_acc, "macro_f1": f_f1},
        "per_example": [
            {"index": i, "tp": tp, "fp": fp, "fn": fn} for i, (tp, fp, fn) in enumerate(mat.per_example)
        ],
    }
    for name in ("density", "thickness"):
        pairs = [(getattr(g, name), getattr(p, name)) for g, p in zip(gt, pred)]
        pairs = [(a, b) for a, b in pairs if a is not None and b is not None]
        if pairs:
            mae, nmae = continuous_error([a for a, _ in pairs], [b for _, b in pairs])
            report[name] = {"mae": mae, "nmae": nmae, "n": len(pairs)}
    return report


def evaluate_physics(gt_docs, pred_docs) -> dict:
    if len(gt_docs) != len(pred_docs):
        raise SchemaError(f"{len(gt_docs)} ground-truth vs {len(pred_docs)} predicted records")
    gt = [PhysicsParams.from_flat(d).to_flat() for d in gt_docs]
    pred = [PhysicsParams.from_flat(d).to_flat() for d in pred_docs]
    cols = {}
    for c in PHYSICS_COLUMNS:
        mae, nmae = continuous_error([g[c] for g in gt], [p[c] for p in pred])
        cols[c] = {"mae": mae, "nmae": nmae}
    defined = [v["nmae"] for v in cols.values() if v["nmae"] is not None]
    return {"n": len(gt), "columns": cols, "mean_nmae": float(np.mean(defined)) if defined else None}


def _physics_rows(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open(encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    return _attr_rows(path)


def _flatten(report: dict, prefix="") -> dict:
    flat = {}
    for k, v in report.items():
        if isinstance(v, dict):
            flat.update(_flatten(v, f"{prefix}{k}."))
        elif not isinstance(v, list):
            flat[f"{prefix}{k}"] = v
    return flat


def cmd_evaluate(args) -> int:
    if args.kind == "attributes":
        gt, pred = _attr_rows(args.gt), _attr_rows(args.pred)
        if len(gt) != len(pred):
            raise SchemaError(f"{len(gt)} ground-truth vs {len(pred)} predicted garments")
        report = evaluate_attributes(gt, pred)
    elif args.kind == "physics":
        report = evaluate_physics(_physics_rows(args.gt), _physics_rows(args.pred))
    else:
        a, b = load_trajectory(args.gt), load_trajectory(args.pred)
        if len(a) != len(b):
            raise SchemaError(f"frame count mismatch: {len(a)} vs {len(b)}")
        report = geometry_sequence_scores(
            [(p, a.faces) for p in a.positions], [(p, b.faces) for p in b.positions], args.voxel
        )
    report["kind"] = args.kind
    Path(args.out).write_text(_dump(report), encoding="utf-8")
    if args.csv:
        buf = io.StringIO()
        if args.kind == "geometry":
            writer = csv.DictWriter(buf, fieldnames=["frame", "chamfer", "chamfer_x1e4", "iou"], lineterminator="\n")
            writer.writeheader()
            writer.writerows(report["per_frame"])
        else:
            flat = _flatten(report)
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["metric", "value"])
            writer.writerows(flat.items())
        Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
    _echo(args, f"{args.kind} evaluation -> {args.out}")
    return 0


def load_scenario(path) -> tuple[ClothSpec, PhysicsParams, SimConfig, float]:
    path = Path(path)
    doc = _read_json(path)
    spec = ClothSpec.from_dict(doc.get("cloth", {}))
    config = SimConfig.from_dict(doc.get("config", {}))
    if "params" in doc:
        params = PhysicsParams.from_flat(doc["params"])
    elif "params_preset" in doc:
        try:
            params = PRESETS[doc["params_preset"]]
        except KeyError:
            raise SchemaError(f"unknown preset {doc['params_preset']!r}; choose from {sorted(PRESETS)}") from None
    elif "params_file" in doc:
        pdoc = _read_json(path.parent / doc["params_file"])
        params = PhysicsParams.from_flat(pdoc[0] if isinstance(pdoc, list) else pdoc)
    else:
        raise SchemaError("scenario needs 'params', 'params_preset' or 'params_file'")
    return spec, params, config, float(doc.get("duration", 3.0))


def cmd_simulate(args) -> int:
    spec, params, config, duration = load_scenario(args.scenario)
    if args.duration is not None:
        duration = args.duration
    traj = simulate(spec, params, config, duration)
    written = export_trajectory(traj, args.out, args.format)
    _echo(args, f"simulated {len(traj)} frames -> {args.out} ({len(written)} file(s))")
    return 0


def cmd_crossval(args) -> int:
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    ds = _load_dataset(args.dataset)
    mode, mode_report = select_mode_cv(ds, args.folds, args.seed, args.dt_tol)
    report = {"density_thickness_mode": mode_report.to_dict(), "search": {}}
    if args.iters > 0:
        space = SearchSpace.load(args.space) if args.space else default_search_space()
        for group in _groups(args.groups):
            _, sr = randomized_search(ds, group, space, args.iters, args.folds, args.seed)
            report["search"][group] = sr.to_dict()
    Path(args.out).write_text(_dump(report), encoding="utf-8")
    _echo(args, f"selected density/thickness mode: {mode.value}")
    for m, v in mode_report.mae.items():
        _echo(args, f"  {m:<8}{v:.6f}")
    return 0


def cmd_baseline(args) -> int:
    if args.bounds:
        bounds = ParamBounds.from_dict(_read_json(args.bounds))
    elif args.bounds_from:
        cfg = load_config(args.config)
        bounds = default_bounds(_load_dataset(args.bounds_from), float(cfg["bounds_margin"]))
    else:
        bounds = fallback_bounds()
    samples = [sample_random_physics(bounds, args.seed + i).to_flat() for i in range(args.count)]
    Path(args.out).write_text(_dump(samples[0] if args.count == 1 else samples), encoding="utf-8")
    _echo(args, f"sampled {args.count} random parameter set(s) -> {args.out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tagphys", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tagphys {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--quiet", action="store_true", help="suppress summaries on stdout")
        sp.set_defaults(func=fn)
        return sp

    sp = add("ingest", cmd_ingest, "validate a dataset file and write its canonical form")
    sp.add_argument("--input", required=True)
    sp.add_argument("--format", choices=["csv", "json"], default=None)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "fit the five parameter-group forests")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--groups", default="all")
    sp.add_argument("--search", choices=["fixed", "random"], default="fixed")
    sp.add_argument("--space", help="search-space JSON (random search)")
    sp.add_argument("--iters", type=int, default=50)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split-key", default="structure")
    sp.add_argument("--out", required=True)

    sp = add("predict", cmd_predict, "predict simulator parameters for garment attributes")
    sp.add_argument("--models", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--attrs", required=True)
    sp.add_argument("--dt-mode", dest="dt_mode", choices=["mean", "median", "random", "cv"], default=None)
    sp.add_argument("--dt-tol", dest="dt_tol", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--config")
    sp.add_argument("--strict", action="store_true", help="reject unknown keys in attribute documents")
    sp.add_argument("--out", required=True)

    sp = add("evaluate", cmd_evaluate, "score predictions against ground truth")
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--kind", choices=["attributes", "physics", "geometry"], required=True)
    sp.add_argument("--voxel", type=float, default=50.0, help="voxel edge in mesh units (mm)")
    sp.add_argument("--csv", help="also write a flat CSV")
    sp.add_argument("--out", required=True)

    sp = add("simulate", cmd_simulate, "run a drape scenario and export frames")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--duration", type=float)
    sp.add_argument("--format", choices=["obj-sequence", "json"], default="obj-sequence")
    sp.add_argument("--out", required=True)

    sp = add("crossval", cmd_crossval, "density/thickness mode selection and hyperparameter search")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--iters", type=int, default=50)
    sp.add_argument("--groups", default="all")
    sp.add_argument("--space")
    sp.add_argument("--dt-tol", dest="dt_tol", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("baseline", cmd_baseline, "sample random parameters within simulator bounds")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--bounds-from", dest="bounds_from", help="dataset whose range defines the bounds")
    src.add_argument("--bounds", help="bounds JSON {column: [lower, upper]}")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except TagPhysError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

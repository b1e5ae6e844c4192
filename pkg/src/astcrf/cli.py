"""Command line: extract, split, train, predict, baseline, evaluate, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .datasets import load_dataset, load_many, save_dataset
from .edits import EditScriptError, load_edit_script
from .estimator import BaselineRanker, TransformCRF
from .evaluation import PrepareReport, evaluate, prepare_dataset, split_dataset
from .inference import InferenceError
from .learner import TrainConfig, TrainingError
from .model import Model
from .synthetic import generate
from .transforms import labeling_stats
from .trees import AstParseError, insert_virtual_roots, parse_ast_document

log = logging.getLogger("astcrf")


class CliError(Exception):
    pass


def _write_json(obj, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _stats_table(stats) -> str:
    rows = stats.as_rows()
    width = max(len(n) for n, _ in rows)
    return "\n".join(f"{n:<{width}}  {c:>8}" for n, c in rows)


def cmd_extract(args) -> None:
    scripts = []
    for p in args.scripts:
        try:
            scripts.append(load_edit_script(p))
        except (EditScriptError, AstParseError, OSError) as exc:
            if args.strict:
                raise CliError(f"{p}: {exc}") from exc
            log.warning("%s: skipped: %s", p, exc)
    report = PrepareReport()
    data = prepare_dataset(scripts, args.threshold, report)
    save_dataset(args.output, data)
    stats = labeling_stats(data)
    print(_stats_table(stats))
    print(f"kept {report.kept} of {len(scripts)} scripts "
          f"({len(report.over_threshold)} over threshold, {len(report.conflicts)} conflicts, "
          f"{len(report.no_transform)} without transforms, {len(report.failures)} failures)")
    if args.stats:
        _write_json({"counts": dict(stats.as_rows()), "report": vars(report)}, args.stats)


def cmd_split(args) -> None:
    data = load_dataset(args.dataset)
    train, test = split_dataset(data, args.per_transform, args.multiple, args.seed)
    save_dataset(args.train, train)
    save_dataset(args.test, test)
    print(f"train {len(train)}  test {len(test)}")


def _load_manifest(path: Path):
    if path.suffix == ".jsonl":
        return [path], {}
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "train" not in doc:
        raise CliError(f"{path}: manifest needs a 'train' list")
    files = [path.parent / f for f in doc["train"]]
    return files, dict(doc.get("config") or {})


def cmd_train(args) -> None:
    files, config = _load_manifest(Path(args.manifest))
    for key, flag in (("q", args.q), ("delta2", args.delta2), ("G", args.iters)):
        if flag is not None:
            config[key] = flag
    unknown = set(config) - {"q", "delta2", "G", "lbfgs_history", "grad_tol"}
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = TrainConfig(**config)
    data = load_many(files)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def on_iter(rec):
        if log_fh:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
    try:
        est = TransformCRF(delta2=cfg.delta2, q=cfg.q, G=cfg.G, lbfgs_history=cfg.lbfgs_history,
                           grad_tol=cfg.grad_tol).fit(data, callback=on_iter)
    finally:
        if log_fh:
            log_fh.close()
    est.save(args.output)
    print(f"trained on {len(data)} examples: {est.n_features_} features, "
          f"{len(est.train_log_)} iterations, objective {est.objective_:.6f}")


def _read_ast(path):
    return insert_virtual_roots(parse_ast_document(Path(path).read_bytes(), str(path)))


def cmd_predict(args) -> None:
    est = TransformCRF.load(args.model)
    out = []
    for path in args.asts:
        ranked = est.rank(_read_ast(path), args.k)
        out.append({"ast": str(path), "predictions": [
            {"rank": i, "probability": p, "labels": {str(k): v for k, v in lab.labels.items()}}
            for i, (lab, p) in enumerate(ranked, start=1)]})
    _write_json(out if len(out) != 1 else out[0], args.output)


def cmd_baseline(args) -> None:
    if args.rank:
        est = BaselineRanker.load(args.rank)
        out = [{"ast": str(p), "predictions": [
            {"rank": i, "labels": {str(k): v for k, v in lab.labels.items()}}
            for i, lab in enumerate(est.rank(_read_ast(p), args.k), start=1)]}
            for p in args.inputs]
        _write_json(out if len(out) != 1 else out[0], args.output)
        return
    if not args.output or args.output == "-":
        raise CliError("baseline training needs --output")
    est = BaselineRanker().fit(load_many(args.inputs))
    est.save(args.output)
    print(f"baseline with {len(est.baseline_.tuples)} (label, transform) pairs")


def cmd_evaluate(args) -> None:
    if bool(args.model) == bool(args.baseline):
        raise CliError("give exactly one of --model or --baseline")
    est = TransformCRF.load(args.model) if args.model else BaselineRanker.load(args.baseline)
    test = load_many(args.test)
    ks = sorted(set(args.k))
    report = evaluate(test, est.rank, ks)
    print(report.format_table())
    if args.report:
        _write_json(report.to_obj(), args.report)


def cmd_synth(args) -> None:
    data = generate(args.per_rule, args.joint, args.seed, args.noise)
    save_dataset(args.output, data)
    print(_stats_table(labeling_stats(data)))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="astcrf", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="edit scripts -> labeled dataset and statistics")
    p.add_argument("scripts", nargs="+")
    p.add_argument("-o", "--output", required=True, help="dataset file (.jsonl)")
    p.add_argument("--threshold", type=int, default=10, help="max root edit operations")
    p.add_argument("--stats", help="write statistics as JSON")
    p.add_argument("--strict", action="store_true", help="fail on unreadable scripts")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("split", help="seeded train/test split")
    p.add_argument("dataset")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--per-transform", type=int, default=300)
    p.add_argument("--multiple", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="manifest (or .jsonl dataset) -> model file")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--delta2", type=float)
    p.add_argument("--iters", type=int, help="max gradient evaluations G")
    p.add_argument("--log", help="training log (.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="ranked labelings for AST files")
    p.add_argument("model")
    p.add_argument("asts", nargs="+")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("baseline", help="fit the frequency baseline, or rank with it")
    p.add_argument("inputs", nargs="+", help="training datasets, or AST files with --rank")
    p.add_argument("--rank", metavar="BASELINE", help="rank ASTs with this baseline file")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="top-k exact-match accuracy on a test set")
    p.add_argument("test", nargs="+")
    p.add_argument("--model")
    p.add_argument("--baseline")
    p.add_argument("--k", type=int, nargs="+", default=[1, 3])
    p.add_argument("--report", help="write the report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted rules")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--per-rule", type=int, default=375)
    p.add_argument("--joint", type=int, default=150)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", UserWarning)
    try:
        args.func(args)
    except (CliError, EditScriptError, AstParseError, InferenceError, TrainingError,
            ValueError, KeyError, OSError) as exc:
        print(f"astcrf: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

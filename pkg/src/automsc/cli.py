"""Command-line workflow: train, predict, evaluate, crossval, sweep, serve.

Every command is deterministic given its flags (seeded randomness only) and
writes outputs atomically: files are staged under temporary names and renamed
only after the whole command succeeded, so failures leave no partial output.
Exit codes are per error family: 2 usage, 3 I/O, 4 data format, 5 training,
6 model file/application, 7 evaluation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import classifier, corpus, evaluation, features
from .classifier import Hyperparams
from .errors import (
    DataFormatError,
    DuplicateKey,
    EvaluationError,
    ModelError,
    NoReferences,
    TrainingError,
)
from .features import EmptyCorpus

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_TRAIN = 5
EXIT_MODEL = 6
EXIT_EVAL = 7


class _Staging:
    """Two-phase output writer: stage to temp names, rename on commit."""

    def __init__(self) -> None:
        self._pairs: list[tuple[Path, Path]] = []

    def stage(self, final: str | Path) -> Path:
        final = Path(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.parent / f".{final.name}.tmp{os.getpid()}"
        self._pairs.append((tmp, final))
        return tmp

    def commit(self) -> None:
        for tmp, final in self._pairs:
            os.replace(tmp, final)
        self._pairs.clear()

    def abort(self) -> None:
        for tmp, _ in self._pairs:
            tmp.unlink(missing_ok=True)
        self._pairs.clear()


@contextmanager
def staged_outputs():
    staging = _Staging()
    try:
        yield staging
    except BaseException:
        staging.abort()
        raise
    staging.commit()


def _add_hyperparam_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tolerance", type=float, default=1e-4, help="gradient max-norm stopping tolerance")
    parser.add_argument("--reg-c", type=float, default=1.0, help="inverse regularization strength C")
    parser.add_argument("--max-iter", type=int, default=100, help="quasi-Newton iteration budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="automsc",
        description="Coarse-grained primary MSC subject classification toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on an article corpus")
    p.add_argument("--corpus", required=True, type=Path, help="article CSV")
    p.add_argument("--model", required=True, type=Path, help="output model file")
    p.add_argument("--variant", default="titer", choices=sorted(features.VARIANTS))
    p.add_argument("--strip-math", action="store_true", help="remove TeX math before tokenizing")
    _add_hyperparam_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write prediction CSV for a corpus")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--model", type=Path, help="model file (omit with --ref1)")
    p.add_argument("--predictions", required=True, type=Path, help="output CSV")
    p.add_argument("--ref1", action="store_true", help="reference majority-vote baseline instead of a model")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score prediction CSVs against a gold corpus")
    p.add_argument("--corpus", required=True, type=Path, help="gold article CSV")
    p.add_argument("--predictions", required=True, type=Path, nargs="+", help="prediction CSV(s)")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--min-class-size", type=int, default=evaluation.DEFAULT_MIN_CLASS_SIZE)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="stratified k-fold cross-validation")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output report file")
    p.add_argument("--variant", default="titer", choices=sorted(features.VARIANTS))
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-class-size", type=int, default=1)
    p.add_argument("--strip-math", action="store_true")
    _add_hyperparam_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="automation/precision trade-off across thresholds")
    p.add_argument("--corpus", required=True, type=Path, help="gold article CSV")
    p.add_argument("--predictions", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output CSV")
    p.add_argument("--threshold", type=float, default=0.5, help="extra threshold to include")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the classification HTTP service")
    p.add_argument("--model", type=Path, help="model file (or AUTOMSC_MODEL env var)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--assets", type=Path, help="static UI directory to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_train(args) -> None:
    articles = corpus.read_articles(args.corpus)
    v = features.variant(args.variant)
    h = Hyperparams(tolerance=args.tolerance, regularization_c=args.reg_c, max_iterations=args.max_iter)
    model = classifier.train_variant(articles, v, h, strip_formulas=args.strip_math)
    with staged_outputs() as staging:
        classifier.save_model(model, staging.stage(args.model))
    md = model.metadata
    print(
        f"trained {v.id}: {model.n_classes} classes, |V|={model.dim}, "
        f"{md['n_iterations']} iterations, grad max-norm {md['final_grad_max_norm']:.3e}, "
        f"converged={md['converged']}"
    )


def cmd_predict(args) -> None:
    articles = corpus.read_articles(args.corpus)
    if args.ref1:
        preds, skipped = [], 0
        for a in articles:
            try:
                preds.append(classifier.ref1_vote(a))
            except NoReferences:
                skipped += 1
        if skipped:
            logger.warning("ref1: no reference codes for %d articles; rows omitted", skipped)
        print(f"ref1: {len(preds)} predictions written, {skipped} skipped")
    else:
        if args.model is None:
            raise ValueError("--model is required unless --ref1 is given")
        model = classifier.load_model(args.model)
        preds = [classifier.predict(model, a) for a in articles]
        print(f"{model.method_id.strip()}: {len(preds)} predictions written")
    with staged_outputs() as staging:
        corpus.write_predictions(preds, staging.stage(args.predictions))


def cmd_evaluate(args) -> None:
    articles = corpus.read_articles(args.corpus)
    truth = {a.de: a.primary_subject for a in articles}
    by_method: dict[str, list[corpus.PredictionRecord]] = {}
    seen_keys: set[tuple[int, str, int]] = set()
    for path in args.predictions:
        for rec in corpus.read_predictions(path):
            if rec.key in seen_keys:
                raise DuplicateKey(f"duplicate (de, method, pos) {rec.key} across prediction files")
            seen_keys.add(rec.key)
            by_method.setdefault(rec.method, []).append(rec)
    if not by_method:
        raise ValueError("no prediction rows found")

    rows = []
    with staged_outputs() as staging:
        for method in sorted(by_method):
            preds = by_method[method]
            report = evaluation.evaluate_predictions(preds, truth, args.min_class_size, method=method)
            slug = method.strip() or "method"
            evaluation.write_report(report, staging.stage(args.out / f"report_{slug}.txt"))
            evaluation.write_confusion_csv(
                report.confusion, staging.stage(args.out / f"confusion_{slug}.csv")
            )
            if all(p.score is not None for p in preds):
                points = evaluation.pr_curve(preds, truth)
                evaluation.write_pr_curve_csv(points, staging.stage(args.out / f"pr_curve_{slug}.csv"))
            else:
                logger.info("method %r has rows without scores; PR curve skipped", method)
            rows.append((slug, report.weighted))
            w = report.weighted
            print(f"{slug}: p={w.precision:.3f} r={w.recall:.3f} f={w.f1:.3f} (k={report.k_effective})")
        evaluation.write_comparison_csv(rows, staging.stage(args.out / "comparison.csv"))


def cmd_crossval(args) -> None:
    if args.folds < 2:
        raise ValueError(f"--folds must be >= 2, got {args.folds}")
    articles = corpus.read_articles(args.corpus)
    v = features.variant(args.variant)
    h = Hyperparams(tolerance=args.tolerance, regularization_c=args.reg_c, max_iterations=args.max_iter)
    result = evaluation.kfold_cv(
        articles,
        args.folds,
        v,
        h,
        args.seed,
        min_class_size=args.min_class_size,
        strip_formulas=args.strip_math,
    )
    lines = [
        f"variant: {v.id}",
        f"folds: {args.folds}",
        f"seed: {args.seed}",
        f"min_class_size: {args.min_class_size}",
        "",
        "fold,f",
    ]
    lines += [f"{i},{f:.6f}" for i, f in enumerate(result.per_fold)]
    lines += ["", f"mean_f: {result.mean_f:.6f}", f"std_f: {result.std_f:.6f}"]
    with staged_outputs() as staging:
        staging.stage(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"cv {v.id}: mean f={result.mean_f:.6f} std={result.std_f:.6f} ({args.folds} folds, seed {args.seed})")


def cmd_sweep(args) -> None:
    articles = corpus.read_articles(args.corpus)
    truth = {a.de: a.primary_subject for a in articles}
    preds = corpus.read_predictions(args.predictions)
    if not preds:
        raise ValueError(f"prediction file {args.predictions} has no rows")
    thresholds = sorted({round(0.05 * i, 2) for i in range(21)} | {args.threshold})
    reports = [evaluation.threshold_analysis(preds, truth, t) for t in thresholds]
    with staged_outputs() as staging:
        evaluation.write_threshold_csv(reports, staging.stage(args.out))
    at = evaluation.threshold_analysis(preds, truth, args.threshold)
    print(
        f"threshold {args.threshold:.2f}: automation {at.automation_rate:.3f} "
        f"({at.n_automated}/{len(preds)}), precision {at.precision_automated:.3f}"
    )


def cmd_serve(args) -> None:
    from . import service

    model_path = args.model or os.environ.get("AUTOMSC_MODEL")
    if not model_path:
        raise ValueError("provide --model or set AUTOMSC_MODEL")
    model = classifier.load_model(model_path)
    app = service.create_app(model, assets_dir=args.assets)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=os.environ.get("AUTOMSC_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, EmptyCorpus) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

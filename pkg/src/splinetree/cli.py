"""Command-line workflow: simulate, fit, predict, evaluate, diagnose, export.

Exit codes: 0 success, 2 argument error, 3 data error, 4 numerical failure.
All randomness flows from explicit --seed flags; identical invocations
produce identical output bytes.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import basis, diagnostics, io, simdata, tree
from .errors import DataError, NumericalError, SplineTreeError


def _add_data_arguments(parser):
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--response", help="surrogate response column (default from model)")
    parser.add_argument("--original", help="original response column for accuracy metrics")
    parser.add_argument("--categorical", action="append", default=[],
                        help="categorical column (repeatable)")
    parser.add_argument("--features", help="comma-separated model features (default: all)")
    parser.add_argument("--transform", choices=["identity", "logit"], default=None,
                        help="response transform applied on load")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinetree",
        description="Fit and inspect model-based trees on surrogate responses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a benchmark dataset CSV")
    p.add_argument("--kind", choices=["f1", "f2"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="grow, prune, and save a tree")
    _add_data_arguments(p)
    p.add_argument("--out", required=True, help="output tree JSON")
    p.add_argument("--config", help="flat key=value defaults file")
    p.add_argument("--knots", type=int, default=None)
    p.add_argument("--num-bins", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=None)
    p.add_argument("--lambda", dest="lam", default=None,
                   help="ridge weight, or comma-separated grid selected by GCV")
    p.add_argument("--loss", choices=["gcv", "sse"], default=None)
    p.add_argument("--r2-threshold", type=float, default=None)
    p.add_argument("--dsse-fraction", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None,
                   help="optional L1 refit weight for leaf models")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--tag-column", default=None,
                   help="column with train/test markers instead of a random split")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--task", choices=["continuous", "binary"], default=None,
                   help="accuracy metric family (default: binary iff transform is logit)")

    p = sub.add_parser("predict", help="write predictions for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="fidelity/accuracy metrics on a dataset")
    p.add_argument("--model", required=True)
    _add_data_arguments(p)
    p.add_argument("--task", choices=["continuous", "binary"], default=None)

    p = sub.add_parser("diagnose", help="write importance/contribution/curve CSVs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("export", help="render the tree structure")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=["dot"], default="dot")
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


def _cmd_simulate(args) -> int:
    if args.n < 1:
        print("error: --n must be positive", file=sys.stderr)
        return 2
    if args.sigma < 0:
        print("error: --sigma must be nonnegative", file=sys.stderr)
        return 2
    sim = simdata.simulate(args.kind, args.n, args.sigma, args.seed)
    header = [f"x{k}" for k in range(1, 11)] + ["f", "y"]
    columns = [sim.x[:, k] for k in range(10)] + [sim.f, sim.y]
    io.write_csv(args.out, header, columns)
    return 0


def _config_from_args(args) -> io.RunConfig:
    defaults = io.read_config(args.config) if args.config else {}

    def pick(flag, key, cast, fallback):
        if flag is not None:
            return flag
        if key in defaults:
            return cast(defaults[key])
        return fallback

    lam = pick(args.lam, "lambda", str, 1e-3)
    if isinstance(lam, str):
        parts = [float(v) for v in lam.split(",") if v.strip()]
        lam = parts[0] if len(parts) == 1 else tuple(parts)
    features = pick(args.features, "features", str, None)
    if isinstance(features, str):
        features = tuple(v.strip() for v in features.split(",") if v.strip())
    categorical = tuple(args.categorical) or tuple(
        v.strip() for v in defaults.get("categorical", "").split(",") if v.strip()
    )
    return io.RunConfig(
        features=features,
        categorical=categorical,
        knots=pick(args.knots, "knots", int, 15),
        num_bins=pick(args.num_bins, "num_bins", int, 50),
        max_depth=pick(args.max_depth, "max_depth", int, 5),
        min_samples_leaf=pick(args.min_samples_leaf, "min_samples_leaf", int, None),
        lam=lam,
        loss=pick(args.loss, "loss", str, "gcv"),
        r2_threshold=pick(args.r2_threshold, "r2_threshold", float, 0.99),
        dsse_fraction=pick(args.dsse_fraction, "dsse_fraction", float, 0.02),
        lambda1=pick(args.lambda1, "lambda1", float, None),
        seed=pick(args.seed, "seed", int, 0),
        transform=pick(args.transform, "transform", str, "identity"),
        test_fraction=pick(args.test_fraction, "test_fraction", float, 1 / 3),
        threads=pick(args.threads, "threads", int, 1),
    )


def _load_fit_dataset(args, config: io.RunConfig, response: str):
    continuous = None
    if config.features is not None:
        continuous = [f for f in config.features if f not in config.categorical]
    return io.load_csv(
        args.data,
        response=response,
        continuous=continuous,
        categorical=config.categorical,
        original=args.original,
        tag=getattr(args, "tag_column", None),
        transform=config.transform,
    )


def _train_test_rows(dataset, config: io.RunConfig):
    if dataset.tags is not None:
        train = np.nonzero(dataset.tags == "train")[0]
        test = np.nonzero(dataset.tags == "test")[0]
        if train.size == 0:
            raise DataError("tag column has no 'train' rows")
        return train, test
    n = dataset.n
    if not (0 <= config.test_fraction < 1):
        raise DataError("test_fraction must be in [0, 1)")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_test = int(round(n * config.test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _metric_rows(art, dataset, rows, task):
    part = dataset.subset(rows)
    pred = tree.predict(art.root, art.spec, part)
    fid = diagnostics.fidelity(pred, part.response)
    acc = None
    if part.original is not None:
        acc = diagnostics.accuracy(pred, part.original, task=task)
    return fid, acc


def _print_report(art, dataset, train_rows, test_rows, task):
    n_nodes = sum(1 for _ in art.root.nodes())
    n_leaves = sum(1 for _ in art.root.leaves())
    depth = max(node.depth for node in art.root.nodes())
    print(f"tree: {n_nodes} nodes, {n_leaves} leaves, depth {depth}")
    sections = [("train", train_rows)]
    if test_rows is not None and len(test_rows):
        sections.append(("test", test_rows))

    binary = task == "binary"
    print(f"{'':22s}{'MSE':>12s}{'R2':>12s}")
    for label, rows in sections:
        fid, _ = _metric_rows(art, dataset, rows, task)
        print(f"{'Fidelity':10s}{label:>8s}    {fid.mse:>12.6g}{fid.r2:>12.4f}")
    if dataset.original is not None:
        if binary:
            print(f"{'':22s}{'AUC':>12s}{'log-loss':>12s}")
        for label, rows in sections:
            _, acc = _metric_rows(art, dataset, rows, task)
            if binary:
                print(f"{'Accuracy':10s}{label:>8s}    {acc['auc']:>12.4f}{acc['log_loss']:>12.6g}")
            else:
                print(f"{'Accuracy':10s}{label:>8s}    {acc['mse']:>12.6g}{acc['r2']:>12.4f}")


def _cmd_fit(args) -> int:
    if args.response is None:
        print("error: fit requires --response", file=sys.stderr)
        return 2
    config = _config_from_args(args)
    dataset = _load_fit_dataset(args, config, args.response)
    train_rows, test_rows = _train_test_rows(dataset, config)
    train = dataset.subset(train_rows)
    spec = basis.build_spec(train, num_knots=config.knots)
    grown = tree.grow(train, spec, config.grow_config())
    pruned = tree.prune(grown, config.r2_threshold, config.dsse_fraction)
    if config.lambda1 is not None:
        pruned = tree.refit_l1(pruned, train, spec, config.lambda1)
    saved_config = config.to_json_dict() | {"response": args.response}
    io.save_tree(args.out, pruned, spec, dataset.features, saved_config)

    task = args.task or ("binary" if config.transform == "logit" else "continuous")
    art = io.TreeArtifact(root=pruned, spec=spec, schema=dataset.features, config={})
    _print_report(art, dataset, train_rows, test_rows, task)
    return 0


def _load_feature_dataset(art, path) -> io.SurrogateDataset:
    """Load only the model's feature columns, with a placeholder response."""
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as handle:
        reader = _csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")
    index = {name: k for k, name in enumerate(header)}
    columns = {}
    for feat in art.schema:
        if feat.name not in index:
            raise DataError(f"{path}: missing column {feat.name!r}")
        raw = [row[index[feat.name]] for row in rows]
        if feat.kind == basis.CONTINUOUS:
            try:
                columns[feat.name] = np.array([float(v) for v in raw])
            except ValueError as exc:
                raise DataError(f"{path}: column {feat.name!r}: {exc}") from exc
        else:
            columns[feat.name] = np.array(raw)
    return io.SurrogateDataset(
        features=art.schema, columns=columns, response=np.zeros(len(rows))
    )


def _cmd_predict(args) -> int:
    art = io.load_tree(args.model)
    dataset = _load_feature_dataset(art, args.data)
    pred = tree.predict(art.root, art.spec, dataset)
    io.write_csv(args.out, ["prediction"], [pred])
    return 0


def _cmd_evaluate(args) -> int:
    if args.response is None:
        print("error: evaluate requires --response", file=sys.stderr)
        return 2
    art = io.load_tree(args.model)
    transform = args.transform or art.config.get("transform", "identity")
    categorical = tuple(f.name for f in art.schema if f.kind == basis.CATEGORICAL)
    continuous = [f.name for f in art.schema if f.kind == basis.CONTINUOUS]
    dataset = io.load_csv(
        args.data,
        response=args.response,
        continuous=continuous,
        categorical=categorical,
        original=args.original,
        transform=transform,
    )
    task = args.task or ("binary" if transform == "logit" else "continuous")
    pred = tree.predict(art.root, art.spec, dataset)
    fid = diagnostics.fidelity(pred, dataset.response)
    print(f"fidelity: mse={fid.mse!r} r2={fid.r2!r}")
    if dataset.original is not None:
        acc = diagnostics.accuracy(pred, dataset.original, task=task)
        parts = " ".join(f"{k}={v!r}" for k, v in acc.items())
        print(f"accuracy: {parts}")
    return 0


def _cmd_diagnose(args) -> int:
    art = io.load_tree(args.model)
    dataset = _load_feature_dataset(art, args.data)
    importance = diagnostics.leaf_importance(art.root, art.spec, dataset)
    contributions = [
        diagnostics.split_contribution(art.root, node.id, art.spec, dataset)
        for node in art.root.nodes()
        if not node.is_leaf
    ]
    curves = []
    for leaf in art.root.leaves():
        for block in art.spec.blocks:
            if block.kind == "linear":
                values = dataset.columns[block.feature]
                grid = np.linspace(values.min(), values.max(), 100)
                curves.append(
                    diagnostics.effect_curve(leaf, art.spec, block.feature, grid=grid)
                )
            else:
                curves.append(diagnostics.effect_curve(leaf, art.spec, block.feature))
    paths = io.export_diagnostics(
        args.out_dir, importance=importance, contributions=contributions, curves=curves
    )
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def _cmd_export(args) -> int:
    art = io.load_tree(args.model)
    text = io.export_dot(art.root)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "diagnose": _cmd_diagnose,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except SplineTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

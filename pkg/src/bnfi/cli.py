"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 model/format error, 3 numeric
failure.  Data goes to stdout, diagnostics to stderr; outputs are
byte-identical for identical argv + inputs + seeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import ir, serialize
from .criteria import CriterionId, parse_criterion, score_unit
from .engine.data import SyntheticDatasetCfg, make_dataset
from .engine.forward import accuracy, gaussianity_report, run_forward
from .engine.train import TrainCfg, TrainingDivergedError, train_toy
from .format import format_sig
from .importance import QuadratureConfig
from .models import toy_cnn
from .pruning import apply_plan, layer_context, make_plan, plan_to_json
from .search import SearchCfg, search_all_ratios, sweep


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want code 1
        raise UsageError(message)


def _parse_ratios(text: str) -> list[float]:
    """Either a comma list or start:stop:step (start inclusive, stop
    exclusive of stop + half a step, so the nominal stop survives float
    noise)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad ratio range {text!r}, want start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"bad ratio range {text!r}") from None
        if step <= 0:
            raise UsageError("ratio range step must be positive")
        values = []
        v = start
        while v < stop + step / 2:
            values.append(round(v, 12))
            v += step
        return values
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise UsageError(f"bad ratio list {text!r}") from None


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BNFI_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"BNFI_SEED must be an integer, got {env!r}") from None
    return 0


def _quad(args) -> QuadratureConfig:
    return QuadratureConfig(
        node_count=args.quad_nodes,
        half_width=args.quad_half_width,
        sparse_floor=args.quad_sparse_floor,
    )


def _criterion(args, seed) -> CriterionId:
    try:
        return parse_criterion(args.criterion, seed)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load_model(path: str) -> ir.NetworkIR:
    return serialize.load(path)


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="global seed (falls back to $BNFI_SEED, then 0)")
    p.add_argument("--precision", type=int, default=6,
                   help="significant digits in numeric output (<= 0 for full precision)")
    p.add_argument("--quad-nodes", type=int, default=128)
    p.add_argument("--quad-half-width", type=float, default=8.0)
    p.add_argument("--quad-sparse-floor", type=float, default=1e-12)


def build_parser() -> _Parser:
    parser = _Parser(prog="bnfi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="per-unit importance scores as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--criterion", default="bnfi")
    _add_common(p)

    p = sub.add_parser("prune", help="prune a model and write the result")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--criterion", default="bnfi")
    p.add_argument("--order", choices=("aoi", "doi"), default="aoi")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ratio", type=float, help="uniform pruning ratio")
    g.add_argument("--ratios", help="comma-separated per-unit ratios")
    p.add_argument("--plan-out", help="also write the pruning plan as JSON")
    _add_common(p)

    p = sub.add_parser("sweep", help="accuracy-vs-ratio curves as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--criteria", default="bnfi")
    p.add_argument("--orders", default="aoi,doi")
    p.add_argument("--ratios", required=True,
                   help="comma list, or start:stop:step (start inclusive; values "
                        "continue while below stop plus half a step)")
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("search", help="per-layer pruning-ratio search")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--criterion", default="bnfi")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--lower", type=float, default=0.0)
    p.add_argument("--upper", type=float, default=0.95)
    p.add_argument("--cumulative", action="store_true")
    p.add_argument("--out", help="JSON file (default: stdout)")
    _add_common(p)

    p = sub.add_parser("eval", help="accuracy, parameter and FLOP counts")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--logits", action="store_true", help="print per-sample logits instead")
    _add_common(p)

    p = sub.add_parser("train-toy", help="train a synthetic fixture")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--data-out", required=True, help="training dataset file to write")
    p.add_argument("--val-out", help="validation dataset file to write")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples-per-class", type=int, default=64)
    p.add_argument("--image-size", type=int, default=12)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--noise-std", type=float, default=0.5)
    p.add_argument("--widths", default="10,16")
    p.add_argument("--activation", default="relu",
                   choices=("identity", "relu", "leaky_relu", "swish"))
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    _add_common(p)

    p = sub.add_parser("inspect", help="print the validated structure")
    p.add_argument("--model", required=True)
    _add_common(p)

    p = sub.add_parser("gauss-check", help="normalized-histogram MSE per batch size")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layer", type=int, required=True, help="BN node index")
    p.add_argument("--batch-sizes", default="1,10,100")
    _add_common(p)

    return parser


def _cmd_score(args) -> int:
    seed = _default_seed(args)
    criterion = _criterion(args, seed)
    quad = _quad(args)
    net = _load_model(args.model)
    print("unit,conv_index,channel,score")
    for u, unit in enumerate(ir.prunable_units(net)):
        iv = score_unit(criterion, layer_context(net, unit), quad)
        for c, s in enumerate(iv.scores):
            print(f"{u},{unit.conv_index},{c},{format_sig(s, args.precision)}")
    return 0


def _cmd_prune(args) -> int:
    seed = _default_seed(args)
    criterion = _criterion(args, seed)
    quad = _quad(args)
    order = {"aoi": "ascending", "doi": "descending"}[args.order]
    net = _load_model(args.model)
    units = ir.prunable_units(net)
    if args.ratio is not None:
        ratios = [args.ratio] * len(units)
    else:
        ratios = _parse_ratios(args.ratios)
        if len(ratios) != len(units):
            raise UsageError(f"got {len(ratios)} ratios for {len(units)} prunable units")
    plan = make_plan(net, criterion, ratios, order, quad)
    pruned = apply_plan(net, plan)
    serialize.save(pruned, args.out)
    if args.plan_out:
        with open(args.plan_out, "w") as f:
            f.write(plan_to_json(plan))
    return 0


def _cmd_sweep(args) -> int:
    seed = _default_seed(args)
    quad = _quad(args)
    try:
        criteria = [parse_criterion(c, seed) for c in args.criteria.split(",")]
    except ValueError as e:
        raise UsageError(str(e)) from None
    orders = args.orders.split(",")
    for o in orders:
        if o not in ("aoi", "doi"):
            raise UsageError(f"bad order {o!r}")
    ratios = _parse_ratios(args.ratios)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    net = _load_model(args.model)
    dataset = serialize.load_dataset(args.data)
    report = sweep(net, criteria, orders, ratios, dataset, quad, jobs=args.jobs)
    csv_text = report.to_csv(args.precision)
    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_search(args) -> int:
    seed = _default_seed(args)
    criterion = _criterion(args, seed)
    quad = _quad(args)
    cfg = SearchCfg(
        delta=args.delta,
        iterations=args.iterations,
        lower=args.lower,
        upper=args.upper,
        cumulative=args.cumulative,
    )
    net = _load_model(args.model)
    dataset = serialize.load_dataset(args.data)
    ratios = search_all_ratios(net, criterion, cfg, lambda n: accuracy(n, dataset), quad)
    units = ir.prunable_units(net)
    payload = json.dumps(
        {
            "criterion": args.criterion,
            "delta": args.delta,
            "iterations": args.iterations,
            "units": [u.conv_index for u in units],
            "ratios": ratios,
        },
        indent=2,
    )
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload + "\n")
    else:
        print(payload)
    return 0


def _cmd_eval(args) -> int:
    net = _load_model(args.model)
    dataset = serialize.load_dataset(args.data)
    if args.logits:
        logits = run_forward(net, dataset.inputs, "eval")
        print("sample," + ",".join(f"logit{i}" for i in range(logits.shape[1])))
        for i, row in enumerate(logits):
            print(f"{i}," + ",".join(format_sig(v, args.precision) for v in row))
        return 0
    acc = accuracy(net, dataset)
    print("accuracy,params,params_conv,flops,flops_conv")
    print(
        f"{format_sig(acc, args.precision)},{ir.count_params(net)},"
        f"{ir.count_conv_params(net)},{ir.count_flops(net)},{ir.count_conv_flops(net)}"
    )
    return 0


def _cmd_train_toy(args) -> int:
    seed = _default_seed(args)
    try:
        widths = tuple(int(w) for w in args.widths.split(","))
    except ValueError:
        raise UsageError(f"bad widths {args.widths!r}") from None
    if len(widths) != 2:
        raise UsageError("--widths wants exactly two comma-separated integers")
    data_cfg = SyntheticDatasetCfg(
        num_classes=args.classes,
        samples_per_class=args.samples_per_class,
        image_size=args.image_size,
        channels=args.channels,
        noise_std=args.noise_std,
        seed=seed,
    )
    train_cfg = TrainCfg(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        seed=seed,
    )
    arch = toy_cnn(
        in_channels=args.channels,
        num_classes=args.classes,
        image_size=args.image_size,
        widths=widths,
        activation=args.activation,
        seed=seed,
    )
    trained = train_toy(arch, data_cfg, train_cfg)
    serialize.save(trained, args.out)
    serialize.save_dataset(make_dataset(data_cfg, "train"), args.data_out)
    if args.val_out:
        serialize.save_dataset(make_dataset(data_cfg, "val"), args.val_out)
    train_acc = accuracy(trained, make_dataset(data_cfg, "train"))
    print(f"train_accuracy,{format_sig(train_acc, args.precision)}")
    return 0


def _cmd_inspect(args) -> int:
    net = _load_model(args.model)
    shapes = ir.infer_shapes(net)
    print(f"name: {net.name}")
    print(f"input: {net.input_shape}")
    for i, (node, shape) in enumerate(zip(net.nodes, shapes)):
        desc = type(node).__name__
        if isinstance(node, ir.Conv2d):
            desc += (
                f"(out={node.out_ch}, in={node.in_ch}, k={node.kernel}, "
                f"stride={node.stride}, padding={node.padding}, groups={node.groups})"
            )
        elif isinstance(node, ir.BatchNorm):
            desc += f"(channels={node.channels}, eps={node.eps})"
        elif isinstance(node, ir.Activation):
            desc += f"({node.fn.kind})"
        elif isinstance(node, ir.Pool):
            desc += f"({node.kind}, k={node.kernel}, stride={node.stride})"
        elif isinstance(node, ir.Linear):
            desc += f"(out={node.out_features}, in={node.in_features})"
        print(f"  {i:3d}  {desc}  -> {shape}")
    units = ir.prunable_units(net)
    print(f"prunable units: {[u.conv_index for u in units]}")
    print(
        f"params: {ir.count_params(net)} (conv {ir.count_conv_params(net)}), "
        f"flops: {ir.count_flops(net)} (conv {ir.count_conv_flops(net)})"
    )
    return 0


def _cmd_gauss_check(args) -> int:
    net = _load_model(args.model)
    dataset = serialize.load_dataset(args.data)
    try:
        batch_sizes = [int(b) for b in args.batch_sizes.split(",")]
    except ValueError:
        raise UsageError(f"bad batch sizes {args.batch_sizes!r}") from None
    try:
        table = gaussianity_report(net, dataset, args.layer, batch_sizes)
    except ValueError as e:
        raise UsageError(str(e)) from None
    print("batch_size,mse")
    for b, mse in table:
        print(f"{b},{format_sig(mse, args.precision)}")
    return 0


_COMMANDS = {
    "score": _cmd_score,
    "prune": _cmd_prune,
    "sweep": _cmd_sweep,
    "search": _cmd_search,
    "eval": _cmd_eval,
    "train-toy": _cmd_train_toy,
    "inspect": _cmd_inspect,
    "gauss-check": _cmd_gauss_check,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (serialize.ModelFormatError, ir.InvalidNetworkError) as e:
        print(f"model error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"model error: {e}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, FloatingPointError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

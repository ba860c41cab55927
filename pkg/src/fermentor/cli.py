"""``fermentor`` command line.

Exit codes: 0 success (``verify``: sound), 1 unsound, 2 soundness unknown,
3 usage, file or data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import data, petri, predictor
from .augment import AugmentError, augment
from .nn import ACTIVATIONS, NetworkError, TrainingError

EXIT_OK, EXIT_UNSOUND, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers ----------------------------------------------------------------------


def _resolve_net(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    try:
        return petri.bundled_net_path(p.name)
    except FileNotFoundError:
        raise UsageError(f"net file not found: {path}") from None


def _load_net(args) -> petri.Net:
    path = _resolve_net(args.net)
    try:
        net = petri.load_net(path)
    except petri.NetSyntaxError as exc:
        raise UsageError(f"{path}:{exc.line}:{exc.column}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if getattr(args, "restore_on_reset", False):
            net = net.replace(restore_on_reset=True)
        if getattr(args, "rewrite_limit", None) is not None:
            net = petri.with_rewrite_limit(net, args.rewrite_limit)
        for spec in getattr(args, "arc_weight", None) or []:
            try:
                ends, w = spec.split("=")
                src, dst = ends.split(":")
                net = petri.with_arc_weight(net, src, dst, int(w))
            except ValueError:
                raise UsageError(f"bad --arc-weight {spec!r}; expected SRC:DST=N") from None
    except petri.PetriError as exc:
        raise UsageError(str(exc)) from None
    return net


def _write(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _emit(text: str, out=None) -> None:
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _samples(path, need_alcohol=True) -> np.ndarray:
    X = data.read_samples(path)
    if need_alcohol and X.shape[1] != 5:
        raise UsageError(f"{path}: an alcohol column is required here")
    if len(X) == 0:
        raise UsageError(f"{path}: no data rows")
    return X


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _config_block(cfg: dict) -> str:
    return "".join(f"# {k} = {cfg[k]}\n" for k in sorted(cfg))


# -- commands ---------------------------------------------------------------------


def cmd_verify(args, cfg) -> int:
    net = _load_net(args)
    report = petri.analyze(net, cfg["budget"])
    if args.dot:
        _write(args.dot, petri.export_dot(report.graph, net.name))
    if cfg["report"] == "json":
        out = report.to_dict(timing=cfg["timing"])
        out["config"] = cfg
        sys.stdout.write(_dumps(out))
    else:
        sys.stdout.write(_verify_text(report, cfg))
    return report.exit_code


def _verify_text(report, cfg) -> str:
    lines = [f"net {report.net}"]
    wf = report.workflow
    if wf.is_workflow:
        lines.append(f"workflow: start {wf.start_place}, end {wf.end_place}, "
                     f"extension {wf.extension_transition or '(added)'}")
    else:
        lines.append("not a workflow net")
    st = report.stats
    if st["truncated"]:
        why = "unbounded place found" if "unbounded" in report.bounds.values() else "state budget reached"
        lines.append(f"states {st['nodes']}, edges {st['edges']} (exploration stopped: {why})")
    else:
        lines.append(f"states {st['nodes']}, edges {st['edges']}")
    if "workflow_nodes" in st:
        lines.append(f"workflow states {st['workflow_nodes']}, edges {st['workflow_edges']}")
    lines.append("bounds: " + ", ".join(f"{p}={b}" for p, b in report.bounds.items()))
    dead = [t for t, v in report.live.items() if v is False]
    unknown = [t for t, v in report.live.items() if v is None]
    lines.append("live: " + ("all transitions" if not dead and not unknown else
                             f"not live {dead}" + (f", unknown {unknown}" if unknown else "")))
    lines.append(f"soundness (direct): {report.sound.status}")
    for v in report.sound.violations:
        lines.append(f"  clause ({v.clause}): {v.message}")
        if v.witness:
            lines.append(f"    witness {json.dumps(v.witness, sort_keys=True)}")
    if report.sound.note:
        lines.append(f"  note: {report.sound.note}")
    lines.append(f"liveness and boundedness of the extension: {report.theorem1.status}")
    if report.theorem1.note:
        lines.append(f"  note: {report.theorem1.note}")
    net = report.graph.net if report.graph is not None else None
    if (report.sound.status == "sound" and report.theorem1.status == "fails" and net is not None
            and net.rewritable_arcs and not net.restore_on_reset):
        lines.append("  note: rewritten arcs stay removed after the extension fires; "
                     "--restore-on-reset refills them for the next cycle")
    if cfg["timing"]:
        lines.append(f"wall time {st['wall_time']:.3f} s")
    return "\n".join(lines) + "\n" + _config_block(cfg)


def cmd_reach(args, cfg) -> int:
    net = _load_net(args)
    graph = petri.explore(net, cfg["budget"])
    counts = f"{len(graph.nodes)} nodes, {len(graph.edges)} edges"
    if graph.truncated:
        counts += " (truncated at budget)"
    target = graph
    if args.compress:
        try:
            target = petri.compress(graph)
        except petri.PetriError as exc:
            raise UsageError(str(exc)) from None
        counts += f"; compressed: {len(target.nodes)} nodes, {len(target.edges)} edges"
    dot = petri.export_dot(target, net.name)
    if args.dot:
        _write(args.dot, dot)
        print(counts)
    else:
        sys.stdout.write(dot)
        print(f"// {counts}")
    return EXIT_OK


def cmd_augment(args, cfg) -> int:
    real = _samples(args.data)
    scaler = predictor.fit_scaler(real)
    gcfg = cfgmod.gan_config(cfg)
    got = augment(scaler.scale(real), gcfg)
    raw = scaler.unscale(got.samples)
    extra = None
    if args.emit_provenance:
        extra = {"round": got.round_index, "matched_real": got.matched_real, "mse": got.mse}
    _emit(data.format_samples(raw, extra), args.out)
    stats = {
        "accepted": len(got),
        "target": gcfg.target_count,
        "threshold": gcfg.threshold,
        "acceptance_rate": got.acceptance_rate,
        "rounds": got.round_stats,
        "warning": got.warning,
        "config": cfg,
    }
    if cfg["report"] == "json":
        sys.stderr.write(_dumps(stats))
    else:
        lines = [f"accepted {len(got)} of target {gcfg.target_count} (threshold {gcfg.threshold})"]
        for r in got.round_stats:
            lines.append(f"round {r['round']}: drew {r['drawn']}, kept {r['kept']} "
                         f"(acceptance {r['acceptance_rate']:.3f})")
        sys.stderr.write("\n".join(lines) + "\n")
    if got.warning:
        sys.stderr.write(f"warning: {got.warning}\n")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    train = _samples(args.data)
    fcfg = cfgmod.fcnn_config(cfg)
    scaler = predictor.fit_scaler(train)
    extra = None
    if args.generated:
        gen = _samples(args.generated)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", predictor.RangeWarning)
            extra = scaler.scale(gen)
    model = predictor.train_predictor(train, fcfg, scaler, extra)
    predictor.save_model(model, args.model)
    info = {"model": str(args.model), "epochs": len(model.trace),
            "final_loss": model.trace[-1] if model.trace else None,
            "rows": len(train) + (0 if extra is None else len(extra)), "config": cfg}
    if cfg["report"] == "json":
        sys.stdout.write(_dumps(info))
    else:
        sys.stdout.write(f"trained on {info['rows']} rows for {info['epochs']} epochs, "
                         f"final loss {info['final_loss']!r}; model written to {args.model}\n")
    return EXIT_OK


def _model(path):
    try:
        return predictor.load_model(path)
    except (NetworkError, predictor.PredictorError) as exc:
        raise UsageError(f"cannot load model {path}: {exc}") from None


def cmd_predict(args, cfg) -> int:
    model = _model(args.model)
    if (args.input is None) == (args.data is None):
        raise UsageError("give exactly one of --input C,H,S,A or --data FILE")
    if args.input is not None:
        try:
            q = np.array([[float(x) for x in args.input.split(",")]])
        except ValueError:
            raise UsageError(f"bad --input {args.input!r}") from None
        if q.shape[1] != 4:
            raise UsageError("--input takes exactly 4 values: C,H,S,A")
    else:
        q = _samples(args.data, need_alcohol=False)[:, :4]
    pred = model.predict(q)
    if args.input is not None and not args.out:
        print(repr(float(pred[0])))
    else:
        _emit(data.format_samples(np.column_stack([q, pred])), args.out)
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    model = _model(args.model)
    X = _samples(args.data)
    value = float(np.mean((model.predict(X[:, :4]) - X[:, 4]) ** 2))
    if cfg["report"] == "json":
        sys.stdout.write(_dumps({"mse": value, "rows": len(X), "config": cfg}))
    else:
        print(f"MSE {value!r} over {len(X)} rows")
    return EXIT_OK


def _split_inputs(args, cfg):
    if args.train:
        if not args.test:
            raise UsageError("--train needs --test")
        return _samples(args.train), _samples(args.test)
    if not args.data:
        raise UsageError("give DATA or --train/--test")
    return predictor.split(_samples(args.data), cfg["seed"])


def _write_report(report, args, cfg):
    if args.json:
        _write(args.json, report.to_json())
    if getattr(args, "plot_csv", None):
        _write(args.plot_csv, report.plot_csv())
    if cfg["report"] == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text() + _config_block(cfg))


def cmd_compare(args, cfg) -> int:
    train, test = _split_inputs(args, cfg)
    report = predictor.compare(train, test, cfgmod.compare_config(cfg))
    report.config = cfg | {"resolved": report.config}
    _write_report(report, args, cfg)
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    train, test = _split_inputs(args, cfg)
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else predictor.BENCH_SIZES
    ccfg = cfgmod.compare_config(cfg, sizes)
    models, _ = predictor.fit_all(train, ccfg)
    timings = predictor.time_predictions(models, test[:, :4], sizes) if cfg["timing"] else None
    mse, notes = predictor.evaluate_all(models, test, models["FCNN"].scaler)
    report = predictor.ExperimentReport(mse, list(sizes), timings, len(train), len(test),
                                        len(models["GAN-prediction"].generated),
                                        cfg | {"resolved": ccfg.to_dict()}, notes)
    _emit(report.plot_csv(), args.out)
    if args.json:
        _write(args.json, report.to_json())
    return EXIT_OK


def cmd_synth(args, cfg) -> int:
    try:
        X = data.synth(args.n, args.noise, cfg["seed"])
    except data.DataError as exc:
        raise UsageError(str(exc)) from None
    _emit(data.format_samples(X), args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="global seed (env FERMENTOR_SEED)")
    common.add_argument("--report", choices=["text", "json"], help="report format")
    common.add_argument("--no-timing", action="store_true",
                        help="omit wall-clock numbers so repeated runs give identical output")

    p = _Parser(prog="fermentor", description="Workflow verification and fermentation yield prediction.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def net_cmd(name, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("net", help="net file (bundled nets are found by file name)")
        s.add_argument("--budget", type=int, help="state budget for exploration")
        s.add_argument("--restore-on-reset", action="store_true",
                       help="refill rewrite budgets when the extension returns to the initial marking")
        s.add_argument("--rewrite-limit", type=int, help="override every rewritable arc's limit")
        s.add_argument("--arc-weight", action="append", metavar="SRC:DST=N", help="override one arc weight")
        s.add_argument("--dot", help="write the reachability graph as DOT")
        return s

    net_cmd("verify", "bounds, liveness and soundness of a workflow net").set_defaults(func=cmd_verify)
    s = net_cmd("reach", "reachability graph as DOT, optionally compressed")
    s.add_argument("--compress", action="store_true")
    s.set_defaults(func=cmd_reach)

    s = sub.add_parser("augment", parents=[common], help="grow a sample set with the MSE-filtered GAN")
    s.add_argument("data")
    s.add_argument("--target", type=int)
    s.add_argument("--threshold", type=float)
    s.add_argument("--rounds", type=int)
    s.add_argument("--epochs", type=int, help="adversarial epochs per round")
    s.add_argument("--jitter", type=float)
    s.add_argument("--emit-provenance", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_augment)

    def fcnn_flags(s):
        s.add_argument("--arch")
        s.add_argument("--epochs", type=int)
        s.add_argument("--lr", type=float)
        s.add_argument("--batch-size", type=int)
        s.add_argument("--loss-threshold", type=float)
        s.add_argument("--no-batch-norm", dest="batch_norm", action="store_false", default=None,
                       help="drop batch normalization from hidden layers")
        s.add_argument("--output-activation", choices=ACTIVATIONS,
                       help="output activation (default tanh01)")

    s = sub.add_parser("train", parents=[common], help="train the FCNN predictor")
    s.add_argument("data")
    s.add_argument("--model", required=True)
    s.add_argument("--generated", help="extra (augmented) samples to train on")
    fcnn_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="predict alcohol with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--input", metavar="C,H,S,A")
    s.add_argument("--data")
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", parents=[common], help="MSE of a model on a labelled file")
    s.add_argument("data")
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_evaluate)

    for name, func, help_ in (("compare", cmd_compare, "FCNN vs MLR vs GAN-prediction"),
                              ("bench", cmd_bench, "prediction time over dataset sizes")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("data", nargs="?", help="labelled samples, split 4:3")
        s.add_argument("--train")
        s.add_argument("--test")
        s.add_argument("--scaler", choices=["train", "all"])
        s.add_argument("--fcnn-data", choices=["augmented", "real"])
        s.add_argument("--k", type=int)
        s.add_argument("--target", type=int, help="augmentation target count")
        s.add_argument("--json", help="also write the report JSON here")
        fcnn_flags(s)
        if name == "compare":
            s.add_argument("--plot-csv")
        else:
            s.add_argument("--sizes", help="comma-separated dataset sizes")
            s.add_argument("--out", help="plot-data CSV (default: stdout)")
        s.set_defaults(func=func)

    s = sub.add_parser("synth", parents=[common], help="synthetic samples from the documented fixture")
    s.add_argument("--n", type=int, default=34)
    s.add_argument("--noise", type=float, default=data.SYNTH_NOISE)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)
    return p


_FLAG_KEYS = {
    "seed": "seed", "report": "report", "budget": "budget",
    "target": "gan.target_count", "threshold": "gan.threshold", "rounds": "gan.rounds",
    "jitter": "gan.jitter", "arch": "fcnn.arch", "lr": "fcnn.learning_rate",
    "batch_size": "fcnn.batch_size", "loss_threshold": "fcnn.loss_threshold",
    "batch_norm": "fcnn.batch_norm", "output_activation": "fcnn.output",
    "scaler": "predict.scaler", "fcnn_data": "predict.fcnn_data", "k": "predict.k",
}


def _flags(args) -> dict:
    out = {key: getattr(args, attr) for attr, key in _FLAG_KEYS.items() if hasattr(args, attr)}
    if hasattr(args, "epochs"):
        out["gan.adversarial_epochs" if args.command == "augment" else "fcnn.max_epochs"] = args.epochs
    if args.no_timing:
        out["timing"] = False
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = cfgmod.merge(args.config, _flags(args))
        cfg["command"] = args.command
        return args.func(args, cfg)
    except (UsageError, cfgmod.ConfigError, data.DataError, predictor.PredictorError,
            AugmentError, TrainingError, NetworkError) as exc:
        sys.stderr.write(f"fermentor: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

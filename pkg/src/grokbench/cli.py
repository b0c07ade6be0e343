"""Command-line experiment runner.

Every subcommand takes ``--config FILE`` (flat ``key=value`` lines) and
``--key value`` overrides. The resolved configuration is written back to
``config.txt`` in the output directory so a run can be repeated with
``--config <out>/config.txt``.
"""

import argparse
import glob
import logging
import os
from pathlib import Path
import platform
import sys

import numpy as np
import scipy

from . import __version__
from . import io
from . import svg
from .dataset import ModTask, encode_multitask, make_dataset
from .fma import (
    FmaModel,
    encoder_singular_values,
    fma_table_check,
    lowrank_build,
    lowrank_predict,
    theorem1_addition_variant,
    theorem1_build,
    theorem1_verify,
)
from .kernel import KernelSpec, fit, predict
from .linalg import SingularKernelError
from .measures import (
    circulant_deviation,
    dlog_reorder,
    find_generator,
    off_diagonal_block,
)
from .nnet import DivergenceError, TrainConfig, init, train
from .rfm import (
    RfmConfig,
    RfmError,
    enforce_circulant,
    evaluate,
    random_circulant_M,
    rfm_run,
    transform_inputs,
)

log = logging.getLogger("grokbench")

EXIT_USAGE = 2
EXIT_NUMERIC = 3

_TASK = dict(op="add", p=61, fraction=0.5, seed=0)
_KERNEL = dict(kernel="quadratic", bandwidth=2.5, iters=30, power=0.5, normalize_m=False)
_ADAMW = dict(optimizer="adamw", lr=1e-3, weight_decay=1.0, agop_reg=0.0,
              batch_size=32, epochs=50, width=1024)
_SGD = dict(optimizer="sgd", lr=1.0, weight_decay=1e-5, agop_reg=1e-3,
            batch_size=128, epochs=100, width=512, fraction=0.4)

DEFAULTS = {
    "rfm": {**_TASK, **_KERNEL, "snapshots": "all"},
    "rfm-multitask": {**_TASK, **_KERNEL, "op": "add", "op2": "sumsq", "fraction": 0.8,
                      "kernel": "gaussian", "snapshots": "final"},
    "random-circulant": {**_TASK, "kernel": "gaussian", "bandwidth": 2.5, "kind": "circulant",
                         "c1": 1.0, "c2": ""},
    "enforce-circulant": {**_TASK, **_KERNEL, "p": 97, "kernel": "gaussian", "snapshots": "final"},
    "nn": {**_TASK, **_ADAMW, "snapshots": "final"},
    "nn-ablate-reg": {**_TASK, **_SGD},
    "fma-verify": {"p": 5, "n_random": 100, "seed": 0, "tol": 1e-8},
    "reorder": {"matrix": "", "p": 61},
    "sweep": {**_TASK, **_KERNEL, "fractions": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8"},
    "plot": {"history": "", "matrices": "", "hide_diagonal": False},
}
COMMON = {"out": "", "log_level": "warning"}


class ConfigError(ValueError):
    pass


def _coerce(key, raw, default):
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}") from None
    return raw


def resolve(cmd, file_cfg, overrides, environ=None):
    """Merge defaults, config file and flag overrides into a typed config."""
    environ = os.environ if environ is None else environ
    defaults = {**DEFAULTS[cmd], **COMMON}
    for k in file_cfg:
        if k not in defaults:
            raise ConfigError(f"unknown config key {k!r} for {cmd}")
    cfg = dict(defaults)
    seed_given = "seed" in file_cfg or overrides.get("seed") is not None
    for source in (file_cfg, {k: v for k, v in overrides.items() if v is not None}):
        for k, v in source.items():
            cfg[k] = _coerce(k, v, defaults[k])
    if "seed" in defaults and not seed_given and environ.get("GROKBENCH_SEED"):
        cfg["seed"] = _coerce("GROKBENCH_SEED", environ["GROKBENCH_SEED"], 0)
    if not cfg["out"]:
        cfg["out"] = os.path.join("runs", cmd)
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(prog="grokbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    for cmd, defaults in DEFAULTS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", default=None, help="flat key=value file")
        for key, val in {**defaults, **COMMON}.items():
            sp.add_argument(f"--{key}", dest=key, default=None, metavar=type(val).__name__.upper(),
                            help=f"default: {val}")
    return parser


def _meta(cfg, cmd, **extra):
    meta = {"command": cmd, "grokbench": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}
    meta.update(extra)
    return meta


def _write_run(out, cfg, cmd, **extra):
    io.write_config(out / "config.txt", {k: v for k, v in cfg.items() if k != "out"})
    io.write_config(out / "run.txt", _meta(cfg, cmd, **extra))


def _kernel(cfg):
    return KernelSpec(cfg["kernel"], cfg["bandwidth"]) if cfg["kernel"] == "gaussian" \
        else KernelSpec(cfg["kernel"])


def _save_snapshots(out, mats, mode, prefix="M"):
    if mode == "none":
        return
    items = list(enumerate(mats))
    if mode == "final":
        items = items[-1:]
    elif mode != "all":
        raise ConfigError(f"invalid value {mode!r} for key 'snapshots'")
    for t, A in items:
        io.save_matrix(out / f"{prefix}_{t}.csv", A)


def _summary(history):
    last = history[-1]
    return f"final train_acc={last.train_acc:.4f} test_acc={last.test_acc:.4f} test_loss={last.test_loss:.6g}"


def cmd_rfm(cfg, out):
    data = make_dataset(ModTask(cfg["op"], cfg["p"]), cfg["fraction"], cfg["seed"])
    res = rfm_run(data, RfmConfig(_kernel(cfg), cfg["iters"], cfg["power"], cfg["seed"],
                                  cfg["normalize_m"]))
    io.write_history(out / "history.csv", res.history)
    _save_snapshots(out, res.snapshots, cfg["snapshots"])
    _write_run(out, cfg, "rfm", jitter_fired=res.jitter_fired)
    print(_summary(res.history))


def cmd_rfm_multitask(cfg, out):
    p = cfg["p"]
    data = encode_multitask(ModTask(cfg["op"], p), ModTask(cfg["op2"], p), cfg["fraction"], cfg["seed"])
    res = rfm_run(data, RfmConfig(_kernel(cfg), cfg["iters"], cfg["power"], cfg["seed"],
                                  cfg["normalize_m"]))
    io.write_history(out / "history.csv", res.history, multitask=True)
    _save_snapshots(out, res.snapshots, cfg["snapshots"])
    _write_run(out, cfg, "rfm-multitask", jitter_fired=res.jitter_fired)
    last = res.history[-1]
    print(_summary(res.history) + f" task0_acc={last.task0_acc:.4f} task1_acc={last.task1_acc:.4f}")


def cmd_random_circulant(cfg, out):
    p, op = cfg["p"], cfg["op"]
    data = make_dataset(ModTask(op, p), cfg["fraction"], cfg["seed"])
    # Empty c2 means the default -1/p.
    c2 = _coerce("c2", cfg["c2"], 0.0) if cfg["c2"] else None
    Mstar = random_circulant_M(p, cfg["seed"], cfg["c1"], c2, cfg["kind"], op)
    spec = _kernel(cfg)
    eye = np.eye(2 * p)
    rows = []
    for name, Xt in (("identity", data.X), ("circulant", transform_inputs(Mstar, data.X))):
        d2 = data.with_inputs(Xt)
        km = fit(spec, eye, d2.X_train, d2.Y_train)
        rec = evaluate(predict(km, d2.X_train), d2.Y_train, predict(km, d2.X_test), d2.Y_test, 1, d2)
        rows.append((name, rec))
        print(f"{name}: train_acc={rec.train_acc:.4f} test_acc={rec.test_acc:.4f} test_loss={rec.test_loss:.6g}")
    io.write_history(out / "history.csv", [rows[1][1]])
    io.write_history(out / "baseline_history.csv", [rows[0][1]])
    io.save_matrix(out / "M_star.csv", Mstar)
    _write_run(out, cfg, "random-circulant")


def cmd_enforce_circulant(cfg, out):
    data = make_dataset(ModTask(cfg["op"], cfg["p"]), cfg["fraction"], cfg["seed"])
    res = rfm_run(data, RfmConfig(_kernel(cfg), cfg["iters"], cfg["power"], cfg["seed"],
                                  cfg["normalize_m"], enforce=True))
    io.write_history(out / "history.csv", res.enforced_history)
    io.write_history(out / "plain_history.csv", res.history)
    _save_snapshots(out, [enforce_circulant(M, cfg["p"]) for M in res.snapshots[:-1]],
                    cfg["snapshots"])
    _write_run(out, cfg, "enforce-circulant", jitter_fired=res.jitter_fired)
    print("enforced " + _summary(res.enforced_history))
    print("plain    " + _summary(res.history))


def _train_config(cfg, **over):
    keys = ("optimizer", "lr", "weight_decay", "agop_reg", "batch_size", "epochs", "width", "seed")
    return TrainConfig(**{**{k: cfg[k] for k in keys}, **over})


def _write_nfa(path, history):
    with open(path, "w") as fh:
        fh.write("iter,nfa_correlation\n")
        for rec in history:
            fh.write(f"{rec.iter},{rec.nfa_correlation:.17g}\n")


def cmd_nn(cfg, out):
    data = make_dataset(ModTask(cfg["op"], cfg["p"]), cfg["fraction"], cfg["seed"])
    tc = _train_config(cfg)
    net = init(data.X.shape[1], tc.width, data.p, tc.seed)
    res = train(net, data, tc, record_snapshots=cfg["snapshots"] == "all")
    io.write_history(out / "history.csv", res.history)
    _write_nfa(out / "nfa.csv", res.history)
    _save_snapshots(out, res.agop_snapshots, cfg["snapshots"], "AGOP")
    nfms = res.nfm_snapshots or [res.net.W1.T @ res.net.W1]
    _save_snapshots(out, nfms, cfg["snapshots"], "NFM")
    _write_run(out, cfg, "nn")
    print(_summary(res.history) + f" nfa_correlation={res.history[-1].nfa_correlation:.4f}")


ABLATION_RUNS = ("none", "weight_decay", "agop")


def ablation_configs(cfg):
    """The three SGD runs: no regularization, weight decay only, AGOP trace only."""
    return {
        "none": _train_config(cfg, weight_decay=0.0, agop_reg=0.0),
        "weight_decay": _train_config(cfg, agop_reg=0.0),
        "agop": _train_config(cfg, weight_decay=0.0),
    }


def cmd_nn_ablate_reg(cfg, out):
    data = make_dataset(ModTask(cfg["op"], cfg["p"]), cfg["fraction"], cfg["seed"])
    lines = ["run,final_train_acc,final_test_acc,final_test_loss"]
    for name, tc in ablation_configs(cfg).items():
        net = init(data.X.shape[1], tc.width, data.p, tc.seed)
        res = train(net, data, tc, record_snapshots=False)
        sub = out / name
        sub.mkdir(parents=True, exist_ok=True)
        io.write_history(sub / "history.csv", res.history)
        last = res.history[-1]
        lines.append(f"{name},{last.train_acc:.17g},{last.test_acc:.17g},{last.test_loss:.17g}")
        print(f"{name}: " + _summary(res.history))
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    _write_run(out, cfg, "nn-ablate-reg")


def cmd_fma_verify(cfg, out):
    p = cfg["p"]
    checks = []
    for ens in (theorem1_build(p), theorem1_addition_variant(p)):
        rep = theorem1_verify(ens, cfg["n_random"], cfg["seed"], cfg["tol"])
        for name, err in rep.checks.items():
            checks.append((f"theorem1_{ens.mode}_{name}", err, err < cfg["tol"]))
        checks.append((f"theorem1_{ens.mode}_offset_identity", rep.ood_offset_err,
                       rep.ood_offset_err < cfg["tol"]))
        checks.append((f"theorem1_{ens.mode}_argmax_agreement", rep.ood_argmax_agree,
                       rep.ood_argmax_agree == 1.0))
        print(f"theorem1 {ens.mode}: lambda={rep.lambda_fit:.12g} ({rep.lambda_match})")
    for mode in ("add", "sub"):
        ok = fma_table_check(FmaModel(p, mode), ModTask(mode, p), cfg["tol"])
        checks.append((f"fma_table_{mode}", 0.0 if ok else 1.0, ok))
    for mode in ("add", "mul"):
        model = lowrank_build(p, mode)
        task = ModTask(mode, p)
        wrong = sum(lowrank_predict(model, a, b) != task.label(a, b) for a in range(p) for b in range(p))
        s = encoder_singular_values(model)
        rank_ok = s[3] > 1e-8 and (len(s) < 5 or s[4] < 1e-10)
        checks.append((f"lowrank_{mode}_errors", float(wrong), wrong == 0))
        checks.append((f"lowrank_{mode}_rank4", float(s[4]) if len(s) > 4 else 0.0, rank_ok))
    lines = ["check,value,passed"]
    for name, val, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} value={val:.3e}")
        lines.append(f"{name},{val:.17g},{int(ok)}")
    (out / "checks.csv").write_text("\n".join(lines) + "\n")
    _write_run(out, cfg, "fma-verify")
    return 0 if all(ok for _, _, ok in checks) else 1


def cmd_reorder(cfg, out):
    if not cfg["matrix"]:
        raise ConfigError("reorder needs --matrix PATH")
    p = cfg["p"]
    A = io.load_matrix(cfg["matrix"])
    block = A if A.shape == (p, p) else off_diagonal_block(A, p)
    if block.shape != (p, p):
        raise ConfigError(f"matrix of shape {A.shape} has no {p}x{p} block")
    gen = find_generator(p)
    re = dlog_reorder(block, gen)
    io.save_matrix(out / "block.csv", block)
    io.save_matrix(out / "block_reordered.csv", re)
    before = circulant_deviation(block[1:, 1:]) if np.any(block[1:, 1:]) else float("nan")
    after = circulant_deviation(re[1:, 1:]) if np.any(re[1:, 1:]) else float("nan")
    _write_run(out, cfg, "reorder", generator=gen.g)
    print(f"generator={gen.g} deviation_before={before:.6g} deviation_after={after:.6g}")


def cmd_sweep(cfg, out):
    task = ModTask(cfg["op"], cfg["p"])
    lines = ["fraction,final_test_acc,final_test_loss"]
    for raw in cfg["fractions"].split(","):
        frac = _coerce("fractions", raw, 0.0)
        data = make_dataset(task, frac, cfg["seed"])
        res = rfm_run(data, RfmConfig(_kernel(cfg), cfg["iters"], cfg["power"], cfg["seed"],
                                      cfg["normalize_m"]))
        io.write_history(out / f"history_{frac:g}.csv", res.history)
        last = res.history[-1]
        lines.append(f"{frac:g},{last.test_acc:.17g},{last.test_loss:.17g}")
        print(f"fraction={frac:g} test_acc={last.test_acc:.4f} test_loss={last.test_loss:.6g}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    _write_run(out, cfg, "sweep")


def cmd_plot(cfg, out):
    if not cfg["history"]:
        raise ConfigError("plot needs --history PATH")
    try:
        hist = io.read_history(cfg["history"])
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    x = hist.get("iter")
    if x is None:
        raise ConfigError("history has no 'iter' column")
    written = 0
    for col, ys in hist.items():
        if col == "iter" or all(np.isnan(ys)):
            continue
        (out / f"{col}.svg").write_text(svg.line_chart(x, ys, col, log_y="loss" in col))
        written += 1
    paths = []
    for pat in filter(None, cfg["matrices"].split(",")):
        paths.extend(sorted(glob.glob(pat)) or [pat])
    for path in paths:
        A = io.load_matrix(path)
        (out / (Path(path).stem + ".svg")).write_text(svg.heatmap(A, cfg["hide_diagonal"]))
        written += 1
    print(f"wrote {written} SVG files to {out}")


COMMANDS = {
    "rfm": cmd_rfm,
    "rfm-multitask": cmd_rfm_multitask,
    "random-circulant": cmd_random_circulant,
    "enforce-circulant": cmd_enforce_circulant,
    "nn": cmd_nn,
    "nn-ablate-reg": cmd_nn_ablate_reg,
    "fma-verify": cmd_fma_verify,
    "reorder": cmd_reorder,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    cmd = args.cmd
    overrides = {k: v for k, v in vars(args).items() if k not in ("cmd", "config")}
    try:
        file_cfg = io.read_config(args.config) if args.config else {}
        cfg = resolve(cmd, file_cfg, overrides)
    except (OSError, ValueError) as exc:
        print(f"grokbench {cmd}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=getattr(logging, str(cfg["log_level"]).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[cmd](cfg, out) or 0
    except ConfigError as exc:
        print(f"grokbench {cmd}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RfmError, SingularKernelError, DivergenceError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"grokbench {cmd}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # Invalid task parameters (non-prime modulus, fraction out of range, ...).
        print(f"grokbench {cmd}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

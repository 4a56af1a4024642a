"""
Command-line entry point: ``prmiso <subcommand> [flags]``.

Subcommands: gen-channels, train, eval, sweep-pilots, sweep-snr, oracle-check.
``--config FILE`` reads ``key=value`` lines (``#`` starts a comment); keys
are flag names without dashes (``snr-db`` or ``snr_db``). Flags given on
the command line win over the file.
"""

import argparse
import logging
import sys

import numpy as np

from .baselines import brute_force_polarization, optimize_polarization_iterative
from .bench import CSV_HEADER, ResultRow, SweepSpec, emit_results, format_row, run_sweep
from .channel import sample_channel, save_channels
from .neural import (TrainConfig, evaluate, load_checkpoint, save_checkpoint, train,
                     write_training_log)
from .numerics import ContractError, DomainError, RngStream

DESK_NT, DESK_TRIALS = 16, 2000
FULL_NT, FULL_TRIALS = 64, 10000

COMMANDS = ("gen-channels", "train", "eval", "sweep-pilots", "sweep-snr", "oracle-check")


def read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="prmiso", description=__doc__.strip().splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--nt", type=int)
    parser.add_argument("--pilots", help="pilot length, or comma list for sweeps")
    parser.add_argument("--snr-db", dest="snr_db", help="SNR in dB, or comma list for sweeps")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--config")
    parser.add_argument("--out")
    parser.add_argument("--checkpoint")
    parser.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    parser.add_argument("--methods", help="comma list from dnn,ls,ls-fixed,pcsi,random")
    parser.add_argument("--steps", type=int, help="training steps (train, or inline dnn training)")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--hidden", help="hidden widths, e.g. 128,128")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--grid-step", dest="grid_step", type=float, help="oracle grid, degrees")
    parser.add_argument("--full-scale", dest="full_scale", action="store_true",
                        help=f"n_t={FULL_NT}, trials={FULL_TRIALS} unless given explicitly")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve(args):
    """Merge config-file values under explicit flags and fill defaults."""
    opts = {k: v for k, v in vars(args).items() if v is not None}
    if args.config:
        for key, value in read_config(args.config).items():
            opts.setdefault(key, value)
    full = str(opts.get("full_scale", False)).lower() in ("1", "true", "yes")
    opts.setdefault("nt", FULL_NT if full else DESK_NT)
    opts.setdefault("trials", FULL_TRIALS if full else DESK_TRIALS)
    opts.setdefault("seed", 0)
    for key in ("nt", "trials", "seed"):
        opts[key] = int(opts[key])
    return opts


def _train_overrides(opts):
    out = {}
    if "batch_size" in opts:
        out["batch_size"] = int(opts["batch_size"])
    if "hidden" in opts:
        out["hidden"] = tuple(_int_list(opts["hidden"]))
    if "lr" in opts:
        out["lr"] = float(opts["lr"])
    return out


def cmd_gen_channels(opts):
    if "out" not in opts:
        raise ContractError("gen-channels needs --out")
    H = sample_channel(RngStream(opts["seed"]), opts["nt"], (opts["trials"],))
    save_channels(opts["out"], H, opts["seed"])
    print(f"wrote {opts['trials']} channels (n_t={opts['nt']}) to {opts['out']}")


def cmd_train(opts):
    if "checkpoint" not in opts:
        raise ContractError("train needs --checkpoint <file> for the trained networks")
    cfg = TrainConfig(opts["nt"], int(opts.get("pilots", 3)), float(opts.get("snr_db", -10)),
                      steps=int(opts.get("steps", 5000)), seed=opts["seed"],
                      **_train_overrides(opts))
    nets = train(cfg, progress_every=max(cfg.steps // 20, 1))
    save_checkpoint(opts["checkpoint"], nets)
    if "out" in opts:
        write_training_log(opts["out"], nets.log)
    tail = np.mean([r[2] for r in nets.log[-100:]]) if nets.log else float("nan")
    print(f"saved {opts['checkpoint']}; final mean gain {tail:.4f}")


def cmd_eval(opts):
    if "checkpoint" not in opts:
        raise ContractError("eval needs --checkpoint <file>")
    nets = load_checkpoint(opts["checkpoint"])
    n_t, L, snr = nets.scenario
    if "snr_db" in opts:
        snr = float(opts["snr_db"])
    res = evaluate(nets, RngStream(opts["seed"]), opts["trials"], (n_t, L, snr))
    row = ResultRow("dnn", n_t, L, snr, res.gain_mean, res.gain_se, res.rate_mean,
                    opts["trials"], opts["seed"])
    if "out" in opts:
        emit_results([row], opts["out"])
    print(CSV_HEADER)
    print(format_row(row))


def _sweep(opts, pilots, snrs):
    methods = opts.get("methods")
    if methods:
        methods = [m.strip() for m in str(methods).split(",") if m.strip()]
    else:
        methods = ["pcsi", "ls", "random"]
        if "checkpoint_dir" in opts or "steps" in opts:
            methods.insert(0, "dnn")
    spec = SweepSpec(n_t=opts["nt"], methods=methods, pilot_lengths=pilots, snr_dbs=snrs,
                     n_trials=opts["trials"], seed=opts["seed"], out=opts.get("out"),
                     checkpoint_dir=opts.get("checkpoint_dir"),
                     train_steps=int(opts.get("steps", 0)),
                     train_overrides=_train_overrides(opts))
    rows = run_sweep(spec)
    if not spec.out:
        print(CSV_HEADER)
        for r in rows:
            print(format_row(r))
    else:
        print(f"wrote {len(rows)} rows to {spec.out}")


def cmd_sweep_pilots(opts):
    snrs = _float_list(opts.get("snr_db", "-10"))
    if len(snrs) != 1:
        raise ContractError("sweep-pilots takes a single --snr-db")
    _sweep(opts, _int_list(opts.get("pilots", "3,4,5,10,20")), snrs)


def cmd_sweep_snr(opts):
    _sweep(opts, _int_list(opts.get("pilots", "3")), _float_list(opts.get("snr_db", "-10,-5,0,5,10")))


def cmd_oracle_check(opts):
    step = float(opts.get("grid_step", 0.25))
    rng = RngStream(opts["seed"])
    worst = 0.0
    for _ in range(opts["trials"]):
        H = sample_channel(rng, opts["nt"])
        it = optimize_polarization_iterative(H).gain_predicted
        bf = brute_force_polarization(H, step).gain_predicted
        worst = max(worst, abs(bf - it) / it)
    print(f"n_t={opts['nt']} trials={opts['trials']} grid={step:g} deg: "
          f"max relative iterative-vs-grid objective deviation {worst:.3e}")


HANDLERS = {"gen-channels": cmd_gen_channels, "train": cmd_train, "eval": cmd_eval,
            "sweep-pilots": cmd_sweep_pilots, "sweep-snr": cmd_sweep_snr,
            "oracle-check": cmd_oracle_check}


def _glue_negative_values(argv):
    # argparse treats "-10,-5" as a flag; bind it to the preceding option
    out = []
    for tok in argv:
        if out and out[-1] in ("--snr-db", "--pilots") and tok[:1] == "-" and tok[1:2].isdigit():
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    argv = _glue_negative_values(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        HANDLERS[args.command](resolve(args))
    except (ContractError, DomainError, ValueError, OSError) as exc:
        print(f"prmiso {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

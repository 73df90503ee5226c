"""Command-line entry point.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime/numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import sys
from pathlib import Path

from .bench import run_bench
from .config import Config, ConfigError, load_config
from .data_io import FtsFormatError, SynthSpec, generate_synthetic, load_dataset, save_dataset
from .episodic import WORKERS_ENV, ablate, episode_stream, evaluate, write_accuracy_csv
from .model import VARIANTS, ModelParams, load_params, save_params
from .objective import train
from .selftest import run_selftest
from .subspace import NumericalError

CSV_HELP = f"""\
CSV files:
  eval/ablate --csv   episode,accuracy_<variant>...   one row per episode
  train --trace       step,l_total                    loss before each update

Environment:
  {WORKERS_ENV}=N     evaluate up to N episodes concurrently (default 1)
"""


def _header(command, config: Config | None = None):
    lines = [f"freqsub {command}",
             f"timestamp={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}"]
    if config is not None:
        lines += config.as_lines()
    return lines


def _add_config_flags(p):
    g = p.add_argument_group("hyperparameters (unset flags fall back to --config, then defaults)")
    g.add_argument("--config", type=Path, help="key=value file; flags win on conflict")
    g.add_argument("--way", type=int)
    g.add_argument("--shot", type=int)
    g.add_argument("--query", type=int)
    g.add_argument("--episodes", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--jitter", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--d-max", type=int)
    g.add_argument("--reduction", type=int)
    g.add_argument("--logit-scale", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--fusion-space", choices=("similarity", "distance"))
    g.add_argument("--spatial-pool", choices=("none", "gap"))
    g.add_argument("--variant", choices=tuple(VARIANTS))


def _config(args, **extra) -> Config:
    keys = ("way", "shot", "query", "episodes", "tau", "lam", "jitter", "epsilon", "d_max",
            "reduction", "logit_scale", "seed", "fusion_space", "spatial_pool", "variant")
    flags = {k: getattr(args, k, None) for k in keys}
    flags.update(extra)
    return load_config(args.config, **flags)


def _params_for(args, config, data):
    channels = data.shape[0]
    if getattr(args, "params", None):
        params = load_params(args.params)
        if params.attention.channels != channels:
            raise ConfigError(f"parameter file is for C={params.attention.channels}, "
                              f"dataset has C={channels}")
        return params
    return ModelParams.init(channels, config.reduction, config.logit_scale, config.seed)


def cmd_gen_synth(args):
    spec = SynthSpec(classes=args.classes, per_class=args.per_class, channels=args.channels,
                     height=args.height, width=args.width, template_scale=args.template_scale,
                     pose_scale=args.pose_scale, noise_scale=args.noise_scale, tau=args.tau,
                     seed=args.seed)
    spec.validate()
    data = generate_synthetic(spec)
    paths = save_dataset(data, args.out, spec)
    lines = _header("gen-synth")
    lines += [f"synth.{k}={getattr(spec, k)!r}" for k in spec.__dataclass_fields__]
    lines += [f"split.{p}={len(c)} classes" for p, c in data.splits.items()]
    lines += [f"wrote={p}" for p in paths]
    return lines


def cmd_eval(args):
    variant = "V0" if args.view == "spatial-only" else args.variant
    config = _config(args, variant=variant)
    data = load_dataset(args.dataset)
    params = _params_for(args, config, data)
    report = evaluate(data, params, config, phase=args.phase, shuffle=args.shuffle_labels)
    lines = _header("eval", config)
    lines += [f"phase={args.phase}", f"view={args.view}", f"shuffle_labels={args.shuffle_labels}",
              f"variant={config.variant}"]
    lines += report.lines()
    if args.csv:
        write_accuracy_csv(args.csv, {config.variant: report})
        lines.append(f"csv={args.csv}")
    return lines


def cmd_train(args):
    config = _config(args, lr=args.lr, steps=args.steps, fd_step=args.fd_step)
    data = load_dataset(args.dataset)
    params = _params_for(args, config, data)
    stream = episode_stream(data, config, args.phase)
    trained, trace = train(stream, params, config)
    save_params(trained, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "l_total"])
            w.writerows([i, repr(v)] for i, v in enumerate(trace))
    lines = _header("train", config)
    lines += [f"phase={args.phase}", f"steps={len(trace)}", f"params={args.out}"]
    if trace:
        lines += [f"loss_first={trace[0]!r}", f"loss_last={trace[-1]!r}"]
    lines += [f"fusion_w={trained.fusion.w.tolist()!r}",
              f"fusion_alpha={trained.fusion.alpha.tolist()!r}",
              f"logit_scale={trained.logit_scale!r}"]
    return lines


def cmd_ablate(args):
    config = _config(args)
    data = load_dataset(args.dataset)
    params = _params_for(args, config, data)
    table = ablate(data, params, config, phase=args.phase, shuffle=args.shuffle_labels)
    lines = _header("ablate", config)
    lines += [f"phase={args.phase}", f"shuffle_labels={args.shuffle_labels}",
              f"{'variant':<8}{'configuration':<36}{'accuracy (%)':>20}"]
    for name, rep in table.items():
        lines.append(f"{name:<8}{VARIANTS[name].label:<36}"
                     f"{f'{100 * rep.mean:.2f} +- {100 * rep.ci95:.2f}':>20}")
    for name, rep in table.items():
        lines += rep.lines(prefix=f"{name}.")
    if args.csv:
        write_accuracy_csv(args.csv, table)
        lines.append(f"csv={args.csv}")
    return lines


def cmd_bench(args):
    config = _config(args)
    rows = run_bench(config, tasks=args.tasks, warmup=args.warmup)
    lines = _header("bench", config)
    lines.append(f"tasks={args.tasks} warmup={args.warmup} "
                 f"task={config.way}-way {config.shot}-shot {config.query} queries/class")
    lines.append(f"{'scale':<8}{'model':<16}{'params':>8}{'time/task ms':>14}"
                 f"{'iqr ms':>9}{'std ms':>9}{'peak MB':>9}")
    for r in rows:
        lines.append(f"{r.scale:<8}{r.model:<16}{r.params:>8d}{r.median_ms:>14.3f}"
                     f"{r.iqr_ms:>9.3f}{r.std_ms:>9.3f}{r.peak_mb:>9.3f}")
    for a, b in zip(rows[::2], rows[1::2]):
        lines.append(f"{a.scale}.overhead_ms={b.median_ms - a.median_ms:.3f}")
    return lines


def cmd_selftest(args):
    results = run_selftest()
    lines = _header("selftest")
    lines += [f"{'PASS' if err is None else 'FAIL'} {name}" + (f": {err}" if err else "")
              for name, err in results]
    failed = [n for n, e in results if e]
    lines.append(f"result={'pass' if not failed else 'fail'} ({len(results) - len(failed)}/{len(results)})")
    return lines, (0 if not failed else 2)


def build_parser():
    parser = argparse.ArgumentParser(prog="freqsub", description=__doc__.splitlines()[0],
                                     epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic base/val/novel benchmark")
    d = SynthSpec()
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--classes", type=int, default=d.classes)
    p.add_argument("--per-class", type=int, default=d.per_class)
    p.add_argument("--channels", type=int, default=d.channels)
    p.add_argument("--height", type=int, default=d.height)
    p.add_argument("--width", type=int, default=d.width)
    p.add_argument("--template-scale", type=float, default=d.template_scale)
    p.add_argument("--pose-scale", type=float, default=d.pose_scale)
    p.add_argument("--noise-scale", type=float, default=d.noise_scale)
    p.add_argument("--tau", type=float, default=d.tau)
    p.add_argument("--seed", type=int, default=d.seed)
    p.set_defaults(func=cmd_gen_synth)

    for name, func, helptext in (("eval", cmd_eval, "episodic evaluation with 95%% CI"),
                                 ("ablate", cmd_ablate, "evaluate variants V0..V3 on one episode stream")):
        p = sub.add_parser(name, help=helptext, epilog=CSV_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("dataset", type=Path, help="dataset directory or single .fts file")
        p.add_argument("--params", type=Path, help="trained parameter file (default: fresh init)")
        p.add_argument("--phase", default="novel", choices=("base", "val", "novel"))
        p.add_argument("--csv", type=Path, help="per-episode accuracy CSV")
        p.add_argument("--shuffle-labels", action="store_true",
                       help="permute query labels per episode (chance-level control)")
        if name == "eval":
            p.add_argument("--view", default="dual", choices=("dual", "spatial-only"))
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("train", help="finite-difference training of attention/fusion/scale")
    p.add_argument("dataset", type=Path)
    p.add_argument("--out", type=Path, required=True, help="parameter file to write")
    p.add_argument("--params", type=Path, help="initial parameters")
    p.add_argument("--phase", default="base", choices=("base", "val", "novel"))
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--trace", type=Path, help="loss trace CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="time/task and peak allocation, V0 vs V3")
    p.add_argument("--tasks", type=int, default=20)
    p.add_argument("--warmup", type=int, default=3)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run built-in oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = args.func(args)
    except (ConfigError, FtsFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    lines, code = out if isinstance(out, tuple) else (out, 0)
    print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())

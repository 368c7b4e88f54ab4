"""Command line entry point: ``chemoflow {run,sweep,verify,inspect}``.

Flags override the matching config keys; ``CHEMOFLOW_OUTPUT_ROOT``
overrides ``output.root`` but loses to ``--output-root``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CheckpointFormatError, ConfigError, DomainError, ParameterError, UnsupportedVersionError

log = logging.getLogger("chemoflow")


def _parse_ladder(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}: {exc}") from exc


def build_parser():
    ap = argparse.ArgumentParser(prog="chemoflow", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("config", type=Path)
        p.add_argument("--output-root", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--cadence", type=int)
        p.add_argument("--override-regime", action="store_true", default=None)
        p.add_argument("--workers", type=int)

    common(sub.add_parser("run", help="run one configuration"))
    sw = sub.add_parser("sweep", help="epsilon sweep from identical initial data")
    common(sw)
    sw.add_argument("--ladder", type=_parse_ladder, required=True, help="comma separated, strictly decreasing")
    common(sub.add_parser("verify", help="run the acceptance suite"))
    ins = sub.add_parser("inspect", help="summarise a checkpoint file")
    ins.add_argument("checkpoint", type=Path)
    return ap


def _apply_flags(raw, args):
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.horizon is not None:
        raw["time"] = {**raw.get("time", {}), "horizon": args.horizon}
    if args.cadence is not None:
        raw["diagnostics"] = {**raw.get("diagnostics", {}), "cadence": args.cadence}
    if args.override_regime:
        raw["override_regime"] = True
    if args.workers is not None:
        raw["workers"] = args.workers
    return raw


def _load(args):
    with open(args.config) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    cfg = harness.parse_config(_apply_flags(raw, args))
    if args.output_root is not None:
        cfg.root_override = str(args.output_root)
    return cfg


def cmd_run(args):
    cfg = _load(args)
    out = harness.run(cfg)
    if out.exit_code == harness.EXIT_OK:
        print(f"ok: t={out.result.state.t:.6g} steps={out.result.state.step} audit={'pass' if out.audit.passed else 'FAIL'}")
        for k, p in out.paths.items():
            print(f"  {k}: {p}")
    else:
        print(f"error: {out.message}", file=sys.stderr)
    return out.exit_code


def cmd_sweep(args):
    cfg = _load(args)
    res = harness.sweep_epsilon(cfg, args.ladder)
    outdir = cfg.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    for eps, st in zip(res.ladder, res.finals):
        if st is not None:
            member = outdir / f"eps_{eps:g}"
            member.mkdir(exist_ok=True)
            save_checkpoint(st, member / cfg.output["checkpoint"], meta={"epsilon": eps, "rng": harness.RNG_ALGORITHM})
    with open(outdir / "sweep.json", "w") as fh:
        json.dump(res.to_dict(), fh, indent=2, default=float)
        fh.write("\n")
    for i, d in enumerate(res.n_l1):
        print(f"eps {res.ladder[i]:g} -> {res.ladder[i + 1]:g}: n L1 {d:.4e}  c L2 {res.c_l2[i]:.4e}  u L2 {res.u_l2[i]:.4e}")
    print(f"trend {'ok' if res.trend_ok else 'VIOLATED'}")
    if res.failures:
        for eps, msg in res.failures.items():
            print(f"member eps={eps:g} failed: {msg}", file=sys.stderr)
        return harness.EXIT_BLOWUP if any("blow-up" in m for m in res.failures.values()) else harness.EXIT_SOLVER
    return harness.EXIT_OK if res.trend_ok else harness.EXIT_VERIFY_FAILED


def cmd_verify(args):
    from .acceptance import AcceptanceSuite

    cfg = _load(args)
    results = AcceptanceSuite(seed=cfg.seed).run()
    outdir = cfg.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "acceptance.json", "w") as fh:
        json.dump([r.__dict__ for r in results], fh, indent=2)
        fh.write("\n")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return harness.EXIT_OK if passed == len(results) else harness.EXIT_VERIFY_FAILED


def cmd_inspect(args):
    state, header = load_checkpoint(args.checkpoint)
    print(f"{args.checkpoint}: version {header['version']}, t={state.t:.6g}, step={state.step}")
    print(f"  grid dims={tuple(header['grid']['dims'])} extents={tuple(header['grid']['extents'])}")
    for f in header["fields"]:
        print(f"  {f['name']:<9} shape={tuple(f['shape'])} bc={f['bc']}")
    vol = state.n.grid.cell_volume
    print(f"  mass={float(np.sum(state.n.data)) * vol:.12g} min n={state.n.data.min():.6g} "
          f"max c={state.c.data.max():.6g} max|u|={state.u.max_abs():.6g}")
    if header.get("meta"):
        print(f"  meta={json.dumps(header['meta'], sort_keys=True)}")
    return harness.EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "inspect": cmd_inspect}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, DomainError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_VALIDATION
    except (CheckpointFormatError, UnsupportedVersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

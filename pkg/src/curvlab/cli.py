"""Command line entry point: ``curvlab <subcommand> [options]``.

Exit status: 0 when the experiment's verdict passes, 1 when it fails, 2 on
invalid input (bad flags, bad config, out-of-domain parameters).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import SUBCOMMANDS, load_config
from .errors import CurvlabError


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON experiment object; flags override its values")
    common.add_argument("--metric", help="hw1(l), hw2(l), constk(k), flat or csv:PATH")
    common.add_argument("--region", type=_floats, help="x0,x1,y0,y1")
    common.add_argument("--k", type=float)
    common.add_argument("--mode", choices=["cbb", "cat"])
    common.add_argument("--dir", dest="direction", choices=["lower", "upper"])
    common.add_argument("--resolution", type=int)
    common.add_argument("--eps", type=_floats, help="comma-separated decreasing schedule")
    common.add_argument("--mollifier", choices=["bump", "wendland"])
    common.add_argument("--bracket", type=_floats, help="k_lo,k_hi")
    common.add_argument("--n-samples", dest="n_samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--task")
    common.add_argument("--p", type=_floats, help="x,y")
    common.add_argument("--q", type=_floats, help="x,y")
    common.add_argument("--v", type=_floats, help="vx,vy")
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--n-starts", dest="n_starts", type=int)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(prog="curvlab", description="Curvature-bound laboratory for low-regularity 2-D metrics.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "example":
            sp.add_argument("example", choices=["hw1", "hw2"])
    return parser


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def main(argv=None) -> int:
    from .experiments import run

    parser = build_parser()
    args = vars(parser.parse_args(argv))
    subcommand = args.pop("subcommand")
    path = args.pop("config")
    try:
        cfg = load_config(path, args)
    except CurvlabError as exc:
        print(f"curvlab: invalid input: {exc}", file=sys.stderr)
        return 2
    try:
        report, status = run(cfg, subcommand)
    except CurvlabError as exc:
        print(f"curvlab {subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    with open(os.path.join(cfg.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, default=_jsonable)
    print(json.dumps({"subcommand": subcommand, "status": report["status"], "out": cfg.out}))
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``conspaste run SCENARIO.json`` and ``conspaste inspect FILE.cvf``.

Exit codes: 0 success, 1 unexpected library error, 2 bad input or
configuration, 3 to 11 one per numerical failure class (see ``errors``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import PasteError
from .io import read_field, read_header
from .grid import ScalarField, norms
from .scenario import load_scenario, plain, run_scenario
from .symplectic import MapPatch

log = logging.getLogger("conspaste")


def _inspect(path) -> dict:
    header, _ = read_header(path)
    obj = read_field(path)
    out = {"header": header}
    if isinstance(obj, MapPatch):
        out["valid_fraction"] = float(obj.valid.mean())
        vals = obj.values[:, obj.valid]
        out["sup"] = float(np.max(np.abs(vals))) if vals.size else None
        return out
    if isinstance(obj, ScalarField):
        out["norms"] = norms(obj).as_dict()
        out["mean"] = float(obj.values.mean())
    else:
        out["norms"] = norms(obj.displacement if hasattr(obj, "displacement") else obj).as_dict()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conspaste", description="Pasting of conservative fields and maps on grids.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a JSON scenario")
    run.add_argument("scenario")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--grid", type=int, help="override the scenario grid size")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    ins = sub.add_parser("inspect", help="print the header and norms of a CVF1 file")
    ins.add_argument("file")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            data = run_scenario(load_scenario(args.scenario), args.out, args.grid, args.seed)
        else:
            data = _inspect(args.file)
    except PasteError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(plain(data), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())

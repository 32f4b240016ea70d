"""Command-line entry point.

    ricsense analyze  --input system.json --perturb perturbation.json --out report.json
    ricsense example  3 [--format text]
    ricsense scaling  --k 1,4,9
    ricsense stability radius --input A.json [--kind discrete]
    ricsense ovf      --coupled --out v.csv

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus, io
from .errors import NumericalError, ValidationError
from .linalg import BlockPartition, as_matrix, matrix_from_json, matrix_to_json
from .riccati import SystemLQ, solve
from .sensitivity import sensitivity_report
from .stability import (
    DEFAULT_SEED,
    coupling_radius_bounds,
    destabilization_check,
    sep,
    sep_sharp,
    stability_radius_continuous,
    stability_radius_discrete,
)

log = logging.getLogger("ricsense")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _seed(args) -> int:
    env = os.environ.get("RICSENSE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"RICSENSE_SEED must be an integer, got {env!r}") from None
    return args.seed


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_perturbation(path: str, sys_: SystemLQ) -> tuple[np.ndarray, BlockPartition]:
    raw = io.load_json(path)
    if isinstance(raw, dict) and "deltaA" in raw:
        dA = matrix_from_json(raw["deltaA"], "deltaA")
        part = BlockPartition.from_json(raw["partition"]) if "partition" in raw else sys_.partition
    else:
        dA = matrix_from_json(raw, "deltaA")
        part = sys_.partition
    if dA.shape != sys_.A.shape:
        raise ValidationError(f"deltaA is {dA.shape[0]}x{dA.shape[1]}, system is {sys_.n}x{sys_.n}")
    part.check(dA)
    return dA, part


def cmd_analyze(args) -> int:
    sys_ = SystemLQ.from_json(io.load_json(args.input))
    dA, part = _load_perturbation(args.perturb, sys_)
    sol = solve(sys_)
    rep = sensitivity_report(sol, dA, part)
    A_cl = sol.A_cl
    out = {
        "time_kind": sys_.time_kind,
        "riccati": {
            "P": matrix_to_json(sol.P),
            "A_cl": matrix_to_json(A_cl),
            "K": matrix_to_json(sol.K),
            "residual": sol.residual,
        },
        "sensitivity": rep.to_json(),
    }
    if sys_.time_kind == "continuous":
        out["sep"] = sep(A_cl, -A_cl.T)
        out["stability_radius"] = stability_radius_continuous(A_cl).to_json(include_witness=False)
        if part.k >= 2:
            out["coupling_radius"] = coupling_radius_bounds(A_cl, part, seed=_seed(args)).to_json()
    else:
        out["sep_sharp"] = sep_sharp(A_cl, A_cl)
        out["stability_radius"] = stability_radius_discrete(A_cl).to_json(include_witness=False)
    out["destabilization"] = destabilization_check(A_cl, dA, sys_.time_kind).to_json()
    _emit(io.dumps(out), args.out)
    return EXIT_OK


def cmd_example(args) -> int:
    rep = corpus.run_example(args.id)
    text = rep.to_text() if args.format == "text" else io.dumps(rep.to_json())
    _emit(text, args.out)
    return EXIT_OK


def cmd_scaling(args) -> int:
    if args.input:
        base = SystemLQ.from_json(io.load_json(args.input))
    else:
        base = SystemLQ([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    rep = corpus.run_scaling(base, args.k)
    _emit(rep.to_text() if args.format == "text" else io.dumps(rep.to_json()), args.out)
    return EXIT_OK


def cmd_stability(args) -> int:
    raw = io.load_json(args.input)
    A = matrix_from_json(raw["A"] if isinstance(raw, dict) and "A" in raw else raw, "A")
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValidationError("stability analysis needs a square matrix")
    cont = args.kind == "continuous"
    if args.what == "sep":
        out = {"kind": args.kind, "sep": sep(A, -A.T) if cont else sep_sharp(A, A)}
    else:
        r = stability_radius_continuous(A) if cont else stability_radius_discrete(A)
        out = r.to_json()
    _emit(io.dumps(out), args.out)
    return EXIT_OK


def cmd_ovf(args) -> int:
    from . import ovf
    from .plots import heatmap_svg

    cells = (args.grid, args.grid)
    controls = (args.controls, args.controls)
    out = Path(args.out) if args.out else None
    if args.coupled is None:
        Vc = ovf.value_iteration(coupled=True, cells=cells, controls=controls)
        Vu = ovf.value_iteration(coupled=False, cells=cells, controls=controls)
        rep = ovf.compare_ovf(Vc, Vu)
        _emit(io.dumps(rep.to_json(include_grids=args.grids)), args.out)
        if out:
            heatmap_svg(Vc, out.with_name(out.stem + "_coupled.svg"), "coupled")
            heatmap_svg(Vu, out.with_name(out.stem + "_uncoupled.svg"), "uncoupled")
        return EXIT_OK
    V = ovf.value_iteration(coupled=args.coupled, cells=cells, controls=controls)
    fmt = args.format or ("csv" if out and out.suffix == ".csv" else "json")
    _emit(V.to_csv() if fmt == "csv" else io.dumps(V.to_json()), args.out)
    if out:
        heatmap_svg(V, out.with_suffix(".svg"), "coupled" if args.coupled else "uncoupled")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ricsense", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=("json", "text")):
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--format", choices=fmt, default=None if "csv" in fmt else "json")

    a = sub.add_parser("analyze", help="sensitivity report for a system and perturbation")
    a.add_argument("--input", required=True)
    a.add_argument("--perturb", required=True)
    common(a, ("json",))
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("example", help="run one of the built-in destabilization examples")
    e.add_argument("id", type=int, choices=corpus.EXAMPLE_IDS)
    common(e)
    e.set_defaults(func=cmd_example)

    s = sub.add_parser("scaling", help="bound growth for k replicated subsystems")
    s.add_argument("--k", type=_int_list, default=[1, 4, 9])
    s.add_argument("--input", help="single-subsystem base system (default scalar a=-1)")
    common(s)
    s.set_defaults(func=cmd_scaling)

    st = sub.add_parser("stability", help="sep or stability radius of a bare matrix")
    st.add_argument("what", choices=("sep", "radius"))
    st.add_argument("--input", required=True)
    st.add_argument("--kind", choices=("continuous", "discrete"), default="continuous")
    common(st, ("json",))
    st.set_defaults(func=cmd_stability)

    o = sub.add_parser("ovf", help="two-reactor value function experiment")
    g = o.add_mutually_exclusive_group()
    g.add_argument("--coupled", dest="coupled", action="store_true", default=None)
    g.add_argument("--uncoupled", dest="coupled", action="store_false")
    o.add_argument("--grid", type=int, default=64)
    o.add_argument("--controls", type=int, default=9)
    o.add_argument("--grids", action="store_true", help="include both grids in the comparison report")
    common(o, ("json", "csv"))
    o.set_defaults(func=cmd_ovf)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"ricsense: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"ricsense: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

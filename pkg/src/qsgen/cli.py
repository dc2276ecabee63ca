"""Command-line front end: generator checks, transforms, evolution and the exclusion example.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on malformed
input or when a resource guard is hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
from threadpoolctl import threadpool_limits

from .cp_analysis import hermitian_map_defect, is_conditionally_cp
from .errors import InputError, OracleDisagreement, ResourceError
from .exclusion import (
    LatticeConfig,
    brk_bound_check,
    build_car,
    car_relation_defects,
    gksl_data,
    lindbladian,
    locality_check,
    structure_map,
)
from .generators import (
    basis_gamma,
    forward_transform,
    from_structure_data,
    gamma_map,
    inner_flow_generator_check,
    inverse_transform,
    is_cp_cocycle_generator,
    noise_vector,
    phi_xy,
    verify_structure_map,
)
from .matrix_space import TruncationSet
from .semigroups import (
    DEFAULT_T_GRID,
    StepFunction,
    cocycle_identity_check,
    contractivity_criterion,
    evolve,
    global_semigroup,
    piecewise_evolution,
)
from .serialize import (
    generator_from_json,
    generator_to_json,
    global_from_json,
    matrix_from_json,
    matrix_to_json,
    structure_data_from_json,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DEFAULT_TOLS = {
    "structure": 1e-10,
    "cocycle": 1e-10,
    "contractivity": 1e-9,
    "inner_flow": 1e-10,
    "cocycle_residual": 1e-10,
    "exclusion": 1e-10,
}
CHECKS = ("structure", "cocycle", "contractivity", "inner-flow")


# --------------------------------------------------------------------------
# parsing helpers


def _positive_float(value: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not np.isfinite(x) or x <= 0:
        raise argparse.ArgumentTypeError("tolerance must be positive and finite")
    return x


def _float_list(value: str) -> tuple:
    try:
        xs = tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None
    if not xs:
        raise argparse.ArgumentTypeError("list must be nonempty")
    if any(not np.isfinite(x) or x < 0 for x in xs):
        raise argparse.ArgumentTypeError("times must be finite and non-negative")
    return xs


def _int_list(value: str) -> tuple:
    try:
        xs = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None
    if not xs:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return xs


def _load_json(path) -> Any:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    try:
        with p.open("r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _vector_arg(text: str | None, d: int) -> np.ndarray:
    if text is None:
        return np.zeros(d, dtype=complex)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"noise vector is not valid JSON: {exc}") from exc
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        arr = arr[:, 0] + 1j * arr[:, 1]
    return noise_vector(arr, d)


def load_generator(obj: dict):
    """Read a stochastic generator or structure data.

    :returns: ``(phi, R or None)``
    """
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    kind = obj.get("kind", "stochastic")
    if kind == "structure_data":
        phi, R, _ = from_structure_data(structure_data_from_json(obj))
        return phi, R
    if kind != "stochastic":
        raise InputError(f"expected a stochastic generator or structure data, got kind {kind!r}")
    phi = generator_from_json(obj)
    R = None
    if "R" in obj:
        R = matrix_from_json(obj["R"])
        if R.shape != (phi.n * (phi.d + 1), phi.n):
            raise InputError(f"R has shape {R.shape}, expected {(phi.n * (phi.d + 1), phi.n)}")
    return phi, R


# --------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot encode {type(x).__name__}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _flatten(obj, prefix: str = "") -> list:
    rows = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            rows += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}[{i}]")
    else:
        rows.append((prefix, obj if not isinstance(obj, list) else json.dumps(obj, default=_jsonable)))
    return rows


def emit(payload: dict, args, header=None, rows=None) -> None:
    """Write ``payload`` as JSON, or ``rows`` (or the flattened payload) as CSV."""
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if rows is None:
            header, rows = ["key", "value"], _flatten(payload)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2, default=_jsonable) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _tol(args, key: str) -> float:
    return args.tol if args.tol is not None else DEFAULT_TOLS[key]


# --------------------------------------------------------------------------
# commands


def cmd_check_generator(args) -> int:
    phi, R = load_generator(_load_json(args.path))
    wanted = CHECKS if args.checks is None else tuple(args.checks.split(","))
    unknown = set(wanted) - set(CHECKS)
    if unknown:
        raise InputError(f"unknown checks {sorted(unknown)}; choose from {list(CHECKS)}")
    checks, tols = {}, {}
    if "structure" in wanted:
        tols["structure"] = _tol(args, "structure")
        rep = verify_structure_map(phi, tols["structure"]).to_dict()
        checks["structure"] = rep
    if "cocycle" in wanted and R is not None:
        tols["cocycle"] = _tol(args, "cocycle")
        rep = is_cp_cocycle_generator(phi, R, tols["cocycle"]).to_dict()
        rep["passed"] = rep["is_cp"]
        checks["cocycle"] = rep
    if "contractivity" in wanted:
        tols["contractivity"] = _tol(args, "contractivity")
        J = TruncationSet.full(phi.d) if args.truncation is None else TruncationSet(phi.d, args.truncation)
        rep = contractivity_criterion(phi, J, args.t_grid, tols["contractivity"]).to_dict()
        rep["truncation"] = list(J.indices)
        rep["passed"] = rep["generator_inequality"] and rep["semigroup_inequality"]
        checks["contractivity"] = rep
    if "inner-flow" in wanted:
        tols["inner_flow"] = _tol(args, "inner_flow")
        checks["inner_flow"] = inner_flow_generator_check(phi, tols["inner_flow"], rng=args.seed).to_dict()
    passed = all(c["passed"] for c in checks.values())
    report = {
        "command": "check-generator",
        "input": str(args.path),
        "n": phi.n,
        "d": phi.d,
        "checks": checks,
        "skipped": ["cocycle"] if "cocycle" in wanted and R is None else [],
        "tolerances": tols,
        "t_grid": list(args.t_grid),
        "passed": passed,
    }
    emit(report, args)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_transform(args) -> int:
    obj = _load_json(args.path)
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    kind = obj.get("kind", "stochastic" if args.direction == "forward" else "global")
    expected = "stochastic" if args.direction == "forward" else "global"
    if kind != expected:
        raise InputError(f"direction {args.direction} needs a {expected} generator, got kind {kind!r}")
    if args.d is not None and int(obj.get("d", -1)) != args.d:
        raise InputError(f"file has noise dimension {obj.get('d')}, but --d is {args.d}")
    if args.direction == "forward":
        out = generator_to_json(forward_transform(generator_from_json(obj)), "global")
    else:
        out = generator_to_json(inverse_transform(global_from_json(obj)), "stochastic")
    emit(out, args)
    return EXIT_OK


def _kernel_rows(t, kernel, prefix=()):
    rows = []
    for (i, j), z in np.ndenumerate(kernel):
        rows.append((t, *prefix, i, j, z.real, z.imag))
    return rows


def cmd_evolve(args) -> int:
    phi, _ = load_generator(_load_json(args.path))
    d = phi.d
    traj, rows = [], []
    report = {"command": "evolve", "mode": args.mode, "input": str(args.path), "n": phi.n, "d": d,
              "t_grid": list(args.t_grid)}
    passed = True
    if args.mode == "assoc":
        x, y = _vector_arg(args.x, d), _vector_arg(args.y, d)
        gen = phi_xy(phi, x, y)
        for t in args.t_grid:
            k = evolve(gen, t).kernel
            traj.append({"t": t, "kernel": matrix_to_json(k)})
            rows += _kernel_rows(t, k)
        report.update({"x": matrix_to_json(x.reshape(1, -1))[0], "y": matrix_to_json(y.reshape(1, -1))[0]})
        header = ["t", "row", "col", "re", "im"]
    elif args.mode == "global":
        gamma = basis_gamma(d) if args.gamma is None else gamma_map(json.loads(args.gamma), d)
        for t in args.t_grid:
            p = global_semigroup(phi, gamma, t)
            traj.append({"t": t, "components": [[matrix_to_json(k) for k in row] for row in p.kernels]})
            for a in range(p.m):
                for b in range(p.m):
                    rows += _kernel_rows(t, p.kernels[a, b], (a, b))
        report["gamma"] = matrix_to_json(gamma)
        header = ["t", "alpha", "beta", "row", "col", "re", "im"]
    else:
        f = _step_arg(args.f, d)
        g = _step_arg(args.g, d)
        tol = _tol(args, "cocycle_residual")
        for t in args.t_grid:
            k = piecewise_evolution(phi, f, g, t).kernel
            traj.append({"t": t, "kernel": matrix_to_json(k)})
            rows += _kernel_rows(t, k)
        residuals = [
            {"r": r, "t": t, "residual": cocycle_identity_check(phi, f, g, r, t)}
            for r in args.split
            for t in args.t_grid
        ]
        passed = all(e["residual"] <= tol for e in residuals)
        report.update({"f": f.to_json(), "g": g.to_json(), "cocycle_residuals": residuals,
                       "tolerances": {"cocycle_residual": tol}, "passed": passed})
        header = ["t", "row", "col", "re", "im"]
    report["trajectory"] = traj
    emit(report, args, header, rows)
    return EXIT_OK if passed else EXIT_FAIL


def _step_arg(path, d: int) -> StepFunction:
    if path is None:
        return StepFunction.constant(np.zeros(d), d)
    return StepFunction.from_json(_load_json(path), d)


def _observables(car, obj: dict) -> list:
    """(label, matrix) pairs; number operators on every site by default."""
    entries = obj.get("observables")
    if entries is None:
        return [(f"n{list(r)}", car.number(r)) for r in car.sites]
    out = []
    try:
        for k, o in enumerate(entries):
            if "number" in o:
                out.append((o.get("label", f"n{list(o['number'])}"), car.number(o["number"])))
            else:
                create = [car.index(r) for r in o.get("create", [])]
                annihilate = [car.index(r) for r in o.get("annihilate", [])]
                out.append((o.get("label", f"obs{k}"), car.monomial(create, annihilate)))
    except (TypeError, KeyError, AttributeError) as exc:
        raise InputError(f"malformed observables: {exc}") from exc
    return out


def _initial_state(car, obj: dict) -> np.ndarray:
    """Basis state e_sigma for the occupied sites (vacuum by default) as a density matrix."""
    occupied = obj.get("initial", {}).get("occupied", [])
    mask = sum(1 << car.index(r) for r in occupied)
    rho = np.zeros((car.dim, car.dim))
    rho[mask, mask] = 1.0
    return rho


def cmd_exclusion(args) -> int:
    obj = _load_json(args.path)
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    config = LatticeConfig.from_json(obj)
    report = {"command": "exclusion", "action": args.action, "input": str(args.path),
              "dim": config.dim, "sites": config.p, "patch_centre": [0] * config.dim}
    if args.action == "brk":
        table = [brk_bound_check(config, n, args.samples, args.seed).to_dict() for n in args.shells]
        passed = all(r["passed"] for r in table)
        report.update({"table": table, "passed": passed})
        header = ["n", "pair_count", "pair_bound", "certified_bound", "M_times_n", "sampled_max", "passed"]
        rows = [(r["n"], r["pair_count"], r["pair_bound"], r["certified_bound"], r["M_times_n"],
                 r["sampled_max"] if r["sampled_max"] is not None else "", r["passed"]) for r in table]
        emit(report, args, header, rows)
        return EXIT_OK if passed else EXIT_FAIL

    car = build_car(config.sites)
    L = lindbladian(car, config)
    if args.action == "evolve":
        rho = _initial_state(car, obj)
        obs = _observables(car, obj)
        traj, rows = [], []
        for t in args.t_grid:
            p = evolve(L, t)
            vals = {}
            for label, a in obs:
                v = complex(np.trace(rho @ p(a)))
                vals[label] = [v.real, v.imag]
                rows.append((t, label, v.real, v.imag))
            traj.append({"t": t, "values": vals})
        report.update({"t_grid": list(args.t_grid), "trajectory": traj})
        emit(report, args, ["t", "observable", "re", "im"], rows)
        return EXIT_OK

    tol = _tol(args, "exclusion")
    car_defects = car_relation_defects(car)
    ident = np.eye(car.dim)
    lind = {
        "unit_defect": float(np.max(np.abs(L(ident)))),
        "hermitian_defect": hermitian_map_defect(L),
        "conditionally_cp": is_conditionally_cp(L, tol),
    }
    lind["passed"] = lind["unit_defect"] <= tol and lind["hermitian_defect"] <= tol and lind["conditionally_cp"]
    phi = structure_map(car, config, args.full_pairs)
    struct = verify_structure_map(phi, tol).to_dict()
    inner = inner_flow_generator_check(phi, tol, rng=args.seed).to_dict()
    cert = {}
    if phi.d > 0:
        _, R, _ = from_structure_data(gksl_data(car, config, args.full_pairs))
        cert = is_cp_cocycle_generator(phi, R, tol).to_dict()
        cert["passed"] = cert["is_cp"]
    locality = [locality_check(car, config, [r]).to_dict() for r in car.sites]
    passed = (
        all(v == 0 for v in car_defects.values())
        and lind["passed"]
        and struct["passed"]
        and inner["passed"]
        and cert.get("passed", True)
        and all(r["passed"] for r in locality)
    )
    report.update({
        "noise_dimension": phi.d,
        "full_pairs": args.full_pairs,
        "car_relations": car_defects,
        "lindbladian": lind,
        "structure_map": struct,
        "inner_flow": inner,
        "cocycle_certificate": cert,
        "locality": locality,
        "assumption_violations": {k: [[list(r), list(s)] for r, s in v]
                                  for k, v in config.assumption_violations().items()},
        "tolerances": {"exclusion": tol},
        "passed": passed,
    })
    emit(report, args)
    return EXIT_OK if passed else EXIT_FAIL


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsgen", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=None, help="override the default tolerances")
    common.add_argument("--t-grid", type=_float_list, default=DEFAULT_T_GRID, help="comma-separated times")
    common.add_argument("--out", default=None, help="write output to this file instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sub-checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-generator", parents=[common], help="run structure, cocycle and contractivity checks")
    p.add_argument("path")
    p.add_argument("--checks", default=None, help=f"comma-separated subset of {','.join(CHECKS)}")
    p.add_argument("--truncation", type=_int_list, default=None, help="selected noise indices of J (default all)")
    p.set_defaults(func=cmd_check_generator)

    p = sub.add_parser("transform", parents=[common], help="forward or inverse component transform")
    p.add_argument("path")
    p.add_argument("--direction", choices=["forward", "inverse"], default="forward")
    p.add_argument("--d", type=int, default=None, help="expected noise dimension")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("evolve", parents=[common], help="semigroup, global semigroup or cocycle trajectories")
    p.add_argument("path")
    p.add_argument("--mode", choices=["assoc", "global", "cocycle"], default="assoc")
    p.add_argument("--x", default=None, help="noise vector x as JSON (assoc mode)")
    p.add_argument("--y", default=None, help="noise vector y as JSON (assoc mode)")
    p.add_argument("--gamma", default=None, help="Gamma values as a JSON (m, d) array (global mode)")
    p.add_argument("--f", default=None, help="step function file for f (cocycle mode)")
    p.add_argument("--g", default=None, help="step function file for g (cocycle mode)")
    p.add_argument("--split", type=_float_list, default=(0.5,), help="split points r for the cocycle residual")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("exclusion", parents=[common], help="lattice exclusion example")
    p.add_argument("path")
    p.add_argument("--action", choices=["validate", "evolve", "brk"], default="validate")
    p.add_argument("--full-pairs", action="store_true", help="index noise by all site pairs")
    p.add_argument("--shells", type=_int_list, default=(1,), help="shell indices n for the bound check")
    p.add_argument("--samples", type=int, default=20, help="random elements for the sampled bound")
    p.set_defaults(func=cmd_exclusion)
    return parser


def _thread_limit():
    value = os.environ.get("QSGEN_THREADS")
    if value is None:
        return None
    try:
        k = int(value)
    except ValueError:
        raise InputError(f"QSGEN_THREADS must be a positive integer, got {value!r}") from None
    if k < 1:
        raise InputError("QSGEN_THREADS must be a positive integer")
    return k


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        limit = _thread_limit()
        with threadpool_limits(limits=limit):
            return args.func(args)
    except (InputError, ResourceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OracleDisagreement as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

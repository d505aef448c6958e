"""Command-line front end.

Four subcommands over a JSON model file (see ``modelfile``):

* ``solve``    — steady state under a given allocation
* ``optimize`` — optimal allocation (closed form, numerical, or lattice oracle)
* ``simulate`` — discrete-event run plus analytic comparison
* ``sweep``    — CSV tables for cost surfaces and parameter sensitivities

Exit codes: 0 success, 1 input error, 2 instability, 3 interior violation
(closed form inapplicable), 4 simulation comparison failed. Every output
carries a metadata block (tool version, config hash, solver options, seed
when stochastic) that pins the result byte-for-byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from ._accel import NUMBA_ENABLED
from .allocate import (
    closed_form_allocation,
    grid_oracle,
    numerical_allocation,
)
from .errors import (
    GChainError,
    InfeasibleError,
    InteriorViolationError,
    ModelFileError,
    NonConvergenceError,
    UnstableError,
)
from .modelfile import ModelFile, load_model
from .simulate import RNG_NAME, compare_to_analytic, simulate, write_histogram_csv
from .supply import Allocation, unit_cost

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSTABLE = 2
EXIT_INTERIOR = 3
EXIT_COMPARISON = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the exit-code contract reserves
    # 2 for instability, so usage errors are remapped to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gchain", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"gchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, metavar="PATH",
                       help="JSON model file")
        p.add_argument("--output", metavar="PATH",
                       help="write results here instead of stdout")

    p_solve = sub.add_parser("solve", help="steady state under a fixed allocation")
    common(p_solve)
    p_solve.add_argument("--allocation", metavar="P1,P2,...",
                         help="override the model file's allocation")
    p_solve.add_argument("--format", choices=("json", "csv"), default="json")

    p_opt = sub.add_parser("optimize", help="cost-minimizing order allocation")
    common(p_opt)
    p_opt.add_argument("--method", choices=("closed", "numerical", "oracle"),
                       default="closed")
    p_opt.add_argument("--resolution", type=int, default=400,
                       help="lattice resolution for --method oracle")

    p_sim = sub.add_parser("simulate", help="discrete-event run + analytic comparison")
    common(p_sim)
    p_sim.add_argument("--seed", type=int, help="override the sim section's seed")

    p_sweep = sub.add_parser("sweep", help="CSV sweeps over allocations or rates")
    common(p_sweep)
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--plane", metavar="Pi,Pj",
                       help="sweep two allocation coordinates (3 warehouses)")
    group.add_argument("--param", metavar="NAME",
                       help="sweep lambda_i, mu_i or P_i (1-based index)")
    p_sweep.add_argument("--range", required=True, metavar="A:B:STEPS",
                         dest="sweep_range", help="inclusive range with point count")
    return parser


def _metadata(model: ModelFile, **extra) -> dict:
    md = {
        "tool": "gchain",
        "version": __version__,
        "config_sha256": hashlib.sha256(model.text.encode("utf-8")).hexdigest(),
        "solver": {
            "tol": model.solver.tol,
            "max_iters": model.solver.max_iters,
            "damping": model.solver.damping,
        },
    }
    md.update(extra)
    return md


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, output) -> None:
    _emit(json.dumps(payload, indent=2) + "\n", output)


def _csv_comments(model: ModelFile, **extra) -> list:
    md = _metadata(model, **extra)
    lines = [f"# tool: gchain {md['version']}", f"# config_sha256: {md['config_sha256']}"]
    for key, value in extra.items():
        lines.append(f"# {key}: {value}")
    return lines


def _parse_allocation(text: str, n: int) -> Allocation:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ModelFileError(f"--allocation: not a comma-separated number list: {text!r}")
    if len(values) != n:
        raise ModelFileError(f"--allocation: expected {n} entries, got {len(values)}")
    try:
        return Allocation(values)
    except ValueError as err:
        raise ModelFileError(f"--allocation: {err}") from None


def _parse_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ModelFileError(f"--range: expected A:B:STEPS, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ModelFileError(f"--range: bad numbers in {text!r}")
    if steps < 0:
        raise ModelFileError("--range: STEPS must be >= 0")
    return np.linspace(lo, hi, steps)


def _cmd_solve(args) -> int:
    model = load_model(args.config)
    if args.allocation is not None:
        alloc = _parse_allocation(args.allocation, model.instance.n)
    elif model.allocation is not None:
        alloc = model.allocation
    else:
        raise ModelFileError("allocation: section missing (pass --allocation or add it)")
    state = unit_cost(model.instance, alloc, model.solver)
    if args.format == "csv":
        lines = _csv_comments(model, unit_cost=repr(state.unit_cost))
        lines.append("warehouse,P,q,expected_sale,purchase_rate")
        for i in range(model.instance.n):
            lines.append(
                f"{i},{float(alloc.P[i])!r},{float(state.q[i])!r},"
                f"{float(state.expected_sale[i])!r},{float(state.purchase_rate[i])!r}"
            )
        _emit("\n".join(lines) + "\n", args.output)
    else:
        _emit_json(
            {
                "metadata": _metadata(model),
                "allocation": alloc.P.tolist(),
                "steady_state": state.to_dict(),
            },
            args.output,
        )
    return EXIT_OK


def _cmd_optimize(args) -> int:
    model = load_model(args.config)
    if args.method == "closed":
        result = closed_form_allocation(model.instance)
    elif args.method == "numerical":
        result = numerical_allocation(model.instance)
    else:
        result = grid_oracle(model.instance, args.resolution)
    extra = {"resolution": args.resolution} if args.method == "oracle" else {}
    _emit_json(
        {"metadata": _metadata(model, **extra), "result": result.to_dict()},
        args.output,
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    model = load_model(args.config)
    try:
        config = model.sim_config(seed=args.seed)
    except (ValueError, TypeError) as err:
        raise ModelFileError(f"sim: {err}") from None
    estimates = simulate(config)
    report = compare_to_analytic(estimates, model.instance, config.allocation)
    payload = {
        "metadata": _metadata(
            model,
            seed=config.seed,
            rng=RNG_NAME,
            accelerated=NUMBA_ENABLED,
        ),
        "estimates": estimates.to_dict(),
        "comparison": report.to_dict(),
    }
    if args.output:
        _emit_json(payload, f"{args.output}.estimates.json")
        write_histogram_csv(estimates, f"{args.output}.hist.csv")
    else:
        _emit_json(payload, None)
    return EXIT_OK if report.passed else EXIT_COMPARISON


def _solve_point(model: ModelFile, P: np.ndarray):
    """(q, sale, cost) at an allocation, or None when unstable."""
    try:
        state = unit_cost(model.instance, Allocation(P), model.solver)
    except UnstableError:
        return None
    return state


def _cmd_sweep(args) -> int:
    model = load_model(args.config)
    n = model.instance.n
    values = _parse_range(args.sweep_range)
    lines = _csv_comments(model, sweep=args.plane or args.param, range=args.sweep_range)

    if args.plane:
        if n != 3:
            raise ModelFileError("--plane: needs a 3-warehouse model")
        try:
            i, j = (int(p[1:]) - 1 for p in args.plane.split(","))
        except (ValueError, IndexError):
            raise ModelFileError(f"--plane: expected Pi,Pj, got {args.plane!r}")
        if not (0 <= i < 3 and 0 <= j < 3 and i != j
                and args.plane == f"P{i + 1},P{j + 1}"):
            raise ModelFileError(f"--plane: expected two distinct of P1,P2,P3, got {args.plane!r}")
        k = 3 - i - j
        q_cols = ",".join(f"q_{c + 1}" for c in range(3))
        s_cols = ",".join(f"sale_{c + 1}" for c in range(3))
        lines.append(f"P_{i + 1},P_{j + 1},P_{k + 1},{q_cols},{s_cols},C,infeasible")
        for vi in values:
            for vj in values:
                rest = 1.0 - vi - vj
                if rest < -1e-12:
                    continue
                P = np.zeros(3)
                P[i], P[j], P[k] = vi, vj, max(rest, 0.0)
                state = _solve_point(model, P)
                prefix = f"{float(vi)!r},{float(vj)!r},{float(P[k])!r}"
                lines.append(_point_row(prefix, state, 3))
    elif args.param.startswith("P_"):
        index = _param_index(args.param, "P", n)
        base = model.allocation.P if model.allocation is not None else np.full(n, 1.0 / n)
        q_cols = ",".join(f"q_{c + 1}" for c in range(n))
        s_cols = ",".join(f"sale_{c + 1}" for c in range(n))
        lines.append(f"P_{index + 1},{q_cols},{s_cols},C,infeasible")
        for v in values:
            if not 0.0 <= v <= 1.0:
                lines.append(_point_row(repr(float(v)), None, n))
                continue
            P = _rescale_allocation(base, index, float(v))
            state = _solve_point(model, P)
            lines.append(_point_row(repr(float(v)), state, n))
    else:
        which = {"lambda": "arrival", "mu": "perish"}
        name = args.param.split("_")[0]
        if name not in which:
            raise ModelFileError(
                f"--param: expected lambda_i, mu_i or P_i, got {args.param!r}"
            )
        index = _param_index(args.param, name, n)
        from .allocate import sensitivity_sweep

        rows = sensitivity_sweep(model.instance, which[name], index, values)
        p_cols = ",".join(f"P_star_{c + 1}" for c in range(n))
        lines.append(f"{name}_{index + 1},{p_cols},C,infeasible")
        for row in rows:
            if row.feasible:
                p_txt = ",".join(repr(float(p)) for p in row.P_star)
                lines.append(f"{float(row.value)!r},{p_txt},{float(row.cost)!r},0")
            else:
                lines.append(f"{float(row.value)!r}," + "," * n + "1")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _param_index(param: str, name: str, n: int) -> int:
    try:
        index = int(param.split("_", 1)[1]) - 1
    except (ValueError, IndexError):
        raise ModelFileError(f"--param: expected {name}_i with an index, got {param!r}")
    if not 0 <= index < n:
        raise ModelFileError(f"--param: index out of range for {n} warehouses: {param!r}")
    return index


def _rescale_allocation(base: np.ndarray, index: int, value: float) -> np.ndarray:
    """Set one coordinate; spread the rest proportionally to the base."""
    P = np.array(base, dtype=np.float64)
    others = np.delete(np.arange(P.size), index)
    remainder = 1.0 - value
    base_rest = P[others].sum()
    if base_rest > 0.0:
        P[others] *= remainder / base_rest
    else:
        P[others] = remainder / max(others.size, 1)
    P[index] = value
    return P


def _point_row(prefix: str, state, n: int) -> str:
    # columns after the prefix: q_1..q_n, sale_1..sale_n, C, infeasible
    if state is None:
        return prefix + "," + ",".join([""] * (2 * n + 1) + ["1"])
    q_txt = ",".join(repr(float(v)) for v in state.q)
    s_txt = ",".join(repr(float(v)) for v in state.expected_sale)
    return f"{prefix},{q_txt},{s_txt},{state.unit_cost!r},0"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    handlers = {
        "solve": _cmd_solve,
        "optimize": _cmd_optimize,
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except (ModelFileError, OSError, json.JSONDecodeError) as err:
        print(f"gchain: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except UnstableError as err:
        print(f"gchain: unstable: {err}", file=sys.stderr)
        return EXIT_UNSTABLE
    except InteriorViolationError as err:
        print(
            f"gchain: interior violation: {err}\n"
            "gchain: hint: retry with --method numerical",
            file=sys.stderr,
        )
        return EXIT_INTERIOR
    except (InfeasibleError, NonConvergenceError, GChainError, ValueError) as err:
        print(f"gchain: error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

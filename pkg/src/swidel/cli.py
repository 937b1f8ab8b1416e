"""Command-line front end.

    swidel build    INSTANCE [--out FILE]
    swidel simulate INSTANCE --signal SPEC --horizon T [--out FILE]
    swidel jsr      INSTANCE [--eps E] [--budget N]
    swidel decide   INSTANCE [--rate R] [--eps E] [--budget N]
    swidel design   INSTANCE {deadbeat,search} [...]

Exit codes: 0 Stable / UpperCertified / controller found, 3 Unstable /
LowerCertified / no controller can exist, 4 Undetermined / Bracket / search
inconclusive, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import (
    default_workers,
    design_scalar_deadbeat,
    grid_candidates,
    random_candidates,
    search_example2_gains,
    search_indep_gains,
)
from .errors import SwidelError
from .instance import Instance, load_instance, system_to_json
from .jsr import DEFAULT_BUDGET, DEFAULT_EPS, decide_growth, decide_stability
from .model import build_dep_closed_loop
from .netsim import iterate, parse_signal, simulate, write_csv

SEARCH_BUDGET = 20_000

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_UNDETERMINED = 0, 2, 3, 4

STABILITY_EXIT = {"Stable": EXIT_OK, "Unstable": EXIT_UNSTABLE, "Undetermined": EXIT_UNDETERMINED}
GROWTH_EXIT = {"UpperCertified": EXIT_OK, "LowerCertified": EXIT_UNSTABLE, "Bracket": EXIT_UNDETERMINED}


class UsageError(SwidelError):
    pass


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _positive(kind):
    def parse(value):
        x = kind(value)
        if not x > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {value}")
        return x

    return parse


def _grid(spec: str) -> list[float]:
    """``lo:hi:num`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in spec:
            lo, hi, num = spec.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(num))]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}; use lo:hi:num or v1,v2,...") from None


def cmd_build(args) -> int:
    inst = load_instance(args.instance)
    _emit(system_to_json(inst.system()), args.out)
    return EXIT_OK


def _matrix_csv(sys, states, signal) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = []
    for name, size in sys.layout:
        cols += [name] if size == 1 else [f"{name}_{j}" for j in range(1, size + 1)]
    writer.writerow(["t", "sigma"] + cols + ["norm"])
    for t, w in enumerate(states):
        sigma = signal[t] if t < len(signal) else ""
        writer.writerow([t, sigma] + [repr(float(v)) for v in w] + [repr(float(np.linalg.norm(w)))])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    inst: Instance = load_instance(args.instance)
    spec = args.signal or inst.signal
    if spec is None:
        raise UsageError("simulate needs --signal or a 'signal' field in the instance")
    signal = parse_signal(spec, inst.delays)
    if inst.has_netsim:
        plant, D = inst.plant, inst.delays
        x0 = inst.x0 if inst.x0 is not None else np.eye(plant.n)[0]
        queue0 = memory0 = None
        if inst.w0 is not None:
            w = inst.w0
            q_end = plant.n + D.d_max * plant.m
            if w.size not in (q_end, q_end + D.d_max * plant.m):
                raise UsageError(f"w0 must have length {q_end} or {q_end + D.d_max * plant.m}")
            x0, queue0 = w[: plant.n], w[plant.n : q_end]
            memory0 = w[q_end:] if w.size > q_end else None
        traj = simulate(plant, D, inst.controller, signal, x0, args.horizon,
                        queue0=queue0, memory0=memory0)
        text = write_csv(traj)
        final, diverged = traj.growth[-1], traj.diverged
    else:
        sys_ = inst.system()
        if inst.w0 is not None:
            w0 = inst.w0
        else:
            w0 = np.zeros(sys_.dim)
            w0[sys_.slices().get("x", slice(0, 1)).start] = 1.0
        states, realised = iterate(sys_, signal, w0, args.horizon)
        text = _matrix_csv(sys_, states, realised)
        final = float(np.linalg.norm(states[-1]))
        diverged = not final <= 1e12
    summary = f"final_norm={final!r} diverged={str(diverged).lower()}"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_jsr(args) -> int:
    inst = load_instance(args.instance)
    verdict = decide_stability(inst.system(), args.eps, args.budget)
    _emit(verdict.as_dict(), args.out)
    return STABILITY_EXIT[verdict.stability]


def cmd_decide(args) -> int:
    inst = load_instance(args.instance)
    verdict = decide_growth(inst.system(), args.rate, args.eps, args.budget)
    _emit(verdict.as_dict(), args.out)
    return GROWTH_EXIT[verdict.kind]


def cmd_design(args) -> int:
    inst = load_instance(args.instance)
    workers = 1 if args.deterministic else default_workers()
    if args.method == "deadbeat":
        if inst.plant is None or inst.ctype == "example2":
            raise UsageError("deadbeat design needs a plant and delays")
        if inst.plant.n != 1 or inst.plant.m != 1:
            raise UsageError("deadbeat design is for scalar plants (n = m = 1)")
        a, b = float(inst.plant.A[0, 0]), float(inst.plant.B[0, 0])
        res = design_scalar_deadbeat(a, b, inst.delays)
        closed = build_dep_closed_loop(inst.plant, inst.delays, res.controller)
        cert = decide_stability(closed, args.eps, args.budget)
        _emit({
            "method": "deadbeat",
            "gains": {str(d): K.tolist() for d, K in res.controller.gains.items()},
            "k_ack": res.k_ack.tolist(),
            "settle_time": res.settle_time,
            "certificate": cert.as_dict(),
        }, args.out)
        return STABILITY_EXIT[cert.stability]

    if inst.ctype == "example2":
        p = inst.params
        k1 = args.k1 if args.k1 is not None else _grid("-2:2:21")
        k2 = args.k2 if args.k2 is not None else _grid("-2:2:21")
        res = search_example2_gains(p["a"], p["b"], k1, k2, args.eps, args.budget, workers)
        controller = {"k1": res.controller[0], "k2": res.controller[1]}
    elif inst.has_netsim:
        plant, D = inst.plant, inst.delays
        shape = (plant.m, plant.m * D.d_max + plant.n)
        if args.random:
            cands = random_candidates(shape, args.random, args.seed, args.scale)
        else:
            values = args.values if args.values is not None else _grid("-1:1:5")
            cands = list(grid_candidates(shape, values))
        res = search_indep_gains(plant, D, cands, args.eps, args.budget, workers)
        controller = {"type": "delay_independent", "K": res.controller.K.tolist()}
    else:
        raise UsageError("gain search needs a plant or an example2 instance")
    payload = {
        "method": "search",
        "found": res.found,
        "controller": controller,
        "certificate": res.verdict.as_dict(),
        "candidates": len(res.evaluated),
        "infeasible_bound": res.infeasible_bound,
    }
    _emit(payload, args.out)
    if res.found:
        return EXIT_OK
    if res.infeasible_bound is not None:
        return EXIT_UNSTABLE
    return EXIT_UNDETERMINED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swidel",
        description="Stability analysis and design for control loops with switching network delays.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, budget=True, default_budget=DEFAULT_BUDGET):
        p.add_argument("instance", help="instance JSON file (or inline JSON text)")
        p.add_argument("--out", default=None, help="write the result here instead of stdout")
        if budget:
            p.add_argument("--eps", type=_positive(float), default=DEFAULT_EPS)
            p.add_argument("--budget", type=_positive(int), default=default_budget,
                           help=f"products examined per JSR run (default {default_budget})")
            p.add_argument("--deterministic", action="store_true",
                           help="single-threaded evaluation (reproducible counts)")

    common(sub.add_parser("build", help="emit the closed-loop matrix set"), budget=False)

    p = sub.add_parser("simulate", help="simulate a trajectory to CSV")
    common(p, budget=False)
    p.add_argument("--signal", default=None,
                   help="const:d | periodic:d1,d2,... | random:seed=S | greedy | explicit:d1,d2,...")
    p.add_argument("--horizon", type=_positive(int), required=True)
    p.add_argument("--seed", type=int, default=None, help="seed for random signals without one")

    common(sub.add_parser("jsr", help="joint spectral radius bounds and stability verdict"))

    p = sub.add_parser("decide", help="decide the worst growth rate against a given rate")
    common(p)
    p.add_argument("--rate", type=_positive(float), default=1.0)

    p = sub.add_parser("design", help="controller synthesis")
    # every search candidate gets its own JSR run, so the per-run budget is smaller
    common(p, default_budget=SEARCH_BUDGET)
    p.add_argument("method", choices=["deadbeat", "search"])
    p.add_argument("--k1", type=_grid, default=None, help="example2 k1 grid (lo:hi:num or list)")
    p.add_argument("--k2", type=_grid, default=None, help="example2 k2 grid (lo:hi:num or list)")
    p.add_argument("--values", type=_grid, default=None, help="entry grid for a general gain K")
    p.add_argument("--random", type=_positive(int), default=None, help="number of random gains")
    p.add_argument("--scale", type=_positive(float), default=1.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


COMMANDS = {
    "build": cmd_build,
    "simulate": cmd_simulate,
    "jsr": cmd_jsr,
    "decide": cmd_decide,
    "design": cmd_design,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.signal == "random" and args.seed is not None:
        args.signal = f"random:seed={args.seed}"
    try:
        return COMMANDS[args.command](args)
    except (SwidelError, ValueError) as exc:
        print(f"swidel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line interface.

Subcommands: info, model, exact, sample, bound, sweep, tomo, walk.

Every subcommand takes ``--seed`` (falling back to ``$PMDSIM_SEED``, then 0),
``--output`` and ``--format json|csv``. ``--config FILE`` reads a flat
``key = value`` file whose keys are flag names without dashes (``gamma``,
``n``, ``shots``...); flags given on the command line win.

Exit codes: 0 on success, 2 for invalid parameters, 3 for solver or
compiler failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bound import classical_bound
from .errors import SOLVER_ERRORS, VALIDATION_ERRORS
from .metrics import CountTable, empirical_conditional_distribution, infidelity, per_symbol_conditional_kl
from .process import build_epsilon_machine, exact_distribution, strings, survival, validate_pmd
from .quantum import (
    NoiseSpec,
    complex_to_json,
    completeness_residual,
    conditional_final_states,
    memory_cost,
    model_for,
    quantum_counts,
    quantum_exact_distribution,
    sample_quantum_batch,
    target_state,
    verify_survival,
)
from .walk import compile_walk, verify_walk, walk_distribution, waveplate_table

SWEEP_GAMMAS = tuple(round(0.45 + 0.01 * i, 2) for i in range(20))
GRIDS = {
    "5a": [(n, 0.5, 0.4) for n in range(3, 9)],
    "5b": [(3, g, 0.4) for g in SWEEP_GAMMAS],
    "5c": [(4, g, 0.4) for g in SWEEP_GAMMAS],
    "5d": [(5, g, 0.4) for g in SWEEP_GAMMAS],
}
GRIDS["all"] = GRIDS["5a"] + GRIDS["5b"] + GRIDS["5c"] + GRIDS["5d"]

REPORT_FIELDS = [
    "n_period", "gamma", "v", "L", "shots", "noise",
    "d_mu", "d_q", "dkl_sampled", "dkl_sampled_smoothed", "dkl_exact_residual",
    "bound_bits", "argmin_partition", "survival_residual", "completeness_residual",
    "error",
]


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------- helpers

def _finite(obj):
    """Replace non-finite floats by strings so JSON stays standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _emit(args, payload=None, rows=None, header=None):
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
        text = buf.getvalue()
    else:
        text = json.dumps(_finite(payload), indent=2) + "\n"
    if args.output:
        with open(args.output, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PMDSIM_SEED")
    return int(env) if env else 0


def _params(args):
    return validate_pmd(args.gamma, args.v, args.n)


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CommandError(f"{path}:{lineno}: expected key = value", 2)
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# ---------------------------------------------------------------- commands

def cmd_info(args):
    params = _params(args)
    machine = build_epsilon_machine(params)
    model = model_for(params)
    table = [survival(params, n) for n in range(4 * params.n_period + 1)]
    if args.format == "csv":
        _emit(args, rows=enumerate(table), header=["n", "survival"])
        return
    _emit(args, {
        "schema": "report-v1",
        "command": "info",
        "valid": True,
        "params": {"gamma": params.gamma, "v": params.v, "n_period": params.n_period, "theta": params.theta},
        "survival": table,
        "d_mu": machine.memory_cost,
        "d_q": memory_cost(model),
        "machine": machine.to_json(),
    })


def cmd_model(args):
    model = model_for(_params(args))
    if args.format == "csv":
        rows = [(n, s[0].real, s[0].imag, s[1].real, s[1].imag) for n, s in enumerate(model.sigma)]
        _emit(args, rows=rows, header=["n", "re0", "im0", "re1", "im1"])
        return
    payload = model.to_json()
    payload["completeness_residual"] = completeness_residual(model)
    payload["d_q"] = memory_cost(model)
    _emit(args, payload)


def cmd_exact(args):
    params = _params(args)
    classical = exact_distribution(build_epsilon_machine(params), args.L)
    quantum = quantum_exact_distribution(model_for(params), args.L)
    labels = strings(args.L)
    if args.format == "csv":
        rows = [
            (j, labels[i], classical.table[j, i], quantum.table[j, i])
            for j in range(classical.n_states)
            for i in range(len(labels))
        ]
        _emit(args, rows=rows, header=["state", "string", "p_classical", "p_quantum"])
        return
    _emit(args, {
        "schema": "report-v1",
        "command": "exact",
        "L": args.L,
        "strings": labels,
        "classical": classical.table.tolist(),
        "quantum": quantum.table.tolist(),
        "max_abs_diff": float(np.max(np.abs(classical.table - quantum.table))),
    })


def _sample_counts(model, L, shots, noise, seed, method):
    if method == "sequential":
        children = np.random.SeedSequence(seed).spawn(model.n_states)
        return CountTable.from_indices(
            L, [sample_quantum_batch(model, j, L, shots, noise, c) for j, c in enumerate(children)]
        )
    return quantum_counts(model, L, shots, noise, seed)


def cmd_sample(args):
    params = _params(args)
    machine = build_epsilon_machine(params)
    model = model_for(params)
    noise = NoiseSpec(args.noise)
    counts = _sample_counts(model, args.L, args.shots, noise, _resolve_seed(args), args.method)
    truth = exact_distribution(machine, args.L)
    dkl = per_symbol_conditional_kl(machine.pi, truth, empirical_conditional_distribution(counts))
    dkl_s = per_symbol_conditional_kl(machine.pi, truth, empirical_conditional_distribution(counts, 0.5))
    labels = strings(args.L)
    if args.format == "csv":
        rows = [
            (j, labels[i], int(counts.counts[j, i]), truth.table[j, i])
            for j in range(machine.n_states)
            for i in range(len(labels))
        ]
        _emit(args, rows=rows, header=["state", "string", "count", "p_exact"])
        return
    _emit(args, {
        "schema": "report-v1",
        "command": "sample",
        "seed": _resolve_seed(args),
        "L": args.L,
        "shots": args.shots,
        "noise": args.noise,
        "strings": labels,
        "counts": counts.counts.tolist(),
        "dkl": dkl,
        "dkl_smoothed": dkl_s,
    })


def cmd_bound(args):
    params = _params(args)
    result = classical_bound(build_epsilon_machine(params), args.k, args.L)
    row = [params.n_period, params.gamma, params.v, args.k, args.L, result.bits, str(result.partition)]
    header = ["n_period", "gamma", "v", "k", "L", "bound_bits", "argmin_partition"]
    if args.format == "csv":
        _emit(args, rows=[row], header=header)
        return
    payload = dict(zip(header, row))
    payload = {"schema": "report-v1", "command": "bound", **payload}
    _emit(args, payload)


def run_report(task) -> dict:
    """One sweep row. ``task = (index, (N, gamma, v), L, shots, noise, seed, k)``."""
    index, (n, gamma, v), L, shots, noise, seed, k = task
    row = dict.fromkeys(REPORT_FIELDS)
    row.update(n_period=n, gamma=gamma, v=v, L=L, shots=shots, noise=noise)
    try:
        params = validate_pmd(gamma, v, n)
        machine = build_epsilon_machine(params)
        model = model_for(params)
        truth = exact_distribution(machine, L)
        counts = quantum_counts(model, L, shots, NoiseSpec(noise), [seed, index])
        bound = classical_bound(machine, k, L)
        exact_q = quantum_exact_distribution(model, L)
        row.update(
            d_mu=machine.memory_cost,
            d_q=memory_cost(model),
            dkl_sampled=per_symbol_conditional_kl(machine.pi, truth, empirical_conditional_distribution(counts)),
            dkl_sampled_smoothed=per_symbol_conditional_kl(
                machine.pi, truth, empirical_conditional_distribution(counts, 0.5)
            ),
            dkl_exact_residual=float(np.max(np.abs(exact_q.table - truth.table))),
            bound_bits=bound.bits,
            argmin_partition=str(bound.partition),
            survival_residual=verify_survival(model, 4 * n),
            completeness_residual=completeness_residual(model),
        )
    except (VALIDATION_ERRORS + SOLVER_ERRORS) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_triples(args):
    if args.n_values or args.gamma_values:
        ns = [int(s) for s in args.n_values.split(",")] if args.n_values else [4]
        gs = [float(s) for s in args.gamma_values.split(",")] if args.gamma_values else [0.5]
        return [(n, g, args.v) for n in ns for g in gs]
    return GRIDS[args.grid]


def cmd_sweep(args):
    if args.shots < 1:
        raise CommandError("shots must be >= 1", 2)
    seed = _resolve_seed(args)
    tasks = [
        (i, triple, args.L, args.shots, args.noise, seed, args.k)
        for i, triple in enumerate(sweep_triples(args))
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(run_report, tasks))
    else:
        rows = [run_report(t) for t in tasks]
    if args.format == "csv":
        _emit(args, rows=[[r[f] for f in REPORT_FIELDS] for r in rows], header=REPORT_FIELDS)
    else:
        _emit(args, {"schema": "report-v1", "command": "sweep", "seed": seed, "rows": rows})
    if rows and all(r["error"] for r in rows):
        raise CommandError("every sweep row failed", 3)


def cmd_tomo(args):
    params = _params(args)
    model = model_for(params)
    probs, rho = conditional_final_states(model, args.L, NoiseSpec(args.noise))
    labels = strings(args.L)
    conditions = []
    for j in range(model.n_states):
        for i, x in enumerate(labels):
            k = target_state(model, j, x)
            conditions.append({
                "initial_state": j,
                "outcome": x,
                "probability": float(probs[j, i]),
                "target_state": k,
                "rho": complex_to_json(rho[j, i]),
                "infidelity": infidelity(rho[j, i], model.sigma[k]),
            })
    infs = [c["infidelity"] for c in conditions]
    if args.format == "csv":
        rows = [(c["initial_state"], c["outcome"], c["target_state"], c["probability"], c["infidelity"]) for c in conditions]
        _emit(args, rows=rows, header=["initial_state", "outcome", "target_state", "probability", "infidelity"])
        return
    _emit(args, {
        "schema": "report-v1",
        "command": "tomo",
        "params": {"gamma": params.gamma, "v": params.v, "n_period": params.n_period},
        "L": args.L,
        "noise": args.noise,
        "conditions": conditions,
        "mean_infidelity": float(np.mean(infs)),
        "max_infidelity": float(np.max(infs)),
    })


def cmd_walk(args):
    params = _params(args)
    model = model_for(params)
    program = compile_walk(model)
    deviation = verify_walk(program, model)
    plates = waveplate_table(program)
    if args.format == "csv":
        rows = [(p, k, *dec.degrees) for p, k, _, dec in plates]
        _emit(args, rows=rows, header=["position", "step", "q1_deg", "h_deg", "q2_deg"])
        return
    payload = program.to_json()
    payload["deviation"] = deviation
    payload["cascade_l2_max_abs_diff"] = float(np.max(np.abs(
        walk_distribution(program, model, 2).table
        - quantum_exact_distribution(model, 2).table
    )))
    payload["waveplates"] = [
        {
            "position": p, "step": k, "label": label,
            "q1_deg": dec.degrees[0], "h_deg": dec.degrees[1], "q2_deg": dec.degrees[2],
            "residual": dec.residual,
        }
        for p, k, label, dec in plates
    ]
    _emit(args, payload)


# ------------------------------------------------------------------ parser

COMMANDS = {
    "info": (cmd_info, "validity, survival table and memory costs"),
    "model": (cmd_model, "solved quantum model (qm-v1)"),
    "exact": (cmd_exact, "exact classical and quantum output tables"),
    "sample": (cmd_sample, "sample the quantum model and score it"),
    "bound": (cmd_bound, "lower bound on k-state classical distortion"),
    "sweep": (cmd_sweep, "figure-data sweep over a parameter grid"),
    "tomo": (cmd_tomo, "conditional final memory states and infidelities"),
    "walk": (cmd_walk, "quantum-walk coin program and waveplate angles"),
}


def _common_flags():
    # a fresh parent per subcommand: argparse shares parent actions, so
    # set_defaults on one subcommand would otherwise leak into the others
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file of defaults")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--gamma", type=float, default=0.5, help="base decay factor")
    common.add_argument("--v", type=float, default=0.4, help="modulation strength")
    common.add_argument("--n", type=int, default=4, help="modulation period N")
    return common


def build_parser():
    parser = argparse.ArgumentParser(prog="pmdsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[_common_flags()], help=help_text)
        p.set_defaults(func=func)
        subs[name] = p

    for name in ("exact", "sample", "bound", "sweep", "tomo"):
        subs[name].add_argument("--L", type=int, default=2, help="horizon")
    for name in ("sample", "sweep"):
        subs[name].add_argument("--shots", type=int, default=10**6, help="shots per initial state")
    for name in ("sample", "sweep", "tomo"):
        subs[name].add_argument("--noise", type=float, default=0.0, help="depolarizing probability per step")
    for name in ("bound", "sweep"):
        subs[name].add_argument("--k", type=int, default=2, help="classical memory states")
    subs["sample"].add_argument("--method", choices=("multinomial", "sequential"), default="multinomial")
    subs["sweep"].add_argument("--grid", choices=sorted(GRIDS), default="all")
    subs["sweep"].add_argument("--n-values", default=None, help="comma-separated N list")
    subs["sweep"].add_argument("--gamma-values", default=None, help="comma-separated gamma list")
    subs["sweep"].add_argument("--jobs", type=int, default=1)
    subs["tomo"].set_defaults(gamma=0.49)
    return parser, subs


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = read_config(args.config)
        config.pop("config", None)
        sub = subs[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(config) - known
        if unknown:
            raise CommandError(f"unknown config keys: {', '.join(sorted(unknown))}", 2)
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        args.func(args)
    except CommandError as exc:
        print(f"pmdsim: {exc}", file=sys.stderr)
        return exc.code
    except VALIDATION_ERRORS as exc:
        print(f"pmdsim: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"pmdsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

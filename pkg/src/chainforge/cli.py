"""Command-line front end: design extensions, analyse transfer, emit files.

Structured results are JSON, plottable series are CSV, both with
deterministic 17-significant-digit decimals; identical inputs and flags
produce byte-identical outputs.  Output files are written atomically.

Exit codes: 0 success, 1 input/parse error, 2 infeasible or degenerate
problem, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import jsonio
from .chains import (
    RegionPartition,
    build_hamiltonian,
    char_poly_eval,
    eigendecompose,
    fold_symmetric,
    load_chain,
    mirror_symmetric,
    save_chain,
)
from .errors import (
    ChainforgeError,
    DegenerateSystemError,
    EmptyNullSpaceError,
    IllPosedTargetError,
    InfeasibleExtensionError,
    InputError,
    VerificationError,
)
from .extensions import load_problem, solve_extension
from .transfer import (
    SingleExcitationState,
    best_creation_state,
    classify_eigenvalues,
    creation_spectrum,
    encoding_time_bound,
    endtoend_error_bound,
    fidelity_sweep,
    null_space_encoding,
    wavepacket_stats,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep the exit contract
        raise InputError(message)


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        start, stop, count = float(a), float(b), int(n)
    except ValueError as exc:
        raise InputError(f"grid must be start:stop:count, got {text!r}") from exc
    if count < 1:
        raise InputError("time grid count must be at least 1")
    return np.linspace(start, stop, count)


def _parse_partition(text: str, n_sites: int) -> RegionPartition:
    parts = text.split(",")
    try:
        sizes = [int(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"partition must be M or M_in,M_out, got {text!r}") from exc
    if len(sizes) == 1:
        sizes = sizes * 2
    if len(sizes) != 2:
        raise InputError(f"partition must be M or M_in,M_out, got {text!r}")
    try:
        return RegionPartition(n_sites, sizes[0], sizes[1])
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _parse_range(text: str, n_sites: int, name: str) -> np.ndarray:
    """1-based inclusive site range lo:hi -> 0-based index array."""
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = int(lo_s), int(hi_s)
    except ValueError as exc:
        raise InputError(f"{name} must be lo:hi (1-based, inclusive), got {text!r}") from exc
    if not (1 <= lo <= hi <= n_sites):
        raise InputError(f"{name} {text!r} is outside the chain (1..{n_sites})")
    return np.arange(lo - 1, hi)


def _state_to_json(state: SingleExcitationState | None):
    if state is None:
        return None
    return [[float(a.real), float(a.imag)] for a in state.amplitudes]


def _state_from_file(path: str, n_sites: int) -> SingleExcitationState:
    doc = jsonio.read_json(path)
    try:
        amp = np.array([complex(re, im) for re, im in doc], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected an array of [re, im] pairs") from exc
    if amp.size != n_sites:
        raise InputError(f"{path}: state has {amp.size} entries, chain has {n_sites}")
    return SingleExcitationState.normalized(amp)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        jsonio.write_file(out, text)


def _resolve_time(args) -> float:
    if getattr(args, "t0", None) is not None:
        return args.t0
    if getattr(args, "delta", None) is not None:
        return math.pi / args.delta
    raise InputError("need --t0 or --delta")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_extend(args) -> int:
    problem, _ = load_problem(args.problem)
    solution = solve_extension(problem, spectral_tol=args.tol)
    prefix = args.out if args.out else os.path.splitext(args.problem)[0]
    chain_path = f"{prefix}.chain.json"
    report_path = f"{prefix}.report.json"
    save_chain(solution.assembled, chain_path)
    cond = solution.conditioning
    report = {
        "n_sites": solution.assembled.n_sites,
        "junction": solution.junction,
        "extension_couplings": [float(x) for x in solution.extension.couplings],
        "extension_fields": [float(x) for x in solution.extension.fields],
        "precision": solution.precision,
        "conditioning": None if not math.isfinite(cond) else cond,
        "max_spectral_residual": solution.max_spectral_residual,
        "max_constraint_residual": solution.max_constraint_residual,
        "targets": [
            {
                "target": t.target,
                "sector": t.sector,
                "constraint_residual": t.constraint_residual,
                "spectral_residual": t.spectral_residual,
                "matched_eigenvalue": t.matched_eigenvalue,
            }
            for t in solution.achieved_targets
        ],
    }
    jsonio.write_json(report_path, report)
    print(
        f"wrote {chain_path} ({solution.assembled.n_sites} sites), "
        f"max spectral residual {solution.max_spectral_residual:.3e}"
    )
    return 0


def _cmd_spectrum(args) -> int:
    spec = load_chain(args.chain)
    dec = eigendecompose(build_hamiltonian(spec))
    lines = ["index,eigenvalue,label"]
    labels = dec.symmetry_labels or [""] * dec.size
    for i, (lam, lab) in enumerate(zip(dec.eigenvalues, labels)):
        lines.append(f"{i},{lam:.17g},{lab}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_sweep(args) -> int:
    spec = load_chain(args.chain)
    partition = _parse_partition(args.partition, spec.n_sites)
    times = _parse_grid(args.grid)
    report = fidelity_sweep(spec, partition, times)
    _emit(report.csv_text(), args.out)
    return 0


def _cmd_encode(args) -> int:
    spec = load_chain(args.chain)
    partition = _parse_partition(args.partition, spec.n_sites)
    t0 = _resolve_time(args)
    delta = args.delta if args.delta is not None else math.pi / t0
    dec = eigendecompose(build_hamiltonian(spec))
    classification = classify_eigenvalues(dec, delta, t0, tol=args.tol)
    result = null_space_encoding(spec, partition, classification)
    doc = {
        "delta": delta,
        "t0": t0,
        "null_dimension": result.null_dimension,
        "violated_indices": [int(i) for i in classification.violated],
        "violated_nulled": [int(i) for i in result.violated_used],
        "fidelities": [float(f) for f in result.fidelities],
        "states": [_state_to_json(s) for s in result.input_states],
        "output_states": [_state_to_json(s) for s in result.output_states],
    }
    _emit(jsonio.dumps(doc) + "\n", args.out)
    return 0


def _cmd_bounds(args) -> int:
    n = args.n_sites
    integral, closed = endtoend_error_bound(n)
    chernoff = encoding_time_bound(n, args.p)
    start = wavepacket_stats(n, 0.0, 1.0)
    mid = wavepacket_stats(n, 0.5, 1.0)
    doc = {
        "n_sites": n,
        "endtoend_error_integral": integral,
        "endtoend_error_closed_form": closed,
        "chernoff": {"p": args.p, "bound": chernoff.bound},
        "encoding_time": {
            "t_in_fraction": chernoff.t_in_fraction,
            "transfer_time_fraction": chernoff.transfer_time_fraction,
        },
        "wavepacket": {
            "start_mean": start.mean,
            "start_spread": start.spread,
            "midpoint_mean": mid.mean,
            "midpoint_spread": mid.spread,
        },
    }
    _emit(jsonio.dumps(doc) + "\n", args.out)
    return 0


def _cmd_create(args) -> int:
    spec = load_chain(args.chain)
    bulk = _parse_range(args.bulk, spec.n_sites, "--bulk")
    out_region = _parse_range(args.outregion, spec.n_sites, "--outregion")
    t0 = _resolve_time(args)
    if args.target is None:
        values = creation_spectrum(spec, bulk, out_region, t0)
        lines = ["index,eigenvalue"]
        for i, v in enumerate(values):
            lines.append(f"{i},{v:.17g}")
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    target = _state_from_file(args.target, spec.n_sites)
    state, fidelity = best_creation_state(spec, target, bulk, out_region, t0)
    doc = {"fidelity": fidelity, "input_state": _state_to_json(state)}
    _emit(jsonio.dumps(doc) + "\n", args.out)
    return 0


def _cmd_verify(args) -> int:
    spec = load_chain(args.chain)
    tol = args.tol if args.tol is not None else 1e-10
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        print(f"{'ok  ' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
        if not ok:
            failures += 1

    dec = eigendecompose(build_hamiltonian(spec))
    scale = float(np.max(np.abs(dec.eigenvalues)))
    is_mirror = mirror_symmetric(spec)
    report("chain file parses", True, f"{spec.n_sites} sites")
    report("mirror symmetry", is_mirror or args.problem is None, str(is_mirror))

    if is_mirror and spec.n_sites >= 2:
        plus, minus = fold_symmetric(spec)
        union = np.sort(
            np.concatenate(
                [eigendecompose(plus).eigenvalues, eigendecompose(minus).eigenvalues]
            )
        )[::-1]
        err = float(np.max(np.abs(union - dec.eigenvalues)))
        report("folded spectra union matches", err <= tol * max(scale, 1.0), f"{err:.3e}")

    # characteristic polynomial vanishes on the spectrum
    ham = build_hamiltonian(spec)
    worst = 0.0
    for k, lam in enumerate(dec.eigenvalues):
        q, _ = char_poly_eval(ham, lam)
        dq = float(np.prod(lam - np.delete(dec.eigenvalues, k)))
        worst = max(worst, abs(q) / max(abs(dq) * scale, 1e-300))
    report("characteristic polynomial roots", worst <= 1e-8, f"{worst:.3e}")

    if args.seed is not None and spec.n_sites <= 32:
        rng = np.random.default_rng(args.seed)
        dense = ham.to_dense()
        probe_err = 0.0
        for x in rng.uniform(-2 * scale, 2 * scale, size=5):
            q, _ = char_poly_eval(ham, x)
            ref = float(np.linalg.det(x * np.eye(spec.n_sites) - dense))
            probe_err = max(probe_err, abs(q - ref) / max(abs(ref), 1e-300))
        report("determinant probes", probe_err <= 1e-6, f"{probe_err:.3e}")

    if args.problem is not None:
        problem, _ = load_problem(args.problem)
        targets = list(problem.targets)
        if problem.field_free:
            targets += [(-v, "-" if s == "+" else "+") for v, s in problem.targets]
        labels = np.array(dec.symmetry_labels or [])
        target_tol = args.tol if args.tol is not None else 1e-8 * max(
            abs(v) for v, _ in targets
        )
        worst_t = 0.0
        for lam, sector in targets:
            sector_eigs = dec.eigenvalues[labels == sector]
            worst_t = max(worst_t, float(np.min(np.abs(sector_eigs - lam))))
        report(
            "targets present in spectrum",
            worst_t <= target_tol,
            f"max deviation {worst_t:.3e}",
        )

    if args.delta is not None:
        classification = classify_eigenvalues(dec, args.delta)
        report(
            "ladder classification",
            True,
            f"{classification.satisfied.size} satisfied, "
            f"{classification.violated.size} violated",
        )

    if failures:
        raise VerificationError(f"{failures} check(s) failed")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extend", help="solve an extension problem file")
    p.add_argument("problem", help="problem JSON file")
    p.add_argument("--out", help="output prefix (default: problem file stem)")
    p.add_argument("--tol", type=float, default=None, help="spectral verification tolerance")
    p.set_defaults(func=_cmd_extend)

    p = sub.add_parser("spectrum", help="eigenvalues and symmetry labels of a chain")
    p.add_argument("chain")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("sweep", help="transfer fidelity over a time grid (CSV)")
    p.add_argument("chain")
    p.add_argument("--partition", required=True, help="region sizes M or M_in,M_out")
    p.add_argument("--grid", required=True, help="time grid start:stop:count")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("encode", help="null-space encoding for a design time")
    p.add_argument("chain")
    p.add_argument("--partition", required=True)
    p.add_argument("--delta", type=float, help="ladder spacing (t0 = pi/delta)")
    p.add_argument("--t0", type=float, help="transfer time (delta = pi/t0)")
    p.add_argument("--tol", type=float, default=None, help="classification tolerance")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("bounds", help="analytic transfer/encoding bounds for a length")
    p.add_argument("n_sites", type=int)
    p.add_argument("--p", type=float, default=0.5, help="wavepacket Bernoulli parameter")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("create", help="state-creation spectrum or optimal start state")
    p.add_argument("chain")
    p.add_argument("--bulk", required=True, help="bulk target sites lo:hi (1-based)")
    p.add_argument("--outregion", required=True, help="output+mirror sites lo:hi (1-based)")
    p.add_argument("--delta", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--target", help="JSON state file of [re, im] pairs")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_create)

    p = sub.add_parser("verify", help="consistency checks on a chain (and problem) file")
    p.add_argument("chain")
    p.add_argument("--problem")
    p.add_argument("--delta", type=float)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        IllPosedTargetError,
        DegenerateSystemError,
        InfeasibleExtensionError,
        EmptyNullSpaceError,
    ) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3
    except ChainforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

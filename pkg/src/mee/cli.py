"""Command-line interface.

Subcommands: means, shift, bounds, canonical, sample, verify, spins.
Primary records are printed to stdout as deterministic JSON and optionally
written under --out-dir; curves and amplitude dumps are CSV.  Exit codes:
0 success, 1 domain/infeasibility/convergence errors (structured JSON on
stderr), 2 I/O or parse errors.  Given the same seed, outputs are
byte-identical regardless of --workers.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bounds as bounds_mod
from . import canonical as canonical_mod
from . import experiments as exp_mod
from .errors import DomainError, InfeasibleError, MeeError, NumericalError, ParseError
from .io import dumps_record, format_float, load_bipartite, load_spectrum
from .sampling import (
    RngSpec,
    SampleBatch,
    default_shell_width,
    oracle_manifold_sample,
    sample_gaussian_ensemble,
    sample_sphere,
)
from .spectrum import compute_means, harmonic_frame, harmonic_shift_solve, epsilon_shift_solve

DEFAULT_EPSILON_GRID = tuple(0.5 * k for k in range(1, 17))  # 0.5, 1.0, ..., 8.0
DEFAULT_COUNT = 100_000
DEFAULT_SIGMAS = 5.0
DEFAULT_T_VALUES = tuple(0.1 * k for k in range(1, 21))
SEED_ENV_VAR = "MEE_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "12345"))


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ParseError(f"cannot parse float list {text!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mee",
        description="Concentration-of-measure toolkit for quantum mean-energy ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_means = sub.add_parser("means", help="power means of a spectrum")
    p_means.add_argument("--spectrum", required=True, help="spectrum JSON file")

    p_shift = sub.add_parser("shift", help="solve the energy shift")
    p_shift.add_argument("--spectrum", required=True)
    p_shift.add_argument("--energy", type=float, required=True)
    p_shift.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="solve the multiplier form; omit for the pure harmonic shift",
    )
    p_shift.add_argument("--dim", type=int, default=None, help="override dimension n")
    p_shift.add_argument("--tol", type=float, default=1e-12)

    p_bounds = sub.add_parser("bounds", help="concentration constants and tail curve")
    p_bounds.add_argument("--spectrum", required=True)
    p_bounds.add_argument("--energy", type=float, required=True)
    p_bounds.add_argument("--epsilon", type=float, default=None)
    p_bounds.add_argument(
        "--epsilon-grid",
        default=None,
        help="comma list; scans for the feasible value minimizing the bound at the largest t",
    )
    p_bounds.add_argument("--t-values", default=None, help="comma list of deviations t")
    p_bounds.add_argument("--lipschitz", type=float, default=1.0)
    p_bounds.add_argument("--dim", type=int, default=None)
    p_bounds.add_argument("--out-dir", default=None)

    p_canon = sub.add_parser("canonical", help="canonical reduced density matrix")
    p_canon.add_argument("--bipartite", required=True, help="bipartite spectrum JSON file")
    p_canon.add_argument("--energy", type=float, required=True)
    p_canon.add_argument("--epsilon", type=float, required=True)
    p_canon.add_argument("--out-dir", default=None)

    p_sample = sub.add_parser("sample", help="draw a batch of states")
    p_sample.add_argument("--spectrum", required=True)
    p_sample.add_argument("--energy", type=float, default=None)
    p_sample.add_argument("--count", type=int, default=1000)
    p_sample.add_argument("--seed", type=int, default=None)
    p_sample.add_argument("--stream", type=int, default=0)
    p_sample.add_argument("--mode", choices=("gaussian", "sphere", "oracle"), required=True)
    p_sample.add_argument("--eta", type=float, default=None)
    p_sample.add_argument("--proposal", choices=("uniform", "gaussian"), default="uniform")
    p_sample.add_argument("--max-draws", type=int, default=None)
    p_sample.add_argument("--out", default=None, help="CSV file for amplitudes")

    p_verify = sub.add_parser("verify", help="Monte Carlo verification experiments")
    p_verify.add_argument(
        "--experiment", choices=("moments", "reduced-dm", "tail", "spins"), required=True
    )
    p_verify.add_argument("--spectrum", default=None)
    p_verify.add_argument("--bipartite", default=None)
    p_verify.add_argument("--energy", type=float, default=None)
    p_verify.add_argument("--epsilon", type=float, default=2.0)
    p_verify.add_argument("--count", type=int, default=DEFAULT_COUNT)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--stream", type=int, default=0)
    p_verify.add_argument("--tolerance-sigmas", type=float, default=DEFAULT_SIGMAS)
    p_verify.add_argument("--eta", type=float, default=None)
    p_verify.add_argument("--t-values", default=None)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--m", type=int, default=None)
    p_verify.add_argument("--alpha", type=float, default=None)
    p_verify.add_argument("--gamma", type=float, default=None)
    p_verify.add_argument("--out-dir", default=None)

    p_spins = sub.add_parser("spins", help="non-interacting-spins concentration probe")
    p_spins.add_argument("--m", type=int, required=True)
    p_spins.add_argument("--alpha", type=float, required=True)
    p_spins.add_argument("--gamma", type=float, required=True)
    p_spins.add_argument("--count", type=int, default=10_000)
    p_spins.add_argument("--seed", type=int, default=None)
    p_spins.add_argument("--stream", type=int, default=0)
    p_spins.add_argument("--eta", type=float, default=None)
    p_spins.add_argument("--out-dir", default=None)

    return parser


def _emit(record: dict, out_dir: str | None, filename: str) -> None:
    text = dumps_record(record)
    sys.stdout.write(text)
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / filename).write_text(text)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(x) for x in row])


def _cmd_means(args: argparse.Namespace) -> int:
    spectrum = load_spectrum(args.spectrum)
    record = {
        "config": {"command": "means", "spectrum": args.spectrum},
        "means": compute_means(spectrum).to_json(),
    }
    _emit(record, None, "means.json")
    return 0


def _cmd_shift(args: argparse.Namespace) -> int:
    spectrum = load_spectrum(args.spectrum)
    config = {
        "command": "shift",
        "spectrum": args.spectrum,
        "energy": args.energy,
        "epsilon": args.epsilon,
        "dim": args.dim,
        "tol": args.tol,
    }
    if args.epsilon is None:
        shift = harmonic_shift_solve(spectrum, args.energy, tol=args.tol)
        record = {
            "config": config,
            "kind": "harmonic",
            "shift": shift,
            "shifted_energy": args.energy + shift,
        }
    else:
        frame = epsilon_shift_solve(
            spectrum, args.energy, args.epsilon, tol=args.tol, dim=args.dim
        )
        record = {
            "config": config,
            "kind": "epsilon-multiplier",
            "shift": frame.shift,
            "shifted_energy": frame.e_prime,
            "dim": frame.dim,
        }
    _emit(record, None, "shift.json")
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    spectrum = load_spectrum(args.spectrum)
    ts = _parse_floats(args.t_values) if args.t_values else list(DEFAULT_T_VALUES)
    if args.epsilon is None:
        grid = _parse_floats(args.epsilon_grid) if args.epsilon_grid else list(DEFAULT_EPSILON_GRID)
        # optimize at the deepest requested deviation, where the bound matters most
        consts = bounds_mod.optimize_epsilon(
            spectrum, args.energy, max(ts), grid, dim=args.dim
        )
    else:
        grid = None
        consts = bounds_mod.constants_for(spectrum, args.energy, args.epsilon, dim=args.dim)
    window = bounds_mod.check_energy_window(spectrum, args.energy, dim=args.dim)
    record = {
        "config": {
            "command": "bounds",
            "spectrum": args.spectrum,
            "energy": args.energy,
            "epsilon": args.epsilon,
            "epsilon_grid": grid,
            "t_values": ts,
            "lipschitz": args.lipschitz,
            "dim": args.dim,
        },
        "window": window.to_json(),
        "constants": consts.to_json(),
    }
    _emit(record, args.out_dir, "constants.json")
    rows = []
    for t in ts:
        raw = bounds_mod.tail_bound(consts, t, args.lipschitz)
        rows.append((t, min(1.0, raw), bounds_mod.tail_log10_bound(consts, t)))
    if args.out_dir is not None:
        _write_csv(Path(args.out_dir) / "tail.csv", ("t", "bound", "log10_bound"), rows)
    return 0


def _cmd_canonical(args: argparse.Namespace) -> int:
    bs = load_bipartite(args.bipartite)
    rho = canonical_mod.rho_c_bipartite(bs, args.energy, args.epsilon)
    consts = bounds_mod.constants_for(bs.combined(), args.energy, args.epsilon)
    delta = canonical_mod.delta_deviation(consts)
    record = {
        "config": {
            "command": "canonical",
            "bipartite": args.bipartite,
            "energy": args.energy,
            "epsilon": args.epsilon,
        },
        "rho_c": rho.to_json(),
        "delta": delta,
        "tail_prefactor": bs.dim_a * (bs.dim_a + 1) * consts.a,
        "constants": consts.to_json(),
    }
    _emit(record, args.out_dir, "canonical.json")
    return 0


def _batch_for_sample(args: argparse.Namespace, spectrum, rng: RngSpec) -> SampleBatch:
    if args.mode == "sphere":
        return sample_sphere(spectrum.n, args.count, rng)
    if args.energy is None:
        raise DomainError(f"--energy is required for mode {args.mode}")
    if args.mode == "gaussian":
        frame = harmonic_frame(spectrum, args.energy)
        return sample_gaussian_ensemble(frame, args.count, rng)
    eta = args.eta if args.eta is not None else default_shell_width(spectrum)
    max_draws = args.max_draws if args.max_draws is not None else 200 * args.count
    return oracle_manifold_sample(
        spectrum, args.energy, eta, args.count, max_draws, rng, proposal=args.proposal
    )


def _cmd_sample(args: argparse.Namespace) -> int:
    spectrum = load_spectrum(args.spectrum)
    seed = args.seed if args.seed is not None else _default_seed()
    rng = RngSpec(seed=seed, stream=args.stream)
    batch = _batch_for_sample(args, spectrum, rng)
    record = {
        "config": {
            "command": "sample",
            "spectrum": args.spectrum,
            "energy": args.energy,
            "count": args.count,
            "seed": seed,
            "stream": args.stream,
            "mode": args.mode,
            "eta": args.eta,
            "proposal": args.proposal if args.mode == "oracle" else None,
            "out": args.out,
        },
        "produced": batch.count,
        "meta": batch.meta,
    }
    _emit(record, None, "sample.json")
    if args.out is not None:
        n = batch.dim
        header = [f"{part}{k}" for k in range(n) for part in ("re", "im")]
        if batch.weights is not None:
            header.append("weight")
        rows = []
        for i in range(batch.count):
            interleaved = np.empty(2 * n)
            interleaved[0::2] = batch.states[i].real
            interleaved[1::2] = batch.states[i].imag
            row = list(interleaved)
            if batch.weights is not None:
                row.append(batch.weights[i])
            rows.append(row)
        _write_csv(Path(args.out), header, rows)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    rng = RngSpec(seed=seed, stream=args.stream)
    config = {
        "command": "verify",
        "experiment": args.experiment,
        "spectrum": args.spectrum,
        "bipartite": args.bipartite,
        "energy": args.energy,
        "epsilon": args.epsilon,
        "count": args.count,
        "seed": seed,
        "stream": args.stream,
        "tolerance_sigmas": args.tolerance_sigmas,
        "eta": args.eta,
        "t_values": args.t_values,
    }
    curve_rows: list[tuple] | None = None
    curve_header: tuple[str, ...] | None = None

    if args.experiment == "moments":
        if args.spectrum is None or args.energy is None:
            raise DomainError("moments needs --spectrum and --energy")
        spectrum = load_spectrum(args.spectrum)
        frame = harmonic_frame(spectrum, args.energy)
        report = exp_mod.moment_report_streamed(
            frame,
            args.count,
            rng,
            tolerance_sigmas=args.tolerance_sigmas,
            workers=args.workers,
        )
    elif args.experiment == "reduced-dm":
        if args.bipartite is None or args.energy is None:
            raise DomainError("reduced-dm needs --bipartite and --energy")
        bs = load_bipartite(args.bipartite)
        report, _ = exp_mod.reduced_dm_report(
            bs,
            args.energy,
            args.epsilon,
            args.count,
            rng,
            tolerance_sigmas=args.tolerance_sigmas,
            workers=args.workers,
        )
    elif args.experiment == "tail":
        if args.spectrum is None or args.energy is None:
            raise DomainError("tail needs --spectrum and --energy")
        spectrum = load_spectrum(args.spectrum)
        frame = harmonic_frame(spectrum, args.energy)
        batch = sample_gaussian_ensemble(frame, args.count, rng)
        normalized = SampleBatch(
            states=batch.normalized_states(),
            weights=None,
            rng_spec=rng,
            meta={**batch.meta, "normalized": True},
        )
        consts = bounds_mod.constants_for(spectrum, args.energy, args.epsilon)
        ts = _parse_floats(args.t_values) if args.t_values else list(DEFAULT_T_VALUES)
        curve = exp_mod.empirical_tail(
            normalized, lambda psi: float(psi[0].real), ts, constants=consts
        )
        exceed = [
            exp_mod.Measured(
                f"excess_over_bound_t_{t:g}",
                float(curve.frequencies[i] - curve.bounds[i]),
                None,
                0.0,
                "upper",
            )
            for i, t in enumerate(ts)
        ]
        report = exp_mod.ExperimentReport(
            name="tail",
            inputs={**config, "median": curve.median},
            measured=tuple(exceed),
        )
        curve_header = ("t", "frequency", "bound")
        curve_rows = curve.to_rows()
    else:  # spins
        if args.m is None or args.alpha is None or args.gamma is None:
            raise DomainError("spins needs --m, --alpha and --gamma")
        spec = exp_mod.SpinEnsembleSpec(m=args.m, alpha=args.alpha, gamma=args.gamma)
        report = exp_mod.spin_concentration_probe(
            spec, args.count, rng, eta=args.eta
        )

    record = {"config": config, "report": report.to_json()}
    _emit(record, args.out_dir, "report.json")
    if curve_rows is not None and args.out_dir is not None:
        _write_csv(Path(args.out_dir) / "curve.csv", curve_header, curve_rows)
    return 0


def _cmd_spins(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    rng = RngSpec(seed=seed, stream=args.stream)
    spec = exp_mod.SpinEnsembleSpec(m=args.m, alpha=args.alpha, gamma=args.gamma)
    report = exp_mod.spin_concentration_probe(spec, args.count, rng, eta=args.eta)
    record = {
        "config": {
            "command": "spins",
            "m": args.m,
            "alpha": args.alpha,
            "gamma": args.gamma,
            "count": args.count,
            "seed": seed,
            "stream": args.stream,
            "eta": args.eta,
        },
        "report": report.to_json(),
    }
    _emit(record, args.out_dir, "report.json")
    return 0


_HANDLERS = {
    "means": _cmd_means,
    "shift": _cmd_shift,
    "bounds": _cmd_bounds,
    "canonical": _cmd_canonical,
    "sample": _cmd_sample,
    "verify": _cmd_verify,
    "spins": _cmd_spins,
}


def _error_record(exc: Exception) -> str:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, InfeasibleError):
        record["details"] = {k: _jsonable(v) for k, v in exc.details.items()}
    if isinstance(exc, NumericalError) and exc.residual is not None:
        record["details"] = {"residual": exc.residual}
    return dumps_record(record)


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    return str(value)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ParseError, OSError) as exc:
        sys.stderr.write(_error_record(exc))
        return 2
    except (DomainError, InfeasibleError, NumericalError) as exc:
        sys.stderr.write(_error_record(exc))
        return 1
    except MeeError as exc:
        sys.stderr.write(_error_record(exc))
        return 1


def main() -> None:
    sys.exit(run())

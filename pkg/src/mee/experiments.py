"""Monte Carlo verification harnesses.

Each experiment produces an :class:`ExperimentReport`: a list of measured
quantities with sub-batch standard errors, each paired with its analytic
reference (or explicitly marked as having none) and a pass/fail verdict at
the configured tolerance.  Reports serialize to JSON and re-parse losslessly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bounds import ConcentrationConstants, constants_for, tail_bound
from .canonical import BipartiteSpectrum, DensityMatrix, delta_deviation, rho_c_bipartite
from .errors import DomainError
from .sampling import (
    RngSpec,
    SampleBatch,
    chunk_layout,
    default_shell_width,
    gaussian_chunk,
    oracle_manifold_sample,
    spectrum_digest,
)
from .spectrum import EnergyFrame, Spectrum, harmonic_frame, harmonic_shift_solve

__all__ = [
    "Measured",
    "ExperimentReport",
    "TailCurve",
    "subbatch_mean_error",
    "estimate_reduced_dm",
    "empirical_tail",
    "moment_report",
    "moment_report_streamed",
    "reduced_dm_report",
    "spin_spectrum",
    "binary_entropy",
    "SpinEnsembleSpec",
    "spin_concentration_probe",
]

_SUB_BATCHES = 32


@dataclass(frozen=True)
class Measured:
    """One measured quantity with its analytic reference and pass rule.

    mode:
      sigmas    |value - reference| <= tolerance * std_error
      relative  |value/reference - 1| <= tolerance
      lower     value >= reference - tolerance * std_error
      upper     value <= reference (exact comparison, tolerance unused)
      factor    reference/tolerance <= value <= reference * tolerance
      none      informational, no reference, never fails
    """

    name: str
    value: float
    std_error: float | None = None
    reference: float | None = None
    mode: str = "none"
    tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.std_error is not None:
            object.__setattr__(self, "std_error", float(self.std_error))
        if self.reference is not None:
            object.__setattr__(self, "reference", float(self.reference))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @property
    def passed(self) -> bool | None:
        if self.mode == "none":
            return None
        if self.reference is None:
            raise DomainError(f"measured {self.name!r} has mode {self.mode} but no reference")
        if self.mode == "sigmas":
            return abs(self.value - self.reference) <= self.tolerance * (self.std_error or 0.0)
        if self.mode == "relative":
            return abs(self.value / self.reference - 1.0) <= self.tolerance
        if self.mode == "lower":
            return self.value >= self.reference - self.tolerance * (self.std_error or 0.0)
        if self.mode == "upper":
            return self.value <= self.reference
        if self.mode == "factor":
            return self.reference / self.tolerance <= self.value <= self.reference * self.tolerance
        raise DomainError(f"unknown pass mode {self.mode!r}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "std_error": self.std_error,
            "reference": self.reference,
            "mode": self.mode,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Measured":
        return cls(
            name=obj["name"],
            value=obj["value"],
            std_error=obj["std_error"],
            reference=obj["reference"],
            mode=obj["mode"],
            tolerance=obj["tolerance"],
        )


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    inputs: dict
    measured: tuple[Measured, ...]

    @property
    def passed(self) -> bool:
        """True when every quantity that has a pass rule passes."""
        return all(m.passed is not False for m in self.measured)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "measured": [m.to_json() for m in self.measured],
            "passed": self.passed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentReport":
        return cls(
            name=obj["name"],
            inputs=obj["inputs"],
            measured=tuple(Measured.from_json(m) for m in obj["measured"]),
        )


def subbatch_mean_error(
    values: np.ndarray,
    weights: np.ndarray | None = None,
    parts: int = _SUB_BATCHES,
) -> tuple[float, float]:
    """(weighted) mean and its standard error from ``parts`` contiguous sub-batches.

    Robust to mildly non-normal estimators; degenerates gracefully for tiny
    samples by using as many nonempty parts as available.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("cannot estimate from an empty sample")
    if weights is None:
        mean = float(values.mean())
    else:
        weights = np.asarray(weights, dtype=float)
        mean = float(np.dot(weights, values) / weights.sum())
    parts = max(1, min(parts, values.size))
    bounds = np.linspace(0, values.size, parts + 1, dtype=int)
    sub = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi == lo:
            continue
        if weights is None:
            sub.append(values[lo:hi].mean())
        else:
            sub.append(np.dot(weights[lo:hi], values[lo:hi]) / weights[lo:hi].sum())
    sub = np.asarray(sub)
    if sub.size < 2:
        return mean, float("inf")
    return mean, float(sub.std(ddof=1) / math.sqrt(sub.size))


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> list:
    """Apply ``fn`` over ``items`` and return results in input order.

    Worker count changes scheduling only; the reduction order (and therefore
    every numerical result) is fixed by the item order.
    """
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Reduced density matrices


def estimate_reduced_dm(batch: SampleBatch, dim_a: int, dim_b: int) -> DensityMatrix:
    """Weighted empirical reduced state of part A.

    Each sample is normalized before the partial trace, so the estimate has
    unit trace; Hermiticity and positive semidefiniteness hold by
    construction (the estimate is a convex combination of pure projectors).
    """
    if batch.count == 0:
        raise DomainError("batch is empty")
    if dim_a * dim_b != batch.dim:
        raise DomainError(
            f"dim_a * dim_b = {dim_a * dim_b} does not match state dimension {batch.dim}"
        )
    psi = batch.normalized_states().reshape(batch.count, dim_a, dim_b)
    if batch.weights is None:
        rho = np.einsum("mak,mbk->ab", psi, psi.conj()) / batch.count
    else:
        w = batch.weights / batch.weights.sum()
        rho = np.einsum("m,mak,mbk->ab", w, psi, psi.conj())
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def reduced_dm_report(
    bs: BipartiteSpectrum,
    energy: float,
    epsilon: float,
    count: int,
    rng: RngSpec,
    tolerance_sigmas: float = 5.0,
    workers: int = 1,
) -> tuple[ExperimentReport, DensityMatrix]:
    """Gaussian-sampler check of the canonical reduced state.

    Streams ``count`` Gaussian states over the flat bipartite spectrum,
    normalizes each, and measures (a) the per-sample deviation
    ||psi^A - rho_c^(n)||_2 against the analytic envelope sqrt(8)|A|*delta,
    and (b) the batch-mean reduced state.  Diagonal entries are reported
    informationally: the sampler targets the harmonic-shift profile, while
    rho_c^(n) carries the epsilon-multiplier shift; their gap is part of the
    deviation budget, not a failure.
    """
    dim_a, dim_b = bs.dim_a, bs.dim_b
    flat = Spectrum(tuple(bs.flat_levels()))
    frame = harmonic_frame(flat, energy)
    rho_ref = rho_c_bipartite(bs, energy, epsilon)
    consts = constants_for(bs.combined(), energy, epsilon)
    envelope = math.sqrt(8.0) * dim_a * delta_deviation(consts)

    layout = chunk_layout(count, flat.n)

    def one_chunk(item: tuple[int, int]):
        i, size = item
        psi = gaussian_chunk(frame, rng, i, size)
        psi = psi / np.linalg.norm(psi, axis=1, keepdims=True)
        psi = psi.reshape(size, dim_a, dim_b)
        rhos = np.einsum("mak,mbk->mab", psi, psi.conj())
        devs = np.linalg.norm(rhos - rho_ref.matrix, axis=(1, 2))
        return rhos.sum(axis=0), devs

    results = _map_ordered(one_chunk, list(enumerate(layout)), workers)
    rho_sum = np.zeros((dim_a, dim_a), dtype=complex)
    devs = []
    for part_sum, part_devs in results:
        rho_sum = rho_sum + part_sum
        devs.append(part_devs)
    devs = np.concatenate(devs) if devs else np.zeros(0)
    rho_hat = DensityMatrix(0.5 * (rho_sum + rho_sum.conj().T) / count)

    mean_dev, se_dev = subbatch_mean_error(devs)
    measured = [
        Measured("mean_hs_deviation", mean_dev, se_dev, envelope, "upper"),
        Measured("trace", rho_hat.trace, None, 1.0, "relative", 1e-10),
    ]
    diag_hat = rho_hat.diagonal
    diag_ref = rho_ref.diagonal
    for k in range(dim_a):
        measured.append(
            Measured(f"diag_{k}", float(diag_hat[k]), None, float(diag_ref[k]), "none")
        )
    report = ExperimentReport(
        name="reduced-dm",
        inputs={
            "bipartite": bs.to_json(),
            "energy": energy,
            "epsilon": epsilon,
            "count": count,
            "rng": rng.to_json(),
            "tolerance_sigmas": tolerance_sigmas,
            "envelope": envelope,
            "rho_c_diagonal": [float(x) for x in diag_ref],
            "rho_c_trace": rho_ref.trace,
            "shift_harmonic": frame.shift,
            "shift_constants": consts.frame.shift,
        },
        measured=tuple(measured),
    )
    return report, rho_hat


# ---------------------------------------------------------------------------
# Tail curves


@dataclass(frozen=True)
class TailCurve:
    """Empirical exceedance frequencies around the empirical median,
    optionally paired with the (clamped) analytic bound."""

    ts: np.ndarray
    frequencies: np.ndarray
    median: float
    lam: float
    bounds: np.ndarray | None = None

    def to_rows(self) -> list[tuple]:
        rows = []
        for i, t in enumerate(self.ts):
            row = [float(t), float(self.frequencies[i])]
            if self.bounds is not None:
                row.append(float(self.bounds[i]))
            rows.append(tuple(row))
        return rows


def _weighted_median(values: np.ndarray, weights: np.ndarray | None) -> float:
    if weights is None:
        return float(np.median(values))
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    return float(v[np.searchsorted(cw, 0.5 * cw[-1])])


def empirical_tail(
    batch: SampleBatch,
    f: Callable[[np.ndarray], float],
    ts: Sequence[float],
    lam: float = 1.0,
    constants: ConcentrationConstants | None = None,
) -> TailCurve:
    """Empirical Prob{|f(psi) - median| > lam * t} over a batch.

    Centered at the empirical (weighted) median, matching the bound's
    median-based statement.  When ``constants`` are given, each t is paired
    with the analytic bound clamped to [0, 1].
    """
    ts = np.asarray(list(ts), dtype=float)
    if np.any(np.diff(ts) < 0.0):
        raise DomainError("ts must be sorted ascending")
    values = np.asarray([float(f(state)) for state in batch.states])
    med = _weighted_median(values, batch.weights)
    dev = np.abs(values - med)
    if batch.weights is None:
        freqs = np.array([np.mean(dev > lam * t) for t in ts])
    else:
        wsum = batch.weights.sum()
        freqs = np.array([np.dot(batch.weights, dev > lam * t) / wsum for t in ts])
    bnds = None
    if constants is not None:
        bnds = np.array([min(1.0, tail_bound(constants, t, lam)) for t in ts])
    return TailCurve(ts=ts, frequencies=freqs, median=med, lam=lam, bounds=bnds)


# ---------------------------------------------------------------------------
# Gaussian moment identities


def _moment_measured(
    norm2: np.ndarray,
    hq: np.ndarray,
    frame: EnergyFrame,
    tolerance_sigmas: float,
    var_rtol: float,
) -> list[Measured]:
    n = frame.dim
    e_prime = frame.e_prime
    ratios = frame.e_prime / np.repeat(frame.shifted_levels, frame.base.degeneracies)
    var_norm_ref = float((ratios ** 2).sum()) / n ** 2
    mean_norm, se_norm = subbatch_mean_error(norm2)
    mean_h, se_h = subbatch_mean_error(hq)
    return [
        Measured("mean_norm_sq", mean_norm, se_norm, 1.0, "sigmas", tolerance_sigmas),
        Measured("mean_shifted_energy", mean_h, se_h, e_prime, "sigmas", tolerance_sigmas),
        Measured(
            "var_shifted_energy",
            float(hq.var(ddof=1)),
            None,
            e_prime ** 2 / n,
            "relative",
            var_rtol,
        ),
        Measured(
            "var_norm_sq",
            float(norm2.var(ddof=1)),
            None,
            var_norm_ref,
            "relative",
            var_rtol,
        ),
    ]


def _moment_inputs(frame: EnergyFrame, count: int, rng: RngSpec, **extra) -> dict:
    return {
        "spectrum": frame.base.to_json(),
        "energy": frame.energy,
        "shift": frame.shift,
        "count": count,
        "rng": rng.to_json(),
        **extra,
    }


def moment_report(
    batch: SampleBatch,
    frame: EnergyFrame,
    tolerance_sigmas: float = 5.0,
    var_rtol: float = 0.1,
) -> ExperimentReport:
    """Compare the four Gaussian moment identities on a materialized batch:
    means and variances of ||psi||^2 and <psi|H'|psi>."""
    if batch.meta.get("kind") != "gaussian":
        raise DomainError("moment report requires a gaussian batch")
    if batch.meta.get("spectrum") != spectrum_digest(frame.base) or not math.isclose(
        batch.meta.get("shift", math.nan), frame.shift, rel_tol=0, abs_tol=1e-12
    ):
        raise DomainError("batch was not generated from the given frame")
    levels = np.repeat(frame.shifted_levels, frame.base.degeneracies)
    p = np.abs(batch.states) ** 2
    norm2 = p.sum(axis=1)
    hq = p @ levels
    measured = _moment_measured(norm2, hq, frame, tolerance_sigmas, var_rtol)
    return ExperimentReport(
        name="moments",
        inputs=_moment_inputs(frame, batch.count, batch.rng_spec),
        measured=tuple(measured),
    )


def moment_report_streamed(
    frame: EnergyFrame,
    count: int,
    rng: RngSpec,
    tolerance_sigmas: float = 5.0,
    var_rtol: float = 0.1,
    workers: int = 1,
) -> ExperimentReport:
    """Same report as :func:`moment_report` without materializing the batch;
    identical numbers for identical (frame, count, rng)."""
    levels = np.repeat(frame.shifted_levels, frame.base.degeneracies)
    layout = chunk_layout(count, frame.dim)

    def one_chunk(item: tuple[int, int]):
        i, size = item
        psi = gaussian_chunk(frame, rng, i, size)
        p = np.abs(psi) ** 2
        return p.sum(axis=1), p @ levels

    results = _map_ordered(one_chunk, list(enumerate(layout)), workers)
    norm2 = np.concatenate([r[0] for r in results]) if results else np.zeros(0)
    hq = np.concatenate([r[1] for r in results]) if results else np.zeros(0)
    measured = _moment_measured(norm2, hq, frame, tolerance_sigmas, var_rtol)
    return ExperimentReport(
        name="moments",
        inputs=_moment_inputs(frame, count, rng, workers_invariant=True),
        measured=tuple(measured),
    )


# ---------------------------------------------------------------------------
# Non-interacting spins


def spin_spectrum(m: int) -> Spectrum:
    """Spectrum of m non-interacting spins with per-spin levels {0, 1}:
    level k has degeneracy C(m, k), total dimension 2^m."""
    if not (1 <= m <= 30):
        raise DomainError("m must lie in [1, 30]")
    return Spectrum(
        tuple(float(k) for k in range(m + 1)),
        tuple(math.comb(m, k) for k in range(m + 1)),
    )


def binary_entropy(gamma: float) -> float:
    """Binary entropy in bits, with the continuous limit 0 at the endpoints."""
    if not (0.0 <= gamma <= 1.0):
        raise DomainError("binary entropy is defined on [0, 1]")
    if gamma in (0.0, 1.0):
        return 0.0
    return float(-gamma * math.log2(gamma) - (1.0 - gamma) * math.log2(1.0 - gamma))


@dataclass(frozen=True)
class SpinEnsembleSpec:
    """Probe configuration: m spins, target energy alpha*m, cut level gamma*m."""

    m: int
    alpha: float
    gamma: float

    def __post_init__(self):
        if not (1 <= self.m <= 30):
            raise DomainError("m must lie in [1, 30]")
        if not (0.0 < self.alpha < 0.5):
            raise DomainError("alpha must lie in (0, 1/2)")
        if not (self.alpha < self.gamma < 0.5):
            raise DomainError("gamma must lie in (alpha, 1/2)")


def spin_concentration_probe(
    spec: SpinEnsembleSpec,
    count: int,
    rng: RngSpec,
    eta: float | None = None,
    max_draws: int | None = None,
) -> ExperimentReport:
    """Evidence that the spin ensemble admits no exponential concentration.

    Samples the energy manifold at E = alpha*m (Gaussian-proposal oracle:
    uniform-sphere acceptance at this energy is astronomically small in 2^m)
    and reports:

    * the occupation L of levels below gamma*m, which normalization forces
      to at least 1 - alpha/gamma;
    * the count of low levels against its entropy bound 2^(m H(gamma) + log2 m);
    * the implied ceiling 2 b / (1 - alpha/gamma) * n^(H(gamma) + log2(m)/m)
      on any exponential concentration rate (reported with b = 1);
    * the tail-bound constant c = 3 E'_min/(32 E') at the harmonic shift.
      The back-of-envelope scale for c is (3/32) * 2^-m; the actual value
      runs a factor ~1/(1 - 2 alpha) above it because the levels above the
      ground state also contribute to the harmonic sum.
    * the largest per-coordinate variance of Re(psi_i), informational.
    """
    spectrum = spin_spectrum(spec.m)
    n = 2 ** spec.m
    energy = spec.alpha * spec.m
    cut = spec.gamma * spec.m
    if eta is None:
        eta = default_shell_width(spectrum)
    if max_draws is None:
        # gaussian-proposal acceptance sits near 0.5% at m = 10
        max_draws = 400 * count

    batch = oracle_manifold_sample(
        spectrum, energy, eta, count, max_draws, rng, proposal="gaussian"
    )
    levels = spectrum.expand()
    low = levels < cut
    p = np.abs(batch.states) ** 2
    l_vals = p[:, low].sum(axis=1)
    l_mean, l_se = subbatch_mean_error(l_vals, batch.weights)
    r_mean, _ = subbatch_mean_error(1.0 - l_vals, batch.weights)

    low_count = int(sum(d for lv, d in zip(spectrum.levels, spectrum.degeneracies) if lv < cut))
    count_bound = 2.0 ** (spec.m * binary_entropy(spec.gamma) + math.log2(spec.m))
    floor = 1.0 - spec.alpha / spec.gamma
    kappa_ceiling = 2.0 / floor * n ** (binary_entropy(spec.gamma) + math.log2(spec.m) / spec.m)

    shift = harmonic_shift_solve(spectrum, energy)
    c_value = 3.0 * shift / (32.0 * (energy + shift))
    c_reference = (3.0 / 32.0) * 2.0 ** -spec.m

    w = batch.weights / batch.weights.sum()
    re2 = batch.states.real ** 2
    var_re = w @ re2 - (w @ batch.states.real) ** 2
    max_coord_var = float(var_re.max())

    measured = (
        Measured("occupation_below_cut", l_mean, l_se, floor, "lower", 5.0),
        Measured("partition_identity", l_mean + r_mean, None, 1.0, "relative", 1e-9),
        Measured("low_level_count", float(low_count), None, count_bound, "upper"),
        Measured("kappa_ceiling_b1", kappa_ceiling, None, None, "none"),
        Measured("tail_constant_c", c_value, None, c_reference, "factor", 2.0),
        Measured("max_coordinate_variance", max_coord_var, None, None, "none"),
    )
    return ExperimentReport(
        name="spins",
        inputs={
            "m": spec.m,
            "alpha": spec.alpha,
            "gamma": spec.gamma,
            "count": count,
            "accepted": batch.count,
            "rng": rng.to_json(),
            "eta": eta,
            "acceptance_rate": batch.meta["acceptance_rate"],
            "harmonic_shift": shift,
        },
        measured=measured,
    )

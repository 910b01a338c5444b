"""Samplers: Gaussian ensemble approximation, uniform sphere, exact shell oracle.

Reproducibility contract: a batch is a pure function of (seed, stream, count)
plus the sampler parameters.  Generation is split into fixed-size chunks
whose RNG streams are derived from (seed, stream, chunk_index), so the same
batch is produced bit-for-bit regardless of how many workers consume the
chunks or whether the batch is materialized or streamed.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DomainError, LowAcceptanceWarning
from .spectrum import EnergyFrame, Spectrum, harmonic_frame

__all__ = [
    "RngSpec",
    "SampleBatch",
    "chunk_layout",
    "default_shell_width",
    "sample_gaussian_ensemble",
    "sample_sphere",
    "oracle_manifold_sample",
    "gradient_norm",
]

# Scalars (real normal variates) per generation chunk; the layout depends
# only on this constant, count and n, never on worker count.
_CHUNK_SCALARS = 1 << 22


@dataclass(frozen=True)
class RngSpec:
    """Seed/stream pair naming an independent, reproducible random stream."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise DomainError("seed and stream must be nonnegative integers")

    def generator(self, chunk: int | None = None) -> np.random.Generator:
        # SFC64 is the fastest bulk-normal generator available here; the
        # reproducibility contract lives at the (seed, stream, chunk) level,
        # not in the bit-generator algorithm.
        key = (self.stream,) if chunk is None else (self.stream, chunk)
        return np.random.Generator(
            np.random.SFC64(np.random.SeedSequence(entropy=self.seed, spawn_key=key))
        )

    def to_json(self) -> dict:
        return {"seed": self.seed, "stream": self.stream}


@dataclass
class SampleBatch:
    """A set of complex state vectors with optional importance weights.

    ``meta`` records the sampler kind and its parameters (spectrum digest,
    energies, shell width, acceptance rate) so that estimators can verify
    they are fed a matching batch.  Arrays are frozen after construction.
    """

    states: np.ndarray
    weights: np.ndarray | None
    rng_spec: RngSpec
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 2:
            raise DomainError("states must be a (count, n) array")
        if not np.all(np.isfinite(states.view(float))):
            raise DomainError("states must be finite")
        states.flags.writeable = False
        self.states = states
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (states.shape[0],):
                raise DomainError("weights length must match the number of states")
            if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
                raise DomainError("weights must be positive and finite")
            w.flags.writeable = False
            self.weights = w

    @property
    def count(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def normalized_states(self) -> np.ndarray:
        """Unit-norm view of the states (Gaussian batches are unnormalized by design)."""
        norms = np.linalg.norm(self.states, axis=1, keepdims=True)
        return self.states / norms


def spectrum_digest(spectrum: Spectrum) -> str:
    payload = json.dumps(spectrum.to_json(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def chunk_layout(count: int, n: int) -> list[int]:
    """Chunk sizes (states per chunk) for a batch of ``count`` states in C^n."""
    if count < 0:
        raise DomainError("count must be nonnegative")
    per = max(1, _CHUNK_SCALARS // max(2 * n, 1))
    sizes = [per] * (count // per)
    if count % per:
        sizes.append(count % per)
    return sizes


def default_shell_width(spectrum: Spectrum) -> float:
    """Shell half-width 0.02 (E_max - E_min)/sqrt(n); the on-sphere energy
    spread scales like 1/sqrt(n), keeping the acceptance rate workable."""
    return 0.02 * (spectrum.e_max - spectrum.e_min) / math.sqrt(spectrum.n)


def _gaussian_sigmas(frame: EnergyFrame) -> np.ndarray:
    """Per-component standard deviation sqrt(E'/(2 n E'_k)) for Re and Im parts."""
    n = frame.dim
    levels = np.repeat(frame.shifted_levels, frame.base.degeneracies)
    return np.sqrt(frame.e_prime / (2.0 * n * levels))


def _check_gaussian_frame(frame: EnergyFrame) -> None:
    if frame.dim != frame.base.n:
        raise DomainError("gaussian sampling needs a frame over the full expanded spectrum")
    if not frame.is_harmonic():
        raise DomainError(
            "gaussian sampling requires the pure harmonic shift "
            f"(E'_H = {frame.e_prime_harm}, E' = {frame.e_prime})"
        )


def _complex_normals(rng: RngSpec, chunk: int, size: int, n: int) -> np.ndarray:
    # interleaved (re, im) draw reinterpreted as complex; single allocation
    z = rng.generator(chunk).standard_normal((size, n, 2))
    return z.view(np.complex128)[..., 0]


def gaussian_chunk(frame: EnergyFrame, rng: RngSpec, chunk: int, size: int) -> np.ndarray:
    """States of one chunk: Re and Im of each component drawn independently
    with density proportional to exp(-n E'_k x^2 / E')."""
    sig = _gaussian_sigmas(frame)
    return _complex_normals(rng, chunk, size, sig.size) * sig


def sphere_chunk(n: int, rng: RngSpec, chunk: int, size: int) -> np.ndarray:
    psi = _complex_normals(rng, chunk, size, n)
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def iter_gaussian_chunks(
    frame: EnergyFrame, count: int, rng: RngSpec
) -> Iterator[np.ndarray]:
    """Stream the batch chunk by chunk (constant memory); same values as
    :func:`sample_gaussian_ensemble` with the same RngSpec."""
    _check_gaussian_frame(frame)
    for i, size in enumerate(chunk_layout(count, frame.dim)):
        yield gaussian_chunk(frame, rng, i, size)


def sample_gaussian_ensemble(frame: EnergyFrame, count: int, rng: RngSpec) -> SampleBatch:
    """Approximate sampler of the fixed-expectation ensemble.

    Requires a harmonically shifted frame (E'_H = E'); the output states are
    intentionally *not* normalized -- their norm fluctuates around one with
    Var ||psi||^2 = (1/n^2) sum (E'/E'_k)^2, and expectation values follow
    the Gaussian moment identities.  Use ``normalized_states()`` for
    consumers that need exact unit vectors.
    """
    _check_gaussian_frame(frame)
    chunks = list(iter_gaussian_chunks(frame, count, rng))
    states = np.concatenate(chunks) if chunks else np.zeros((0, frame.dim), dtype=complex)
    meta = {
        "kind": "gaussian",
        "spectrum": spectrum_digest(frame.base),
        "energy": frame.energy,
        "shift": frame.shift,
        "normalized": False,
    }
    return SampleBatch(states=states, weights=None, rng_spec=rng, meta=meta)


def sample_sphere(n: int, count: int, rng: RngSpec) -> SampleBatch:
    """Uniform unit vectors on the complex sphere in C^n (normalized 2n normals)."""
    if n < 1:
        raise DomainError("dimension must be positive")
    chunks = [
        sphere_chunk(n, rng, i, size) for i, size in enumerate(chunk_layout(count, n))
    ]
    states = np.concatenate(chunks) if chunks else np.zeros((0, n), dtype=complex)
    return SampleBatch(
        states=states,
        weights=None,
        rng_spec=rng,
        meta={"kind": "sphere", "n": n, "normalized": True},
    )


def gradient_norm(spectrum: Spectrum, state: np.ndarray) -> float:
    """Tangential gradient norm of the energy function at a unit state:
    2 sqrt(sum E_k^2 |psi_k|^2 - (sum E_k |psi_k|^2)^2).

    Depends on |psi_k|^2 only, hence invariant under phases; vanishes exactly
    on eigenvectors.
    """
    psi = np.asarray(state, dtype=complex).ravel()
    levels = spectrum.expand()
    if psi.size != levels.size:
        raise DomainError(f"state has dimension {psi.size}, spectrum has {levels.size}")
    p = np.abs(psi) ** 2
    norm = p.sum()
    if abs(norm - 1.0) > 1e-9:
        raise DomainError(f"state must be normalized to 1e-9 (|psi|^2 = {norm})")
    e1 = float(np.dot(p, levels))
    e2 = float(np.dot(p, levels ** 2))
    return 2.0 * math.sqrt(max(e2 - e1 * e1, 0.0))


def oracle_manifold_sample(
    spectrum: Spectrum,
    energy: float,
    eta: float,
    count: int,
    max_draws: int,
    rng: RngSpec,
    proposal: str = "uniform",
) -> SampleBatch:
    """Exact small-n sampler of the constant-energy manifold via shell rejection.

    Draws proposals, keeps unit states with |<psi|H|psi> - E| < eta, and
    attaches importance weights so that weighted averages estimate
    Hausdorff-measure expectations as eta -> 0.  The shell has thickness
    proportional to the inverse tangential gradient norm, so every accepted
    state is reweighted by that norm.

    ``proposal="uniform"`` draws from the sphere (weights are exactly the
    gradient norms).  ``proposal="gaussian"`` draws from the harmonic-shift
    Gaussian ensemble and corrects by the exact density ratio, whose
    on-sphere form is <psi|H'|psi>^n; this keeps dimensions like 2^m
    reachable where uniform acceptance would be astronomically small.
    Gaussian-proposal weights are reported relative to their maximum.
    """
    if eta <= 0.0:
        raise DomainError("shell width eta must be positive")
    if count < 1:
        raise DomainError("count must be positive")
    if spectrum.all_equal:
        raise DomainError(
            "gradient norm vanishes identically for an all-equal spectrum; "
            "the shell reweighting is degenerate"
        )
    if not (spectrum.e_min < energy < spectrum.e_max):
        raise DomainError(
            f"energy {energy} outside the open level range "
            f"({spectrum.e_min}, {spectrum.e_max})"
        )
    if proposal not in ("uniform", "gaussian"):
        raise DomainError(f"unknown proposal {proposal!r}")

    n = spectrum.n
    levels = spectrum.expand()
    frame = harmonic_frame(spectrum, energy) if proposal == "gaussian" else None

    per = max(1, _CHUNK_SCALARS // (2 * n))
    accepted: list[np.ndarray] = []
    logw: list[np.ndarray] = []
    n_accepted = 0
    n_drawn = 0
    chunk = 0
    while n_accepted < count and n_drawn < max_draws:
        size = min(per, max_draws - n_drawn)
        if proposal == "uniform":
            raw = _complex_normals(rng, chunk, size, n)
        else:
            raw = gaussian_chunk(frame, rng, chunk, size)
        chunk += 1
        n_drawn += size
        # normalization deferred: accept on the normalized energy, then
        # rescale only the accepted rows
        p = np.abs(raw) ** 2
        nrm2 = p.sum(axis=1)
        e1 = (p @ levels) / nrm2
        mask = np.abs(e1 - energy) < eta
        if not np.any(mask):
            continue
        e1 = e1[mask]
        nrm2 = nrm2[mask]
        p_acc = p[mask] / nrm2[:, None]
        e2 = p_acc @ (levels ** 2)
        grad = 2.0 * np.sqrt(np.maximum(e2 - e1 ** 2, 0.0))
        keep = grad > 0.0
        psi_acc = raw[mask][keep] / np.sqrt(nrm2[keep, None])
        grad = grad[keep]
        lw = np.log(grad)
        if proposal == "gaussian":
            lw = lw + n * np.log(e1[keep] + frame.shift)
        accepted.append(psi_acc)
        logw.append(lw)
        n_accepted += psi_acc.shape[0]

    if n_accepted == 0:
        raise DomainError(
            f"no acceptances in {n_drawn} draws (eta = {eta}); widen the shell"
        )
    states = np.concatenate(accepted)[:count]
    lw = np.concatenate(logw)[:count]
    if proposal == "gaussian":
        weights = np.exp(lw - lw.max())
    else:
        weights = np.exp(lw)
    rate = n_accepted / n_drawn
    if states.shape[0] < count:
        warnings.warn(
            f"accepted only {states.shape[0]} of {count} requested states in "
            f"{n_drawn} draws (rate {rate:.3g})",
            LowAcceptanceWarning,
            stacklevel=2,
        )
    meta = {
        "kind": "oracle",
        "proposal": proposal,
        "spectrum": spectrum_digest(spectrum),
        "energy": energy,
        "eta": eta,
        "acceptance_rate": rate,
        "normalized": True,
        "weight_scale": "relative" if proposal == "gaussian" else "gradient-norm",
    }
    if frame is not None:
        meta["shift"] = frame.shift
    return SampleBatch(states=states, weights=weights, rng_spec=rng, meta=meta)

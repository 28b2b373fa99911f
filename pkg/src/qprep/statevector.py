"""Exact state-vector register with the unitary primitives of the algorithm.

Amplitudes are a dense complex array indexed by the computational basis
label x.  All operations return new StateVector instances; internal work
may vectorize over the amplitude index but is deterministic (numpy's
pairwise reductions do not depend on thread count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllMassInAuxRegion, DimensionMismatch

NORM_TOL = 1e-12

#: below this surviving probability a projection onto the payload is undefined
PROJECTION_EPS = 1e-15


@dataclass
class StateVector:
    """2^L complex amplitudes over an L-qubit register."""

    amps: np.ndarray
    num_qubits: int

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (1 << self.num_qubits,):
            raise DimensionMismatch(
                f"expected {1 << self.num_qubits} amplitudes, got {self.amps.shape}"
            )

    @property
    def dim(self) -> int:
        return self.amps.size

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.num_qubits)


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of measuring the auxiliary qubits.

    success is True iff all a outcomes were 0; post_state is the renormalized
    payload register on success and None otherwise.
    """

    success: bool
    p_fail: float
    post_state: StateVector | None


def predicate_mask(predicate, size: int) -> np.ndarray:
    """Normalize a predicate (bool array, index set, or callable) to a mask."""
    if isinstance(predicate, np.ndarray) and predicate.dtype == bool:
        if predicate.shape != (size,):
            raise DimensionMismatch(f"mask has shape {predicate.shape}, expected ({size},)")
        return predicate
    if callable(predicate):
        return np.fromiter((bool(predicate(x)) for x in range(size)), dtype=bool, count=size)
    mask = np.zeros(size, dtype=bool)
    mask[np.asarray(list(predicate), dtype=int)] = True
    return mask


def uniform_init(num_qubits: int) -> StateVector:
    """|Psi^0>: every amplitude (2^L)^{-1/2}, real."""
    dim = 1 << num_qubits
    return StateVector(np.full(dim, dim**-0.5, dtype=complex), num_qubits)


def apply_sign_oracle(state: StateVector, predicate) -> StateVector:
    """amps(x) -> (-1)^{predicate(x)} amps(x)."""
    mask = predicate_mask(predicate, state.dim)
    amps = state.amps.copy()
    amps[mask] *= -1.0
    return StateVector(amps, state.num_qubits)


def apply_diffusion(state: StateVector) -> StateVector:
    """Reflection about the uniform state: amps(x) -> 2*mean - amps(x)."""
    m = np.mean(state.amps)
    return StateVector(2.0 * m - state.amps, state.num_qubits)


def grover(state: StateVector, predicate, t: int) -> StateVector:
    """t repetitions of (diffusion o sign-oracle)."""
    if t < 0:
        raise ValueError(f"iteration count must be >= 0, got {t}")
    mask = predicate_mask(predicate, state.dim)
    amps = state.amps.copy()
    for _ in range(t):
        amps[mask] *= -1.0
        amps = 2.0 * np.mean(amps) - amps
    return StateVector(amps, state.num_qubits)


def apply_phase_stage(state: StateVector, spec) -> StateVector:
    """Apply U_1 ... U_{T'}: amps(x) *= exp(2 pi i sum_k c'_k(x) 2^-k).

    The accumulated exponent equals the T'-bit truncation of phi(x).
    """
    from .target_model import truncated_phase

    if state.dim != spec.n_states:
        raise DimensionMismatch(
            f"phase stage acts on the payload register of {spec.n_states} states, "
            f"got {state.dim}"
        )
    phases = truncated_phase(spec, spec.phase_bits)
    return StateVector(state.amps * np.exp(2j * math.pi * phases), state.num_qubits)


def measure_aux(state: StateVector, aux_qubits: int, mode: str = "project",
                rng=None, seed: int | None = None) -> MeasurementOutcome:
    """Measure the a most significant qubits; success means all outcomes 0.

    With the auxiliary qubits on top of the address, success is exactly
    x < N.  mode="project" always returns the renormalized x < N restriction
    together with p_fail; mode="sample" draws the outcome with the seeded
    generator and returns post_state=None on failure.
    """
    if mode not in ("project", "sample"):
        raise ValueError(f"unknown measurement mode {mode!r}")
    n_payload = state.dim >> aux_qubits
    p_fail = float(np.sum(np.abs(state.amps[n_payload:]) ** 2))
    p_fail = min(max(p_fail, 0.0), 1.0)
    if 1.0 - p_fail < PROJECTION_EPS:
        raise AllMassInAuxRegion(
            f"1 - p_fail = {1.0 - p_fail!r}; no amplitude on the payload register"
        )
    if mode == "sample":
        if rng is None:
            rng = np.random.default_rng(seed)
        if rng.random() < p_fail:
            return MeasurementOutcome(success=False, p_fail=p_fail, post_state=None)
    post = state.amps[:n_payload] / math.sqrt(1.0 - p_fail)
    payload_qubits = state.num_qubits - aux_qubits
    return MeasurementOutcome(
        success=True,
        p_fail=p_fail,
        post_state=StateVector(post, payload_qubits),
    )


def fidelity(s1: StateVector, s2: StateVector) -> float:
    """|<s1|s2>|."""
    if s1.dim != s2.dim:
        raise DimensionMismatch(f"dimensions differ: {s1.dim} vs {s2.dim}")
    return float(abs(np.vdot(s1.amps, s2.amps)))


def dump_amplitudes(state: StateVector, fh) -> None:
    """Write a `x,re,im` CSV exact to 17 significant digits."""
    fh.write("x,re,im\n")
    for x, a in enumerate(state.amps):
        fh.write(f"{x},{a.real:.17g},{a.imag:.17g}\n")


def load_amplitudes(fh) -> StateVector:
    """Read a CSV produced by dump_amplitudes."""
    header = fh.readline().strip()
    if header != "x,re,im":
        raise ValueError(f"expected header 'x,re,im', got {header!r}")
    values = []
    for line in fh:
        if not line.strip():
            continue
        _, re, im = line.split(",")
        values.append(complex(float(re), float(im)))
    num_qubits = int(math.log2(len(values)))
    if 1 << num_qubits != len(values):
        raise ValueError(f"amplitude count {len(values)} is not a power of 2")
    return StateVector(np.array(values), num_qubits)

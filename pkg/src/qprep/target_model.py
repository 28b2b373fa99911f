"""Classical problem instances and the oracle bit functions derived from them.

A target instance is a distribution p(x) and phase function phi(x) on
x in [0, N).  The amplitude oracles are the binary digits of
sqrt(eta*N*p(x)); the phase oracles are the binary digits of phi(x).
Everything here is exact enumeration over the (extended) index domain,
no quantum state involved.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainTooLarge,
    EtaConstraintViolated,
    EtaOutOfRange,
    NotPowerOfTwo,
    ProbabilityNotNormalized,
)

PROB_TOL = 1e-9

#: Largest state vector the library will enumerate / simulate by default.
DEFAULT_MAX_AMPLITUDES = 2**24

#: Binary digits of a double are only trustworthy to about this depth.
MAX_BIT_DEPTH = 52


def max_amplitudes_cap() -> int:
    """Enumeration cap, overridable through the QPREP_MAX_AMPS env var."""
    env = os.environ.get("QPREP_MAX_AMPS")
    return int(env) if env else DEFAULT_MAX_AMPLITUDES


@dataclass(frozen=True)
class TargetSpec:
    """A classical problem instance plus the algorithm parameters.

    n_states:   N, the payload domain size (an integer power of 2)
    probs:      p(x) for x in [0, N), summing to 1
    phases:     phi(x) in [0, 1) for x in [0, N)
    eta:        scaling parameter with p(x) <= 1/(eta*N) for all x
    amp_bits:   T, number of amplitude bits processed
    phase_bits: T', number of phase bits processed
    aux_qubits: a, number of auxiliary qubits
    """

    n_states: int
    probs: np.ndarray
    phases: np.ndarray
    eta: float
    amp_bits: int
    phase_bits: int
    aux_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))

    @property
    def domain_size(self) -> int:
        """Extended domain size 2^a * N."""
        return (1 << self.aux_qubits) * self.n_states

    @property
    def num_qubits(self) -> int:
        """L = log2(N) + a."""
        return self.n_states.bit_length() - 1 + self.aux_qubits

    @property
    def feature_scale(self) -> float:
        """1/sqrt(eta*N), the unit in which features are measured."""
        return 1.0 / math.sqrt(self.eta * self.n_states)


def default_eta(probs, n_states: int) -> float:
    """eta = 1/(2*N*max p), keeping sqrt(eta*N*p(x)) <= 1/sqrt(2).

    The factor 2 avoids the non-terminating all-ones binary expansion that
    would occur at sqrt(eta*N*p) = 1.
    """
    return 1.0 / (2.0 * n_states * float(np.max(np.asarray(probs, dtype=float))))


def validate_spec(spec: TargetSpec) -> None:
    """Check all TargetSpec invariants, raising on the first violated one.

    Raises NotPowerOfTwo, ProbabilityNotNormalized, EtaOutOfRange, or
    EtaConstraintViolated (which carries the offending x).
    """
    n = spec.n_states
    if n < 2 or (n & (n - 1)) != 0:
        raise NotPowerOfTwo(f"n_states must be an integer power of 2 >= 2, got {n}")
    total = float(np.sum(spec.probs))
    if abs(total - 1.0) > PROB_TOL:
        raise ProbabilityNotNormalized(f"sum p(x) = {total!r}, expected 1 within {PROB_TOL}")
    if not (0.0 < spec.eta < 1.0):
        raise EtaOutOfRange(f"eta must lie in (0, 1), got {spec.eta!r}")
    scaled = spec.eta * n * spec.probs
    bad = np.nonzero(scaled >= 1.0)[0]
    if bad.size:
        x = int(bad[0])
        raise EtaConstraintViolated(
            x,
            f"eta*N*p(x) = {scaled[x]!r} >= 1 at x={x}; "
            f"need p(x) <= 1/(eta*N) with sqrt(eta*N*p(x)) < 1",
        )


def amp_bit(spec: TargetSpec, k: int, x: int) -> int:
    """k-th binary digit c_k(x) of sqrt(eta*N*p(x)); 0 for x >= N."""
    if x >= spec.n_states:
        return 0
    s = math.sqrt(spec.eta * spec.n_states * spec.probs[x])
    return int(math.floor(s * 2.0**k)) % 2


def phase_bit(spec: TargetSpec, k: int, x: int) -> int:
    """k-th binary digit c'_k(x) of phi(x)."""
    return int(math.floor(spec.phases[x] * 2.0**k)) % 2


def amp_bit_matrix(spec: TargetSpec, depth: int) -> np.ndarray:
    """(N, depth) int8 matrix of c_k(x), columns k = 1..depth."""
    s = np.sqrt(spec.eta * spec.n_states * spec.probs)
    powers = 2.0 ** np.arange(1, depth + 1)
    return (np.floor(np.outer(s, powers)) % 2).astype(np.int8)


def truncated_amplitude(spec: TargetSpec, depth: int) -> np.ndarray:
    """depth-bit truncations of sqrt(eta*N*p(x)), i.e. sum_{k<=depth} c_k(x) 2^-k."""
    s = np.sqrt(spec.eta * spec.n_states * spec.probs)
    return np.floor(s * 2.0**depth) / 2.0**depth


def truncated_phase(spec: TargetSpec, depth: int | None = None) -> np.ndarray:
    """depth-bit truncations of phi(x); depth defaults to T'."""
    if depth is None:
        depth = spec.phase_bits
    return np.floor(spec.phases * 2.0**depth) / 2.0**depth


def prefix_key(bits) -> str:
    """Class key for a bit prefix, e.g. (1, 0, 1) -> '101'."""
    return "".join("1" if b else "0" for b in bits)


def refined_oracle(pack: "OraclePack", prefix: str, x: int) -> int:
    """Indicator that the first len(prefix) amplitude bits of x equal prefix.

    Computed through the product formula prod_k |c_k(x) - 1 + q_k| rather
    than direct comparison; both agree (see the test suite).
    """
    out = 1
    for k, q in enumerate(prefix, start=1):
        out *= abs(pack.amp_bit(k, x) - 1 + int(q))
        if out == 0:
            break
    return out


@dataclass(frozen=True)
class OraclePack:
    """Amplitude/phase bit functions plus exact solution and class counts.

    class_counts[k] maps a k-character prefix string to the number of points
    of the *extended* domain [0, 2^a*N) whose first k amplitude bits equal
    that prefix.  The all-zero prefix absorbs the (2^a - 1)*N auxiliary
    points.  solution_counts[k-1] is N_k, the number of x with c_k(x) = 1
    (all such x lie below N).
    """

    spec: TargetSpec
    bit_matrix: np.ndarray
    solution_counts: tuple
    class_counts: tuple
    domain_size: int
    _phase_bits_cache: np.ndarray = field(repr=False, default=None)

    @property
    def depth(self) -> int:
        return self.bit_matrix.shape[1]

    def amp_bit(self, k: int, x: int) -> int:
        """c_k(x) over the extended domain (0 for x >= N)."""
        if x >= self.spec.n_states:
            return 0
        if k <= self.depth:
            return int(self.bit_matrix[x, k - 1])
        return amp_bit(self.spec, k, x)

    def phase_bit(self, k: int, x: int) -> int:
        return phase_bit(self.spec, k, x)

    def prefix_of(self, x: int, k: int) -> str:
        """Level-k class key of x."""
        if x >= self.spec.n_states:
            return "0" * k
        return prefix_key(self.bit_matrix[x, :k])

    def class_count(self, prefix: str, restricted: bool = False) -> int:
        """Size of the class; restricted=True counts x < N only."""
        k = len(prefix)
        count = self.class_counts[k].get(prefix, 0)
        if restricted and prefix == "0" * k:
            count -= self.domain_size - self.spec.n_states
        return count

    def occupied(self, k: int) -> dict:
        """Level-k class counts as {prefix: count}, nonempty classes only."""
        return dict(self.class_counts[k])


def count_classes(spec: TargetSpec, depth: int | None = None,
                  max_amplitudes: int | None = None,
                  bit_matrix: np.ndarray | None = None) -> OraclePack:
    """Enumerate solution counts N_k and class counts N^k_q exactly.

    depth defaults to spec.amp_bits.  Passing an explicit bit_matrix
    ((N, depth) array of 0/1) bypasses floating-point bit extraction for
    callers that have exact pre-tabulated bits.
    """
    cap = max_amplitudes if max_amplitudes is not None else max_amplitudes_cap()
    if spec.domain_size > cap:
        raise DomainTooLarge(
            f"2^a*N = {spec.domain_size} exceeds the enumeration cap {cap}"
        )
    if depth is None:
        depth = spec.amp_bits
    if depth > MAX_BIT_DEPTH:
        raise ValueError(f"bit depth {depth} exceeds the double-precision limit {MAX_BIT_DEPTH}")
    if bit_matrix is None:
        bits = amp_bit_matrix(spec, depth)
    else:
        bits = np.asarray(bit_matrix, dtype=np.int8)
        if bits.shape != (spec.n_states, depth):
            raise ValueError(f"bit_matrix must have shape {(spec.n_states, depth)}")

    n, d = spec.n_states, spec.domain_size
    aux = d - n
    solution_counts = tuple(int(bits[:, k].sum()) for k in range(depth))
    levels = []
    for k in range(depth + 1):
        counts: dict = {}
        for x in range(n):
            key = prefix_key(bits[x, :k])
            counts[key] = counts.get(key, 0) + 1
        zero = "0" * k
        counts[zero] = counts.get(zero, 0) + aux
        levels.append(counts)
    return OraclePack(
        spec=spec,
        bit_matrix=bits,
        solution_counts=solution_counts,
        class_counts=tuple(levels),
        domain_size=d,
    )


def read_table(path, n_states: int):
    """Read a `x,p,phi` CSV table; missing rows read as p=0, phi=0.

    Returns (probs, phases) arrays of length n_states.
    """
    probs = np.zeros(n_states)
    phases = np.zeros(n_states)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["x", "p", "phi"]:
            raise ValueError(f"{path}: expected header 'x,p,phi', got {reader.fieldnames}")
        for row in reader:
            x = int(row["x"])
            if not 0 <= x < n_states:
                raise ValueError(f"{path}: row index {x} outside [0, {n_states})")
            probs[x] = float(row["p"])
            phases[x] = float(row["phi"])
    return probs, phases

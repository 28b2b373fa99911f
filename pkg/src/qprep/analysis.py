"""Feature extraction, target states, and machine checks of every bound.

The pre-measurement state is piecewise constant on the level-T oracle
classes, with class amplitude B^T + sum_j q_j h_j.  This module recovers
(B^T, h_1..h_T) from a simulated state, compares the realized features
and fidelities against the analytic guarantees, and packages everything
into a serializable run report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureViolation
from .statevector import StateVector, fidelity
from .target_model import OraclePack, TargetSpec, truncated_amplitude, truncated_phase

CLASS_TOL = 1e-9
PAIR_TOL = 1e-6
REAL_TOL = 1e-12

HOLDS = "holds"
VIOLATED = "violated"
NOT_APPLICABLE = "not_applicable"


def real_target(spec: TargetSpec) -> StateVector:
    """sum_x sqrt(p(x)) |x> on the payload register (phases set to zero)."""
    payload_qubits = spec.n_states.bit_length() - 1
    return StateVector(np.sqrt(spec.probs).astype(complex), payload_qubits)


def full_target(spec: TargetSpec) -> StateVector:
    """sum_x sqrt(p(x)) e^{2 pi i phi(x)} |x>."""
    payload_qubits = spec.n_states.bit_length() - 1
    amps = np.sqrt(spec.probs) * np.exp(2j * math.pi * spec.phases)
    return StateVector(amps, payload_qubits)


@dataclass(frozen=True)
class FeatureReport:
    """Realized features of a pre-measurement state.

    h[j] is None when bit j+1 never occurs set among occupied classes (it
    never influenced the state).  h_identifiable marks features that are
    uniquely determined by the occupied classes; the others are filled by
    the consistent solution closest to the target values.
    """

    h: tuple
    h_target: tuple
    h_err: tuple
    h_defined: tuple
    h_identifiable: tuple
    h_bound: float
    b_T: float
    max_class_dev: float
    max_pair_spread: float
    reconstruction_residual: float


def extract_features(state: StateVector, pack: OraclePack, T: int) -> FeatureReport:
    """Recover B^T and the features h_1..h_T from a level-T structured state.

    B^T is the amplitude of the auxiliary region.  Where an occupied class
    pair differing in a single bit exists, h_j is their amplitude
    difference; the full vector is the exact solution of the class
    equations closest to the targets 2^-j/sqrt(eta*N).  Raises
    StructureViolation when class amplitudes are not constant within
    1e-9, pair estimates of one h_j spread more than 1e-6, or no exact
    solution exists.
    """
    spec = pack.spec
    n = spec.n_states
    amps = state.amps
    if state.dim != pack.domain_size:
        raise StructureViolation(
            f"state has {state.dim} amplitudes, pack domain is {pack.domain_size}"
        )
    if float(np.max(np.abs(amps.imag))) > REAL_TOL:
        raise StructureViolation("pre-measurement state is not real within 1e-12")
    re = amps.real

    groups: dict = {}
    for x in range(n):
        groups.setdefault(pack.prefix_of(x, T), []).append(re[x])
    zero = "0" * T
    class_lo = {p: min(v) for p, v in groups.items()}
    class_hi = {p: max(v) for p, v in groups.items()}
    class_sum = {p: sum(v) for p, v in groups.items()}
    class_n = {p: len(v) for p, v in groups.items()}
    aux = re[n:]
    class_lo[zero] = min(class_lo.get(zero, math.inf), float(aux.min()))
    class_hi[zero] = max(class_hi.get(zero, -math.inf), float(aux.max()))
    class_sum[zero] = class_sum.get(zero, 0.0) + float(aux.sum())
    class_n[zero] = class_n.get(zero, 0) + aux.size

    max_dev = max(class_hi[p] - class_lo[p] for p in class_lo)
    if max_dev > CLASS_TOL:
        raise StructureViolation(
            f"class amplitudes vary by {max_dev:.3e} > {CLASS_TOL} within a class"
        )
    class_amp = {p: class_sum[p] / class_n[p] for p in class_sum}
    b_T = class_amp[zero]

    prefixes = sorted(class_amp)
    M = np.array([[1.0 if c == "1" else 0.0 for c in p] for p in prefixes])
    y = np.array([class_amp[p] - b_T for p in prefixes])

    # pair estimates: occupied classes differing in exactly one bit
    spreads = []
    for j in range(T):
        estimates = [
            class_amp[p] - class_amp[partner]
            for p in prefixes
            if p[j] == "1" and (partner := p[:j] + "0" + p[j + 1:]) in class_amp
        ]
        if len(estimates) > 1:
            spreads.append(max(estimates) - min(estimates))
    max_spread = max(spreads, default=0.0)
    if max_spread > PAIR_TOL:
        raise StructureViolation(
            f"single-bit pair estimates of a feature spread by {max_spread:.3e} > {PAIR_TOL}"
        )

    scale = spec.feature_scale
    h_target = np.array([2.0**-(j + 1) * scale for j in range(T)])
    correction, *_ = np.linalg.lstsq(M, y - M @ h_target, rcond=None)
    h = h_target + correction
    residual = float(np.max(np.abs(M @ h - y))) if prefixes else 0.0
    if residual > CLASS_TOL:
        raise StructureViolation(
            f"class amplitudes are inconsistent with a feature decomposition "
            f"(residual {residual:.3e} > {CLASS_TOL})"
        )

    defined = tuple(bool(np.any(M[:, j] == 1.0)) for j in range(T))
    rank = np.linalg.matrix_rank(M) if prefixes else 0
    identifiable = tuple(
        defined[j]
        and np.linalg.matrix_rank(np.vstack([M, np.eye(T)[j]])) == rank
        for j in range(T)
    )
    h_bound = 2.0 ** (1.0 - spec.aux_qubits / 2.0) * scale
    h_out = tuple(float(h[j]) if defined[j] else None for j in range(T))
    h_err = tuple(
        abs(h_out[j] - h_target[j]) if defined[j] else None for j in range(T)
    )
    return FeatureReport(
        h=h_out,
        h_target=tuple(float(v) for v in h_target),
        h_err=h_err,
        h_defined=defined,
        h_identifiable=identifiable,
        h_bound=h_bound,
        b_T=b_T,
        max_class_dev=float(max_dev),
        max_pair_spread=float(max_spread),
        reconstruction_residual=residual,
    )


def reconstruct_state(features: FeatureReport, pack: OraclePack, T: int) -> np.ndarray:
    """B^T + sum_j c_j(x) h_j over the extended domain (undefined h as 0)."""
    n, d = pack.spec.n_states, pack.domain_size
    h = np.array([v if v is not None else 0.0 for v in features.h])
    out = np.full(d, features.b_T)
    bits = pack.bit_matrix[:, :T].astype(float)
    out[:n] += bits @ h
    return out


_OPS = {
    "<": lambda m, b: m < b,
    "<=": lambda m, b: m <= b,
    ">": lambda m, b: m > b,
    ">=": lambda m, b: m >= b,
}


@dataclass(frozen=True)
class BoundCheck:
    """One bound or identity: the measured value against its limit."""

    name: str
    measured: float
    bound: float
    op: str
    status: str

    def as_dict(self) -> dict:
        return {
            "measured": self.measured,
            "bound": self.bound,
            "op": self.op,
            "status": self.status,
        }


def evaluate_status(measured: float, bound: float, op: str,
                    applicable: bool = True) -> str:
    if not applicable:
        return NOT_APPLICABLE
    return HOLDS if _OPS[op](measured, bound) else VIOLATED


def _check(name, measured, bound, op, applicable=True) -> BoundCheck:
    measured, bound = float(measured), float(bound)
    return BoundCheck(
        name=name,
        measured=measured,
        bound=bound,
        op=op,
        status=evaluate_status(measured, bound, op, applicable),
    )


@dataclass(frozen=True)
class BoundsReport:
    """Fidelities and failure probability against the analytic guarantees."""

    fid_real_pre: float
    fid_real_post: float
    fid_total: float
    p_fail: float
    bound_fid_pre: float
    bound_p_fail: float
    bound_total: float
    alpha_bound: float
    max_alpha_sq: float
    checks: tuple


def evaluate_bounds(spec: TargetSpec, plan, artifacts) -> BoundsReport:
    """Measure all fidelities of a run and compare them to their bounds.

    Violations become report entries, never exceptions.  A fidelity bound
    that is nonpositive, or a probability bound above 1, is reported as
    not_applicable.
    """
    T, a, eta = spec.amp_bits, spec.aux_qubits, spec.eta
    psi_T = artifacts.psi_T
    target_r = real_target(spec)
    fid_pre = float(abs(np.vdot(target_r.amps, psi_T.amps[: spec.n_states])))
    fid_post = fidelity(target_r, artifacts.psi_tilde_r)
    fid_total = fidelity(full_target(spec), artifacts.psi_tilde)
    p_fail = artifacts.outcome.p_fail

    bound_fid_pre = 1.0 - 3.0 * T * 2.0 ** (-a / 2.0) / eta
    bound_p_fail = 16.0 * T * 2.0 ** (-a / 2.0) / eta
    bound_total = bound_fid_pre * (1.0 - 2.0 ** (-2 * spec.phase_bits - 1))
    alpha_bound = 4.0 / (eta * spec.domain_size)
    max_alpha_sq = max((al**2 for al in artifacts.stage_alphas), default=0.0)

    checks = (
        _check("fid_real_pre", fid_pre, bound_fid_pre, ">",
               applicable=bound_fid_pre > 0.0),
        _check("p_fail", p_fail, bound_p_fail, "<=",
               applicable=bound_p_fail <= 1.0),
        _check("fid_total", fid_total, bound_total, ">",
               applicable=bound_total > 0.0),
        _check("alpha_sq", max_alpha_sq, alpha_bound, "<",
               applicable=bool(artifacts.stage_alphas)),
    )
    return BoundsReport(
        fid_real_pre=fid_pre,
        fid_real_post=fid_post,
        fid_total=fid_total,
        p_fail=p_fail,
        bound_fid_pre=bound_fid_pre,
        bound_p_fail=bound_p_fail,
        bound_total=bound_total,
        alpha_bound=alpha_bound,
        max_alpha_sq=max_alpha_sq,
        checks=checks,
    )


@dataclass(frozen=True)
class DeltaBReport:
    """Decomposition of amplitude errors into delta(x) and the tail b(x).

    delta(x) collects the feature errors seen by x; b(x) is the amplitude
    tail beyond T bits.  U and V are the coefficients of the normalization
    quadratic (B^T)^2 + 2 U B^T + V = 0.
    """

    max_abs_delta: float
    delta_bound: float
    max_b: float
    min_b: float
    b_bound: float
    U: float
    V: float
    quad_residual: float
    b_T_bound: float
    checks: tuple


def delta_b_decomposition(spec: TargetSpec, features: FeatureReport,
                          pack: OraclePack) -> DeltaBReport:
    """Compute delta(x), b(x), the quadratic coefficients, and their bounds."""
    T = len(features.h)
    scale = spec.feature_scale
    n = spec.n_states
    h = np.array([v if v is not None else features.h_target[j]
                  for j, v in enumerate(features.h)])
    h_target = np.asarray(features.h_target)
    bits = pack.bit_matrix[:, :T].astype(float)
    delta = bits @ (h - h_target)
    sqrt_p = np.sqrt(spec.probs)
    b = sqrt_p - truncated_amplitude(spec, T) * scale

    d = spec.domain_size
    U = float(np.sum(sqrt_p + delta - b) / d)
    V = float(np.sum((2.0 * sqrt_p + delta - b) * (delta - b)) / d)
    b_T = features.b_T
    quad_residual = abs(b_T**2 + 2.0 * U * b_T + V)

    delta_bound = 2.0 * T * 2.0 ** (-spec.aux_qubits / 2.0) * scale
    b_bound = 2.0**-T * scale
    b_T_bound = 4.0 * math.sqrt(T) * 2.0 ** (-3.0 * spec.aux_qubits / 4.0) * scale
    max_abs_delta = float(np.max(np.abs(delta))) if n else 0.0
    max_b, min_b = float(np.max(b)), float(np.min(b))

    checks = (
        _check("delta", max_abs_delta, delta_bound, "<="),
        _check("b_tail_upper", max_b, b_bound, "<="),
        _check("b_tail_nonneg", min_b, -1e-15, ">="),
        _check("b_T", abs(b_T), b_T_bound, "<="),
        _check("quad_residual", quad_residual, CLASS_TOL, "<="),
    )
    return DeltaBReport(
        max_abs_delta=max_abs_delta,
        delta_bound=delta_bound,
        max_b=max_b,
        min_b=min_b,
        b_bound=b_bound,
        U=U,
        V=V,
        quad_residual=quad_residual,
        b_T_bound=b_T_bound,
        checks=checks,
    )


@dataclass(frozen=True)
class PhaseReport:
    """Phase-stage loss bound and the phase truncation error."""

    loss_bound: float
    max_truncation_err: float
    truncation_bound: float
    checks: tuple


def phase_error_bound(spec: TargetSpec) -> PhaseReport:
    """Return 2^{-2T'-1} and verify |phi - phi~| <= 2^{-T'} for all x."""
    loss_bound = 2.0 ** (-2 * spec.phase_bits - 1)
    err = np.abs(spec.phases - truncated_phase(spec))
    max_err = float(np.max(err)) if err.size else 0.0
    trunc_bound = 2.0**-spec.phase_bits
    checks = (
        _check("phase_truncation", max_err, trunc_bound, "<="),
    )
    return PhaseReport(
        loss_bound=loss_bound,
        max_truncation_err=max_err,
        truncation_bound=trunc_bound,
        checks=checks,
    )

"""End-to-end orchestration: oracles -> plan -> Grover stages -> measurement
-> phase stage -> run report."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analysis
from .biham import rotation_params, split_averages
from .errors import RetriesExhausted
from .scheduler import (
    EXTENDED,
    PreparationPlan,
    compute_schedule,
    oracle_call_budget,
    plan_to_dict,
)
from .statevector import (
    MeasurementOutcome,
    StateVector,
    apply_phase_stage,
    grover,
    measure_aux,
    uniform_init,
)
from .target_model import OraclePack, TargetSpec, count_classes, validate_spec


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run bit for bit."""

    spec: TargetSpec
    convention: str = EXTENDED
    measurement_mode: str = "project"
    seed: int = 0
    max_retries: int = 16
    record_intermediate: bool = False
    max_amplitudes: int | None = None
    skip_cutoff: float | None = None


@dataclass(frozen=True)
class RunArtifacts:
    """States and metadata produced by one preparation run."""

    plan: PreparationPlan
    pack: OraclePack
    psi_T: StateVector
    outcome: MeasurementOutcome
    psi_tilde_r: StateVector
    psi_tilde: StateVector
    snapshots: tuple | None
    retries_used: int
    stage_alphas: tuple


def stage_mask(pack: OraclePack, k: int) -> np.ndarray:
    """Oracle mask of O_k over the extended domain (0 beyond x >= N)."""
    mask = np.zeros(pack.domain_size, dtype=bool)
    mask[: pack.spec.n_states] = pack.bit_matrix[:, k - 1] == 1
    return mask


def prepare(config: RunConfig) -> RunArtifacts:
    """Execute the full preparation pipeline.

    project mode conditions on measurement success deterministically;
    sample mode draws outcomes from the seeded generator and starts over
    on failure, up to max_retries times (the plan depends only on global
    counts, so each retry re-executes the identical schedule).
    """
    spec = config.spec
    validate_spec(spec)
    if config.measurement_mode == "sample" and config.max_retries < 1:
        raise ValueError("max_retries must be >= 1 in sample mode")
    pack = count_classes(spec, max_amplitudes=config.max_amplitudes)
    plan = compute_schedule(pack, spec, config.convention, config.skip_cutoff)

    psi = uniform_init(spec.num_qubits)
    snapshots = [] if config.record_intermediate else None
    alphas = []
    for k in range(1, spec.amp_bits + 1):
        t_k = plan.times[k - 1]
        if t_k > 0:
            mask = stage_mask(pack, k)
            alphas.append(rotation_params(split_averages(psi, mask)).alpha)
            psi = grover(psi, mask, t_k)
        if snapshots is not None:
            snapshots.append(psi.copy())
    psi_T = psi

    if config.measurement_mode == "project":
        outcome = measure_aux(psi_T, spec.aux_qubits, mode="project")
        retries_used = 0
    else:
        rng = np.random.default_rng(config.seed)
        outcome = None
        retries_used = 0
        for _ in range(config.max_retries):
            outcome = measure_aux(psi_T, spec.aux_qubits, mode="sample", rng=rng)
            if outcome.success:
                break
            retries_used += 1
        if outcome is None or not outcome.success:
            raise RetriesExhausted(
                f"auxiliary measurement failed {config.max_retries} times "
                f"(p_fail = {outcome.p_fail if outcome else 'unknown'})"
            )

    psi_tilde_r = outcome.post_state
    psi_tilde = apply_phase_stage(psi_tilde_r, spec)
    return RunArtifacts(
        plan=plan,
        pack=pack,
        psi_T=psi_T,
        outcome=outcome,
        psi_tilde_r=psi_tilde_r,
        psi_tilde=psi_tilde,
        snapshots=tuple(snapshots) if snapshots is not None else None,
        retries_used=retries_used,
        stage_alphas=tuple(alphas),
    )


def level_flatness(state: StateVector, pack: OraclePack, k: int):
    """(max within-class amplitude spread, max |imag|) at class level k."""
    n = pack.spec.n_states
    re = state.amps.real
    lo: dict = {}
    hi: dict = {}
    for x in range(n):
        p = pack.prefix_of(x, k)
        v = re[x]
        lo[p] = min(lo.get(p, v), v)
        hi[p] = max(hi.get(p, v), v)
    zero = "0" * k
    aux = re[n:]
    lo[zero] = min(lo.get(zero, math.inf), float(aux.min()))
    hi[zero] = max(hi.get(zero, -math.inf), float(aux.max()))
    spread = max(hi[p] - lo[p] for p in lo)
    return spread, float(np.max(np.abs(state.amps.imag)))


def run_report(config: RunConfig, artifacts: RunArtifacts | None = None) -> dict:
    """Prepare, evaluate every bound, and serialize the result.

    The report carries each measured quantity alongside its bound with a
    status of holds, violated, or not_applicable; `pass` is true iff no
    check is violated.  Passing precomputed artifacts skips the prepare
    step (they must come from the same config).
    """
    spec = config.spec
    if artifacts is None:
        artifacts = prepare(config)
    plan = artifacts.plan
    pack = artifacts.pack
    T = spec.amp_bits

    features = analysis.extract_features(artifacts.psi_T, pack, T)
    bounds = analysis.evaluate_bounds(spec, plan, artifacts)
    deltab = analysis.delta_b_decomposition(spec, features, pack)
    phase = analysis.phase_error_bound(spec)

    recon = analysis.reconstruct_state(features, pack, T)
    recon_err = float(np.max(np.abs(recon - artifacts.psi_T.amps.real)))

    d, n = spec.domain_size, spec.n_states
    p_fail_identity = abs(bounds.p_fail - (d - n) * features.b_T**2)
    post_identity = abs(
        bounds.fid_real_post * math.sqrt(1.0 - bounds.p_fail) - bounds.fid_real_pre
    )
    phase_chain_slack = bounds.fid_total - bounds.fid_real_post * (1.0 - phase.loss_bound)

    active = [
        k for k in range(1, T + 1)
        if k not in plan.skipped and features.h_defined[k - 1]
    ]
    max_h_err = max((features.h_err[k - 1] for k in active), default=0.0)

    with_solutions = [
        k for k in range(1, T + 1)
        if k not in plan.skipped and plan.solution_counts[k - 1] > 0
    ]
    t_margin = max(
        (plan.times[k - 1] / (math.pi * math.sqrt(d / plan.solution_counts[k - 1]))
         for k in with_solutions),
        default=0.0,
    )
    omega_margin = min(
        (plan.omegas[k - 1] / (2.0 * math.sqrt(plan.solution_counts[k - 1] / d))
         for k in with_solutions),
        default=1.0,
    )

    checks = [
        analysis._check("feature_bound", max_h_err, features.h_bound, "<",
                        applicable=bool(active)),
        *bounds.checks,
        *deltab.checks,
        *phase.checks,
        analysis._check("iteration_bound", t_margin, 1.0, "<=",
                        applicable=bool(with_solutions)),
        analysis._check("omega_lower_bound", omega_margin, 1.0, ">=",
                        applicable=bool(with_solutions)),
        analysis._check("p_fail_identity", p_fail_identity, 1e-10, "<="),
        analysis._check("post_measurement_identity", post_identity, 1e-10, "<="),
        analysis._check("phase_chain_slack", phase_chain_slack, -1e-12, ">="),
        analysis._check("reconstruction", recon_err, 1e-9, "<="),
    ]
    if artifacts.snapshots is not None:
        worst = 0.0
        for k, snap in enumerate(artifacts.snapshots, start=1):
            spread, imag = level_flatness(snap, pack, k)
            worst = max(worst, spread, imag)
        checks.append(
            analysis._check("snapshot_structure", worst, 1e-9, "<=")
        )

    budget, budget_bound = oracle_call_budget(plan, spec.phase_bits)
    report = {
        "instance": {
            "N": n,
            "a": spec.aux_qubits,
            "T": T,
            "T'": spec.phase_bits,
            "eta": spec.eta,
            "convention": config.convention,
            "mode": config.measurement_mode,
            "seed": config.seed,
        },
        "plan": plan_to_dict(plan, spec),
        "measured": {
            "fid_real_pre": bounds.fid_real_pre,
            "fid_real_post": bounds.fid_real_post,
            "fid_total": bounds.fid_total,
            "p_fail": bounds.p_fail,
            "b_T": features.b_T,
            "h": list(features.h),
            "h_target": list(features.h_target),
            "h_err": list(features.h_err),
            "h_defined": list(features.h_defined),
            "h_identifiable": list(features.h_identifiable),
            "max_class_dev": features.max_class_dev,
            "max_pair_spread": features.max_pair_spread,
            "max_alpha_sq": bounds.max_alpha_sq,
            "U": deltab.U,
            "V": deltab.V,
            "max_abs_delta": deltab.max_abs_delta,
            "max_b": deltab.max_b,
            "max_phase_truncation_err": phase.max_truncation_err,
            "retries_used": artifacts.retries_used,
            "oracle_calls": budget,
        },
        "bounds": {c.name: c.as_dict() for c in checks},
        "diagnostics": list(plan.diagnostics),
        "pass": all(c.status != analysis.VIOLATED for c in checks),
    }
    return report

"""Iteration-count planning from exact class counts.

The plan for stage k is derived from ideal k-bit model states whose class
amplitudes carry the exact target features 2^-j/sqrt(eta*N).  Solving the
average-rotation equation for the model initial and final ratios gives an
unrounded iteration count, which is rounded to an integer.

Rounding is parity-aware: a Grover stage flips the sign of bad-side
deviations once per iteration, so a stage whose bad side spans classes
with more than one amplitude value must use an even number of iterations
or it scrambles the features built by earlier stages.  Stage 1 and stages
whose bad side is a single class (the uniform instance, for example) are
unrestricted.  The planner tracks the realized class amplitudes exactly
(a classical computation over at most N+1 classes) to decide which stages
are parity-locked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .biham import AverageSplit, predict_averages, rotation_angle, rotation_params
from .errors import NoRealRoot
from .target_model import OraclePack, TargetSpec

EXTENDED = "extended"
PAPER_LITERAL = "paper-literal"
CONVENTIONS = (EXTENDED, PAPER_LITERAL)

#: realized class amplitudes closer than this count as equal (skipped-stage merges)
AMP_MERGE_TOL = 1e-12


def choose_T(a: int) -> int:
    """Smallest positive integer T with 2^-T/(2T^2) <= 2^-a."""
    T = 1
    while 2.0**-T / (2.0 * T * T) > 2.0**-a:
        T += 1
    return T


def default_skip_cutoff(a: int, T: int) -> float:
    """Default threshold on N_k/N below which a stage is skipped."""
    return 2.0 ** (-a / 2.0) / T


@dataclass(frozen=True)
class ModelState:
    """Ideal k-bit approximation state, constant on level-k classes.

    Class amplitudes are b_prime + sum_j q_j 2^-j/sqrt(eta*N); b_prime is
    fixed by normalization over the extended domain.
    """

    level: int
    b_prime: float
    class_counts: dict
    feature_scale: float

    def class_amp(self, prefix: str) -> float:
        return self.b_prime + _prefix_value(prefix) * self.feature_scale

    def norm_sq(self) -> float:
        return sum(c * self.class_amp(p) ** 2 for p, c in self.class_counts.items())


def _prefix_value(prefix: str) -> float:
    """sum_j q_j 2^-j for a prefix string."""
    return sum(2.0 ** -(j + 1) for j, q in enumerate(prefix) if q == "1")


def model_state(pack: OraclePack, k: int) -> ModelState:
    """Solve the normalization quadratic for B'^k and return the model state.

    Of the two real roots the one with smaller absolute value is selected;
    it is the nonnegative root and reproduces the uniform state at k = 0.
    """
    counts = pack.class_counts[k]
    d = pack.domain_size
    scale = pack.spec.feature_scale
    m1 = sum(c * _prefix_value(p) * scale for p, c in counts.items())
    m2 = sum(c * (_prefix_value(p) * scale) ** 2 for p, c in counts.items())
    disc = m1 * m1 - d * (m2 - 1.0)
    if disc < 0.0:
        raise NoRealRoot(
            f"level-{k} normalization quadratic has discriminant {disc!r} < 0"
        )
    b_prime = (-m1 + math.sqrt(disc)) / d
    return ModelState(level=k, b_prime=b_prime, class_counts=dict(counts), feature_scale=scale)


def _split_sums(pack: OraclePack, k: int, amp_of, restricted: bool):
    """Sum of count*amplitude over level-k classes, split by the last bit.

    amp_of maps a level-(k-1) prefix to the amplitude of its extension;
    restricted drops the auxiliary region from the q_k = 0 side.
    """
    good_sum = bad_sum = 0.0
    good_n = bad_n = 0
    for prefix, count in pack.class_counts[k].items():
        if restricted and prefix == "0" * k:
            count -= pack.domain_size - pack.spec.n_states
            if count == 0:
                continue
        value = amp_of(prefix)
        if prefix[-1] == "1":
            good_sum += count * value
            good_n += count
        else:
            bad_sum += count * value
            bad_n += count
    return good_sum, good_n, bad_sum, bad_n


def _ratio(good_sum, good_n, bad_sum, bad_n) -> float:
    g = good_sum / good_n
    if bad_n == 0 or bad_sum == 0.0:
        return math.copysign(math.inf, g)
    return g / (bad_sum / bad_n)


def average_ratios(pack: OraclePack, k: int, convention: str = EXTENDED):
    """Model-state average ratios (ini, fin) for stage k.

    ini splits the level-(k-1) model state by oracle O_k; fin splits the
    level-k model state.  Under `extended` the averages run over the full
    2^a*N domain; under `paper-literal` the q_k = 0 side is restricted to
    x < N, reproducing the (N - N_k)/N_k prefactor of the displayed ratio
    formulas.  An empty or zero denominator yields signed infinity, which
    the arctan in the rotation solve maps to +-pi/2.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown counts convention {convention!r}")
    restricted = convention == PAPER_LITERAL
    prev = model_state(pack, k - 1)
    cur = model_state(pack, k)
    ini = _ratio(*_split_sums(pack, k, lambda p: prev.class_amp(p[:-1]), restricted))
    fin = _ratio(*_split_sums(pack, k, lambda p: cur.class_amp(p), restricted))
    return ini, fin


@dataclass(frozen=True)
class PreparationPlan:
    """Grover schedule t_1..t_T plus the quantities it was derived from."""

    times: tuple
    omegas: tuple
    skipped: tuple
    ratios_ini: tuple
    ratios_fin: tuple
    convention: str
    solution_counts: tuple
    domain_size: int
    diagnostics: tuple

    @property
    def stages(self) -> int:
        return len(self.times)


class _RealizedClasses:
    """Exact class amplitudes of the realized state, evolved stage by stage."""

    def __init__(self, pack: OraclePack):
        self.pack = pack
        self.amps = {"": pack.domain_size**-0.5}

    def bad_side_is_flat(self, k: int) -> bool:
        """True when all occupied q_k = 0 classes share one amplitude."""
        values = []
        for prefix in self.pack.class_counts[k]:
            if prefix[-1] == "0":
                values.append(self.amps[prefix[:-1]])
        values.sort()
        return all(b - a <= AMP_MERGE_TOL for a, b in zip(values, values[1:]))

    def advance(self, k: int, t: int) -> None:
        counts = self.pack.class_counts[k]
        if t == 0:
            self.amps = {p: self.amps[p[:-1]] for p in counts}
            return
        d = self.pack.domain_size
        g_sum, g_n, b_sum, b_n = _split_sums(self.pack, k, lambda p: self.amps[p[:-1]], False)
        split = AverageSplit(g_bar=g_sum / g_n, b_bar=b_sum / b_n, r=g_n, domain=d)
        fin = predict_averages(rotation_params(split), split, t)
        sign = -1.0 if t % 2 else 1.0
        new = {}
        for prefix in counts:
            old = self.amps[prefix[:-1]]
            if prefix[-1] == "1":
                new[prefix] = fin.g_bar + (old - split.g_bar)
            else:
                new[prefix] = fin.b_bar + sign * (old - split.b_bar)
        self.amps = new


def compute_schedule(pack: OraclePack, spec: TargetSpec,
                     convention: str = EXTENDED,
                     skip_cutoff: float | None = None) -> PreparationPlan:
    """Build the full preparation plan for spec.amp_bits stages.

    Stages with N_k = 0 or N_k/N below skip_cutoff (default
    2^{-a/2}/T) are skipped with t_k = 0.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown counts convention {convention!r}")
    T = spec.amp_bits
    n, d = spec.n_states, pack.domain_size
    if skip_cutoff is None:
        skip_cutoff = default_skip_cutoff(spec.aux_qubits, T)

    times, omegas, skipped = [], [], []
    ratios_ini, ratios_fin = [], []
    diagnostics = []
    realized = _RealizedClasses(pack)
    for k in range(1, T + 1):
        r = pack.solution_counts[k - 1]
        if r == 0 or r / n < skip_cutoff:
            times.append(0)
            omegas.append(0.0 if r == 0 else rotation_angle(r, d))
            skipped.append(k)
            ratios_ini.append(None)
            ratios_fin.append(None)
            realized.advance(k, 0)
            continue
        omega = rotation_angle(r, d)
        s = math.sqrt(r / (d - r))
        ini, fin = average_ratios(pack, k, convention)
        delta = math.atan(fin * s) - math.atan(ini * s)
        if delta < 0.0:
            delta += math.pi
        if realized.bad_side_is_flat(k):
            t_k = int(math.floor(0.5 + delta / omega))
        else:
            t_k = 2 * int(math.floor(0.5 + delta / (2.0 * omega)))
            diagnostics.append(
                f"stage {k}: even iteration parity enforced "
                f"(bad side spans multiple amplitude classes)"
            )
        if t_k <= 0:
            if t_k < 0:
                t_k = 0
            diagnostics.append(
                f"stage {k}: OutOfBranch, target angle {delta:.3e} rounds to 0 "
                f"iterations (omega={omega:.3e})"
            )
        times.append(t_k)
        omegas.append(omega)
        ratios_ini.append(ini)
        ratios_fin.append(fin)
        realized.advance(k, t_k)
    return PreparationPlan(
        times=tuple(times),
        omegas=tuple(omegas),
        skipped=tuple(skipped),
        ratios_ini=tuple(ratios_ini),
        ratios_fin=tuple(ratios_fin),
        convention=convention,
        solution_counts=tuple(pack.solution_counts[:T]),
        domain_size=d,
        diagnostics=tuple(diagnostics),
    )


def oracle_call_budget(plan: PreparationPlan, phase_bits: int):
    """(total oracle calls, analytic bound on them).

    Budget is sum_k t_k + T'; the bound is T' + T*pi*sqrt(2^a*N/min_k N_k)
    taken over non-skipped stages with solutions.
    """
    budget = sum(plan.times) + phase_bits
    active = [
        plan.solution_counts[k - 1]
        for k in range(1, plan.stages + 1)
        if k not in plan.skipped and plan.solution_counts[k - 1] > 0
    ]
    if active:
        bound = phase_bits + plan.stages * math.pi * math.sqrt(plan.domain_size / min(active))
    else:
        bound = float(phase_bits)
    return budget, bound


def plan_to_dict(plan: PreparationPlan, spec: TargetSpec) -> dict:
    """Export schema: {T, T', a, eta, convention, times, omegas, skipped,
    budget, budget_bound}."""
    budget, bound = oracle_call_budget(plan, spec.phase_bits)
    return {
        "T": plan.stages,
        "T'": spec.phase_bits,
        "a": spec.aux_qubits,
        "eta": spec.eta,
        "convention": plan.convention,
        "times": list(plan.times),
        "omegas": list(plan.omegas),
        "skipped": list(plan.skipped),
        "budget": budget,
        "budget_bound": bound,
    }

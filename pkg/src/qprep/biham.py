"""Closed-form Grover amplitude dynamics for an arbitrary real initial state.

An oracle accepting r of D basis states splits the register into good and
bad states.  The averages of the two groups rotate under iteration while
the deviations from the averages are preserved on the good side and flip
sign each iteration on the bad side:

    g_fin(x) = g_avg_fin + (g_ini(x) - g_avg_ini)
    b_fin(x) = b_avg_fin + (-1)^t (b_ini(x) - b_avg_ini)

This module predicts the averages after t iterations, reconstructs whole
states from the rule above, and inverts the relation to solve for t.  It
serves as an independent oracle against the direct simulator.  Formulas
are implemented for real averages only; the pipeline never produces
complex amplitudes before the phase stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSplit
from .statevector import StateVector, predicate_mask


@dataclass(frozen=True)
class AverageSplit:
    """Average amplitudes of the good and bad states of an oracle.

    g_bar, b_bar: means over accepted / rejected basis states
    r:            number of accepted states, 0 < r < domain when well-posed
    domain:       total number of basis states (2^a * N in the pipeline)
    """

    g_bar: float
    b_bar: float
    r: int
    domain: int

    @property
    def ratio(self) -> float:
        """g_bar / b_bar, signed infinity when b_bar = 0."""
        if self.b_bar == 0.0:
            return math.copysign(math.inf, self.g_bar)
        return self.g_bar / self.b_bar


@dataclass(frozen=True)
class RotationParams:
    """Polar form of the (g_bar, b_bar) trajectory.

    omega:     rotation angle per iteration, arccos(1 - 2r/domain)
    alpha:     invariant amplitude sqrt(b_bar^2 + g_bar^2 r/(domain-r))
    phi_angle: initial phase, arctan((g_bar/b_bar) sqrt(r/(domain-r)))
    """

    omega: float
    alpha: float
    phi_angle: float


def rotation_angle(r: int, domain: int) -> float:
    """omega = arccos(1 - 2r/domain)."""
    return math.acos(1.0 - 2.0 * r / domain)


def split_averages(state: StateVector, predicate) -> AverageSplit:
    """Good/bad average amplitudes of a real-amplitude state."""
    mask = predicate_mask(predicate, state.dim)
    r = int(mask.sum())
    if r == 0 or r == state.dim:
        raise DegenerateSplit(f"oracle accepts {r} of {state.dim} states")
    amps = state.amps.real
    g_bar = float(np.mean(amps[mask]))
    b_bar = float(np.mean(amps[~mask]))
    return AverageSplit(g_bar=g_bar, b_bar=b_bar, r=r, domain=state.dim)


def rotation_params(split: AverageSplit) -> RotationParams:
    """Polar parameters of the average trajectory.

    phi_angle is the angle of the point (b_bar, g_bar*sqrt(r/(domain-r))),
    which reduces to the principal arctan for b_bar > 0 and to +-pi/2 in
    the b_bar -> 0 limit.
    """
    r, d = split.r, split.domain
    if not 0 < r < d:
        raise DegenerateSplit(f"split with r={r} of {d} has no rotation form")
    stretch = math.sqrt(r / (d - r))
    u = split.g_bar * stretch
    alpha = math.hypot(split.b_bar, u)
    phi = math.atan2(u, split.b_bar)
    return RotationParams(omega=rotation_angle(r, d), alpha=alpha, phi_angle=phi)


def predict_averages(params: RotationParams, split: AverageSplit, t: int) -> AverageSplit:
    """Averages after t iterations: the polar point advanced by omega*t."""
    r, d = split.r, split.domain
    angle = params.omega * t + params.phi_angle
    g_fin = math.sqrt((d - r) / r) * params.alpha * math.sin(angle)
    b_fin = params.alpha * math.cos(angle)
    return AverageSplit(g_bar=g_fin, b_bar=b_fin, r=r, domain=d)


def analytic_evolve(state: StateVector, predicate, t: int) -> StateVector:
    """Closed-form image of `state` under t Grover iterations.

    Matches statevector.grover on real states; deviations from the good
    average are carried over unchanged, bad-side deviations pick up (-1)^t.
    """
    mask = predicate_mask(predicate, state.dim)
    split = split_averages(state, predicate)
    fin = predict_averages(rotation_params(split), split, t)
    amps = state.amps.real
    out = np.empty(state.dim)
    sign = -1.0 if t % 2 else 1.0
    out[mask] = fin.g_bar + (amps[mask] - split.g_bar)
    out[~mask] = fin.b_bar + sign * (amps[~mask] - split.b_bar)
    return StateVector(out.astype(complex), state.num_qubits)


@dataclass(frozen=True)
class IterationSolution:
    """Unrounded solution of the rotation equation for a target ratio."""

    omega_t: float
    t: float


def solve_iterations(split_ini: AverageSplit, ratio_fin: float) -> IterationSolution:
    """Solve omega*t for the rotation taking split_ini to a final ratio.

    omega*t = arctan(ratio_fin*s) - arctan(ratio_ini*s) with
    s = sqrt(r/(domain-r)); the tangent has period pi, so a negative
    difference gets +pi to select the smallest nonnegative solution.
    ratio_fin may be signed infinity (empty-denominator limit, arctan ->
    +-pi/2).
    """
    r, d = split_ini.r, split_ini.domain
    if not 0 < r < d:
        raise DegenerateSplit(f"split with r={r} of {d} states")
    s = math.sqrt(r / (d - r))
    omega_t = math.atan(ratio_fin * s) - math.atan(split_ini.ratio * s)
    if omega_t < 0.0:
        omega_t += math.pi
    omega = rotation_angle(r, d)
    return IterationSolution(omega_t=omega_t, t=omega_t / omega)

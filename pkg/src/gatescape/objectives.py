"""Infidelity functionals of a realified channel with respect to a target gate."""

from __future__ import annotations

import enum

import numpy as np

from .propagator import ControlGrid, ControlVector, propagate_channel, propagate_state
from .qmodel import BETA, SPECIAL, GateTarget, GeneratorSet

CHANNEL_WEIGHTS = BETA[:, None] / BETA[None, :]
SPECIAL_NORMS = np.array([np.sum(BETA * x * x) for x in SPECIAL.xs])


class ObjectiveKind(enum.Enum):
    SD = "sd"
    GRK_SD = "grk-sd"
    GRK_SP = "grk-sp"

    @property
    def uses_states(self) -> bool:
        return self is not ObjectiveKind.SD


def j_sd(psi, gate: GateTarget) -> float:
    """Squared Hilbert-Schmidt distance to the target channel, scaled to [0, 1]."""
    d = np.asarray(psi) - gate.psi_u
    return float(np.sum(CHANNEL_WEIGHTS * d * d) / 32.0)


def j_grk_sd(final_states, gate: GateTarget) -> float:
    """Mean squared distance on the three special states; rows are ``Psi x_rho_m``."""
    d = np.asarray(final_states) - gate.target_states
    return float(np.sum(BETA * d * d) / 6.0)


def j_grk_sp(final_states, gate: GateTarget) -> float:
    """One minus the mean normalized overlap with the target images.

    Unlike the distance forms this is zero at the target but can also reach
    zero (or go negative) for maps that increase purity, so a small value is
    not proof of a close channel on its own.
    """
    overlaps = np.sum(BETA * np.asarray(final_states) * gate.target_states, axis=1)
    return float(1.0 - np.sum(overlaps / SPECIAL_NORMS) / 3.0)


def kinematic(kind: ObjectiveKind, psi, gate: GateTarget) -> float:
    """Any of the three functionals evaluated on a full channel matrix."""
    kind = ObjectiveKind(kind)
    if kind is ObjectiveKind.SD:
        return j_sd(psi, gate)
    states = SPECIAL.xs @ np.asarray(psi).T
    return j_grk_sd(states, gate) if kind is ObjectiveKind.GRK_SD else j_grk_sp(states, gate)


def evaluate(
    kind: ObjectiveKind, gen: GeneratorSet, grid: ControlGrid, f: ControlVector, gate: GateTarget
) -> float:
    kind = ObjectiveKind(kind)
    if kind is ObjectiveKind.SD:
        return j_sd(propagate_channel(gen, grid, f).final, gate)
    final = propagate_state(gen, grid, f, SPECIAL.xs.T).final.T
    if kind is ObjectiveKind.GRK_SD:
        return j_grk_sd(final, gate)
    return j_grk_sp(final, gate)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian, random_unitary
from gatescape.objectives import ObjectiveKind, evaluate, j_grk_sd, j_grk_sp, j_sd, kinematic
from gatescape.propagator import ControlGrid, ControlVector, reference_guess, propagate_channel
from gatescape.qmodel import (
    BETA,
    SPECIAL,
    SystemSpec,
    build_generators,
    cnot,
    cphase,
    cz,
    gate_channel_matrix,
    make_gate,
    weighted_channel_inner,
)
from reference_values import GATES, INITIAL, gate_args

IDENTITY = np.eye(16)


# ---- complex-domain oracles (no realification involved) ----

def hs2(a):
    return float(np.sum(np.abs(a) ** 2))


def grk_sd_complex(channel, u):
    return sum(hs2(channel(r) - u @ r @ u.conj().T) for r in SPECIAL.rhos) / 6


def grk_sp_complex(channel, u):
    s = sum(np.trace(channel(r) @ u @ r @ u.conj().T).real / np.trace(r @ r).real for r in SPECIAL.rhos)
    return 1 - s / 3


def sd_identity_complex(u):
    # ||S_id - S_U||^2 over the 16x16 superoperator with S_U = U (x) conj(U)
    s_u = np.kron(u, u.conj())
    return hs2(np.eye(16) - s_u) / 32


IDENT = lambda r: r  # noqa: E731


def test_closed_forms_agree_with_complex_oracle():
    for gate in (cnot(), cz(), cphase(np.pi / 3)):
        u = gate.u_matrix
        assert j_grk_sd(SPECIAL.xs, gate) == pytest.approx(grk_sd_complex(IDENT, u), abs=1e-14)
        assert j_grk_sp(SPECIAL.xs, gate) == pytest.approx(grk_sp_complex(IDENT, u), abs=1e-14)
        assert j_sd(IDENTITY, gate) == pytest.approx(sd_identity_complex(u), abs=1e-14)


def test_identity_channel_closed_forms():
    assert abs(j_grk_sd(SPECIAL.xs, cnot()) - 1 / 300) < 1e-12
    assert abs(j_grk_sp(SPECIAL.xs, cnot()) - 1 / 90) < 1e-12
    assert abs(j_grk_sp(SPECIAL.xs, cz()) - 0.25) < 1e-12
    assert abs(j_sd(IDENTITY, cz()) - 0.75) < 1e-12


@pytest.mark.parametrize("lam", [np.pi / 6, np.pi / 3, np.pi / 2, 2 * np.pi / 3, np.pi])
def test_identity_channel_cphase(lam):
    assert abs(j_grk_sd(SPECIAL.xs, cphase(lam)) - (1 - math.cos(lam)) / 8) < 1e-12


@pytest.mark.parametrize("kind", list(ObjectiveKind))
@pytest.mark.parametrize("gate", [cnot(), cz(), cphase(0.7)])
def test_zero_at_target(kind, gate):
    assert abs(kinematic(kind, gate.psi_u, gate)) < 1e-14


def test_kinematic_matches_complex_oracle_on_unitary_channels(rng):
    for _ in range(20):
        v = random_unitary(rng)
        psi = gate_channel_matrix(v)
        chan = lambda r: v @ r @ v.conj().T  # noqa: E731
        for gate in (cnot(), cz()):
            u = gate.u_matrix
            assert kinematic("grk-sd", psi, gate) == pytest.approx(grk_sd_complex(chan, u), abs=1e-13)
            assert kinematic("grk-sp", psi, gate) == pytest.approx(grk_sp_complex(chan, u), abs=1e-13)
            expected = (32 - 2 * abs(np.trace(u.conj().T @ v)) ** 2) / 32
            assert kinematic("sd", psi, gate) == pytest.approx(expected, abs=1e-13)


def _random_channel(rng, kind=None, K=20):
    gen = build_generators(SystemSpec(kind=kind or int(rng.integers(1, 4)), epsilon=rng.uniform(0, 1)))
    f = ControlVector(rng.uniform(-5, 5, K), rng.uniform(0, 5, K), rng.uniform(0, 5, K))
    return propagate_channel(gen, ControlGrid(rng.uniform(1, 20), K), f).final


def test_sd_bounded_by_one_on_sampled_channels(rng):
    for _ in range(100):
        psi = _random_channel(rng)
        for gate in (cnot(), cz()):
            v = j_sd(psi, gate)
            assert 0 <= v <= 1
    for _ in range(100):
        v = j_sd(gate_channel_matrix(random_unitary(rng)), cnot())
        assert 0 <= v <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_grk_sd_lipschitz(seed):
    rng = np.random.default_rng(seed)
    a, b = _random_channel(rng), _random_channel(rng)
    gate = cnot() if seed % 2 else cz()
    diff = abs(kinematic("grk-sd", a, gate) - kinematic("grk-sd", b, gate))
    dist = math.sqrt(weighted_channel_inner(a - b, a - b))
    # |a|^2 - |b|^2 <= |a - b| |a + b| with state images of norm <= 1
    assert diff <= 2 * dist + 1e-12
    assert kinematic("grk-sd", a, gate) >= 0


def test_grk_sp_can_vanish_off_target():
    # the sp functional is only an overlap, so images scaled past the target drive it below zero
    gate = cz()
    boosted = 2 * gate.target_states
    assert j_grk_sp(boosted, gate) < 0
    assert j_grk_sd(boosted, gate) > 0


def test_state_images_determine_unitary_channel(rng):
    """If all three state images are delta-close, the full channels are O(sqrt(delta))-close."""
    gate = cnot()
    u = gate.u_matrix
    ratios, deltas, dists = [], [], []
    for scale in 10.0 ** rng.uniform(-6, -1, 40):
        v = u @ _expm_herm(scale * random_hermitian(rng))
        psi = gate_channel_matrix(v)
        images = SPECIAL.xs @ psi.T
        delta = max(math.sqrt(np.sum(BETA * (im - t) ** 2)) for im, t in zip(images, gate.target_states))
        d = psi - gate.psi_u
        dist = math.sqrt(weighted_channel_inner(d, d))
        ratios.append(dist / math.sqrt(delta))
        deltas.append(delta)
        dists.append(dist)
    c = max(ratios[:20])
    # constant fitted on half the sample bounds the other half
    assert all(r <= 2 * c for r in ratios[20:])
    assert c < 20
    small = np.argmin(deltas)
    assert dists[small] < 1e-4


def _expm_herm(h):
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * w)) @ q.conj().T


@pytest.mark.parametrize("objective", ["grk-sd", "grk-sp", "sd"])
@pytest.mark.parametrize("system", [1, 2, 3])
def test_initial_guess_reference_table(objective, system):
    gen = build_generators(SystemSpec(kind=system))
    grid = ControlGrid(20.0, 100)
    f = reference_guess(grid).controls()
    for g in GATES:
        kind, lam = gate_args(g)
        value = evaluate(objective, gen, grid, f, make_gate(kind, lam * np.pi))
        assert abs(value - INITIAL[(objective, system, g)]) <= 0.002, (g, value)


def test_evaluate_grk_consistent_with_channel(generators, rng):
    grid = ControlGrid(5.0, 25)
    f = ControlVector(rng.uniform(-1, 1, 25), rng.uniform(0, 1, 25), rng.uniform(0, 1, 25))
    psi = propagate_channel(generators[3], grid, f).final
    for kind in ObjectiveKind:
        assert evaluate(kind, generators[3], grid, f, cz()) == pytest.approx(
            kinematic(kind, psi, cz()), abs=1e-13
        )

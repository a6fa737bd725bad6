import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinctrl.operators import SIGMA_X, SIGMA_Z, expm, is_unitary, ket, projector, trace_distance
from spinctrl.propagate import (
    CollapseChannel,
    apply_superoperator,
    bloch_vector,
    build_collapse_operators,
    lindblad_propagate,
    noise_channels,
    process_superoperator,
    propagate_ket,
    relaxation_rates,
    to_interaction_picture,
    trajectory_diagnostics,
    trotter_propagator,
)
from spinctrl.pulses import SampledPulse, flattop
from spinctrl.spin import SpinSystem, thermal_state

from .conftest import random_density


def single_qubit(omega=2.0):
    return SpinSystem(np.array([omega]), np.zeros((1, 1)))


def test_zero_pulse_gives_drift_propagator(reference_system):
    pulse = SampledPulse(np.zeros(201))
    u = trotter_propagator(reference_system.drift, reference_system.control, pulse)
    assert np.allclose(u, expm(-1j * 2.0 * reference_system.drift), atol=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_trotter_unitarity(seed):
    rng = np.random.default_rng(seed)
    s = SpinSystem.two_qubit(20 * np.pi, 14 * np.pi, 5.0)
    pulse = SampledPulse(rng.normal(size=301) * 3.0)
    u = trotter_propagator(s.drift, s.control, pulse)
    assert is_unitary(u, tol=1e-8)


def test_stored_propagators_match_ket_trajectory(reference_system):
    pulse = flattop(1.0, 2.0, 0.2)
    times, us = trotter_propagator(reference_system.drift, reference_system.control, pulse, store=True)
    traj = propagate_ket(reference_system.drift, reference_system.control, pulse, ket("00"))
    assert np.allclose(us[:, :, 0], traj.states)
    assert np.allclose(times, traj.times)


def test_t1_decay_matches_exponential():
    s = single_qubit()
    T1 = 5.0
    (L,) = build_collapse_operators([CollapseChannel(0, "relaxation", T1)], s)
    pulse = SampledPulse(np.zeros(1001))
    traj = lindblad_propagate(s.drift, s.control, pulse, [L], projector(ket("1")))
    p1 = traj.states[:, 1, 1].real
    assert np.allclose(p1, np.exp(-traj.times / T1), atol=1e-4)


def test_dephasing_matches_exponential():
    s = single_qubit()
    Tphi = 4.0
    (L,) = build_collapse_operators([CollapseChannel(0, "dephasing", Tphi)], s)
    plus = (ket("0") + ket("1")) / np.sqrt(2)
    traj = lindblad_propagate(s.drift, s.control, SampledPulse(np.zeros(1001)), [L], plus)
    assert np.allclose(np.abs(traj.states[:, 0, 1]), 0.5 * np.exp(-traj.times / Tphi), atol=1e-4)


def test_adaptive_integrator_agrees_with_exponentials():
    s = single_qubit()
    c = build_collapse_operators(noise_channels(1, 3.0, 5.0, temperature=0.5), s)
    pulse = flattop(1.0, 1.5, 0.2)
    a = lindblad_propagate(s.drift, s.control, pulse, c, ket("0"))
    b = lindblad_propagate(s.drift, s.control, pulse, c, ket("0"), method="adaptive", rtol=1e-8, atol=1e-10)
    assert np.allclose(a.final, b.final, atol=1e-7)
    with pytest.raises(ValueError):
        lindblad_propagate(s.drift, s.control, pulse, c, ket("0"), method="rk2")


def test_no_collapse_matches_unitary_conjugation(reference_system):
    rng = np.random.default_rng(3)
    rho0 = random_density(rng, 4)
    pulse = flattop(1.0, 2.0, 0.2)
    u = trotter_propagator(reference_system.drift, reference_system.control, pulse)
    traj = lindblad_propagate(reference_system.drift, reference_system.control, pulse, [], rho0, store=False)
    assert np.allclose(traj.final, u @ rho0 @ u.conj().T, atol=1e-7)


@given(st.integers(0, 2**31 - 1))
def test_gksl_preserves_trace_and_positivity(seed):
    rng = np.random.default_rng(seed)
    s = SpinSystem.two_qubit(20 * np.pi, 14 * np.pi, 5.0)
    T1 = rng.uniform(0.5, 50, size=2)
    Tphi = rng.uniform(0.5, 50, size=2)
    c = build_collapse_operators(noise_channels(2, T1, Tphi, temperature=rng.uniform(0, 2)), s)
    pulse = SampledPulse(rng.normal(size=101) * 3)
    traj = lindblad_propagate(s.drift, s.control, pulse, c, random_density(rng, 4))
    diag = trajectory_diagnostics(traj)
    assert diag["trace_error"] < 1e-8
    assert diag["hermiticity_error"] < 1e-8
    assert diag["min_eigenvalue"] > -1e-7


def test_steady_state_is_thermal(reference_system):
    temperature = 1.0
    c = build_collapse_operators(noise_channels(2, 2.0, np.inf, temperature), reference_system)
    sup = process_superoperator(reference_system.drift, reference_system.control, SampledPulse(np.zeros(6001)), c)
    rho = apply_superoperator(sup, projector(ket("11")))
    assert trace_distance(rho, thermal_state(reference_system, temperature)) < 1e-3


def test_relaxation_rates_detailed_balance():
    up, down = relaxation_rates(10.0, 5.0, 0.3)
    assert up + down == pytest.approx(0.1)
    assert up / down == pytest.approx(np.exp(-5.0 / (20.837 * 0.3)))
    assert relaxation_rates(np.inf, 5.0, 0.3) == (0.0, 0.0)
    assert relaxation_rates(10.0, 5.0, 0.0)[0] == 0.0


def test_channel_validation():
    with pytest.raises(ValueError):
        CollapseChannel(0, "relaxation", 0.0)
    with pytest.raises(ValueError):
        CollapseChannel(0, "leakage", 1.0)
    with pytest.raises(IndexError):
        build_collapse_operators([CollapseChannel(3, "dephasing", 1.0)], single_qubit())
    assert build_collapse_operators(noise_channels(1), single_qubit()) == []


def test_superoperator_matches_propagation(reference_system):
    c = build_collapse_operators(noise_channels(2, 20.0, 30.0, 0.4), reference_system)
    pulse = flattop(0.5, 3.0, 0.1)
    rho0 = projector(ket("01"))
    sup = process_superoperator(reference_system.drift, reference_system.control, pulse, c)
    traj = lindblad_propagate(reference_system.drift, reference_system.control, pulse, c, rho0, store=False)
    assert np.allclose(apply_superoperator(sup, rho0), traj.final, atol=1e-12)


def test_interaction_picture_freezes_drift_evolution(reference_system):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    traj = propagate_ket(reference_system.drift, reference_system.control, SampledPulse(np.zeros(101)), psi)
    frozen = to_interaction_picture(traj, reference_system.drift)
    assert np.allclose(frozen.states, psi[None, :], atol=1e-8)
    rho_traj = lindblad_propagate(reference_system.drift, reference_system.control, SampledPulse(np.zeros(101)), [], psi)
    back = to_interaction_picture(to_interaction_picture(rho_traj, reference_system.drift), -reference_system.drift)
    assert np.allclose(back.states, rho_traj.states, atol=1e-10)


def test_bloch_vector_of_product_states():
    s = SpinSystem.two_qubit(3.0, 2.0, 0.0)
    traj = propagate_ket(s.drift, s.control, SampledPulse(np.zeros(2)), ket("01"))
    assert np.allclose(bloch_vector(traj, 0)[0], [0, 0, 1])
    assert np.allclose(bloch_vector(traj, 1)[0], [0, 0, -1])
    with pytest.raises(IndexError):
        bloch_vector(traj, 2)


def test_resonant_pi_pulse_flips_single_qubit():
    omega, amp = 10.0, 0.5
    tau = np.pi / amp  # drive term amp*cos(w t) sigma_x has rotating-wave Rabi rate amp
    n = int(round(tau / 0.001))
    t = np.arange(n + 1) * (tau / n)
    s = single_qubit(omega)
    pulse = SampledPulse(amp * np.cos(omega * t), tau / n)
    traj = propagate_ket(s.drift, s.control, pulse, ket("0"))
    assert abs(traj.final[1]) ** 2 > 0.99

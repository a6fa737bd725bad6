import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinctrl.pulses import (
    SampledPulse,
    Tone,
    TonePulse,
    blackman_ramp,
    effective_rabi_rates,
    flattop,
    fourier_magnitude,
    not_gate_time,
    prominent_peaks,
    spectrum,
    synchronize_rabi,
)
from spinctrl.spin import two_qubit_analytic


def test_flattop_shape():
    p = flattop(50.0, 0.7, 5.0)
    assert p.samples[0] == 0 and p.samples[-1] == 0
    assert p(25.0) == pytest.approx(0.7)
    ramp = p.samples[: int(5.0 / p.dt) + 1]
    assert np.all(np.diff(ramp) >= -1e-12)
    assert len(p.samples) == 5001 and p.duration == pytest.approx(50.0)


@pytest.mark.parametrize("rise", [0.0, -1.0, 30.0])
def test_flattop_rejects_bad_rise(rise):
    with pytest.raises(ValueError):
        flattop(50.0, 1.0, rise)


def test_blackman_ramp_endpoints():
    assert blackman_ramp(np.array([0.0, 1.0])) == pytest.approx([0.0, 1.0], abs=1e-15)


def test_sampled_pulse_validation():
    with pytest.raises(ValueError):
        SampledPulse(np.array([0.0]))
    with pytest.raises(ValueError):
        SampledPulse(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        SampledPulse(np.zeros(3), dt=0.0)
    with pytest.raises(ValueError):
        TonePulse((Tone(1.0, 1.0),), 1.0).sample(0.3)
    with pytest.raises(ValueError):
        flattop(1.0, 1.0, 0.1)(2.0)


def test_csv_round_trip(tmp_path):
    p = flattop(2.0, 0.3, 0.5)
    path = tmp_path / "pulse.csv"
    p.to_csv(path, ["config_hash: abc"])
    text = path.read_text().splitlines()
    assert text[0] == "# config_hash: abc" and text[1] == "t_ns,amplitude"
    q = SampledPulse.from_csv(path)
    assert np.array_equal(q.samples, p.samples) and q.dt == pytest.approx(p.dt)


def test_sync_ratio_and_equal_rates():
    a = two_qubit_analytic(20 * np.pi, 14 * np.pi, 5.0)
    rf = a.transition_frequencies
    pulse = TonePulse((Tone(0.1, rf[0]), Tone(0.1, rf[1])), 50.0)
    synced = synchronize_rabi(pulse, a)
    assert synced.tones[0].amplitude / synced.tones[1].amplitude == pytest.approx(1.3, abs=0.05)
    r1, r2 = effective_rabi_rates(synced, a)
    assert r1 == pytest.approx(r2, rel=1e-12)
    assert synchronize_rabi(synced, a) == synced
    assert not_gate_time(synced, a) == pytest.approx(np.pi / r2)


def test_sync_without_coupling_keeps_pulse():
    a = two_qubit_analytic(20 * np.pi, 14 * np.pi, 1e-9)
    pulse = TonePulse((Tone(0.1, 1.0), Tone(0.1, 2.0)), 10.0)
    assert synchronize_rabi(pulse, a).tones[0].amplitude == pytest.approx(0.1, rel=1e-8)


def test_sync_needs_two_tones():
    a = two_qubit_analytic(20 * np.pi, 14 * np.pi, 5.0)
    with pytest.raises(ValueError):
        synchronize_rabi(TonePulse((Tone(1.0, 1.0),), 1.0), a)


def test_pure_cosine_spectrum():
    tau, w0 = 50.0, 40.0
    p = TonePulse((Tone(1.0, w0),), tau).sample()
    rep = spectrum(p, [w0])
    (peak,) = rep.peaks
    assert abs(peak.center - w0) <= rep.bin_width
    main_lobe = 2 * np.pi * 0.886 / tau
    assert main_lobe / 2 <= peak.fwhm <= 2 * main_lobe
    assert peak.height == pytest.approx(tau / 2, rel=0.02)
    assert len(prominent_peaks(rep, band=(1.0, 300.0), min_separation=1.0)) == 1


def test_bichromatic_spectrum():
    p = TonePulse((Tone(1.0, 40.0), Tone(0.5, 60.0)), 50.0).sample()
    rep = spectrum(p, [40.0, 60.0])
    assert [round(pk.center) for pk in rep.peaks] == [40, 60]
    found = prominent_peaks(rep, band=(20.0, 90.0), min_separation=1.0)
    assert np.allclose(found, [40.0, 60.0], atol=rep.bin_width)


def test_zero_pulse_has_no_peaks():
    rep = spectrum(SampledPulse(np.zeros(101)), [10.0])
    assert np.all(rep.magnitudes == 0) and rep.peaks == []
    assert prominent_peaks(rep).size == 0


def test_spectrum_rejects_center_beyond_nyquist():
    with pytest.raises(ValueError):
        spectrum(SampledPulse(np.ones(11)), [1e4])


@given(st.integers(0, 2**31 - 1), st.integers(4, 300))
def test_parseval(seed, n):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n)
    p = SampledPulse(u, 0.01)
    # unpadded two-sided spectrum: sum |u|^2 dt == sum |U_k|^2 df
    spec = np.fft.fft(u) * p.dt
    df = 1.0 / (n * p.dt)
    assert np.sum(np.abs(spec) ** 2) * df == pytest.approx(np.sum(u**2) * p.dt, rel=1e-8)
    # one-sided padded magnitude is consistent with the same normalization at f = 0
    _, mag = fourier_magnitude(p)
    assert mag[0] == pytest.approx(abs(u.sum()) * p.dt, rel=1e-10, abs=1e-14)

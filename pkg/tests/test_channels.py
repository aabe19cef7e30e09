import numpy as np
import pytest

from polarcraft.channels import (NOISELESS_LLR_SCALE, ChannelKind, ChannelModel, ReceivedWord,
                                 derive_rng, llr, sigma_to_snr, snr_to_sigma, transmit)


def test_snr_conversion():
    assert snr_to_sigma(0.0) == 1.0
    assert np.isclose(snr_to_sigma(20.0), 0.1)
    assert np.isclose(sigma_to_snr(snr_to_sigma(3.7)), 3.7)


def test_derive_rng_is_deterministic_and_keyed():
    a = derive_rng(5, 1, 2).standard_normal(4)
    b = derive_rng(5, 1, 2).standard_normal(4)
    c = derive_rng(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_awgn_noise_variance():
    ch = ChannelModel.from_snr(0.0)
    x = np.ones((1000, 1000))
    y = transmit(x, ch, derive_rng(1)).samples
    assert abs((y - x).var() - 1.0) < 0.01


def test_rayleigh_fading_power_and_noise():
    ch = ChannelModel.from_snr(3.0, ChannelKind.RAYLEIGH)
    x = -np.ones((1000, 1000))
    rx = transmit(x, ch, derive_rng(2))
    a = rx.fading_gains
    assert abs((a ** 2).mean() - 1.0) < 0.01
    # the noise is what remains after removing the faded signal
    assert abs((rx.samples - a * x).var() / ch.sigma ** 2 - 1.0) < 0.01


def test_student_t_is_unit_variance_scaled():
    ch = ChannelModel(ChannelKind.STUDENT_T, 1.0, nu=3.0)
    x = np.zeros((1000, 1000))
    noise = transmit(x, ch, derive_rng(3)).samples
    # nu = 3 has infinite fourth moment, so the sample variance converges slowly
    assert abs(noise.var() - 1.0) < 0.05
    with pytest.raises(ValueError):
        ChannelModel(ChannelKind.STUDENT_T, 1.0, nu=2.0)


def test_llr_formula():
    ch = ChannelModel(sigma=0.5)
    y = np.array([0.3, -1.2])
    assert np.allclose(llr(y, ch), 2 * y / 0.25)
    fad = ChannelModel(ChannelKind.RAYLEIGH, 0.5)
    rx = ReceivedWord(y, np.array([0.5, 2.0]))
    assert np.allclose(llr(rx, fad), 2 * np.array([0.5, 2.0]) * y / 0.25)
    with pytest.raises(ValueError):
        llr(y, fad)


def test_llr_sign_convention_matches_likelihoods():
    sigma = 0.8
    ch = ChannelModel(sigma=sigma)
    y = np.linspace(-2, 2, 9)
    direct = (-(y - 1) ** 2 + (y + 1) ** 2) / (2 * sigma ** 2)
    assert np.allclose(llr(y, ch), direct)


def test_noiseless_override():
    ch = ChannelModel(sigma=0.0)
    x = np.array([1.0, -1.0, 1.0])
    rx = transmit(x, ch, derive_rng(0))
    assert np.array_equal(rx.samples, x)
    assert np.array_equal(llr(rx, ch), NOISELESS_LLR_SCALE * x)


def test_config_round_trip_and_validation():
    ch = ChannelModel.from_config({"kind": "student_t", "snr_db": 2.0, "nu": 4.0})
    assert ch.kind is ChannelKind.STUDENT_T and ch.nu == 4.0
    assert ChannelModel.from_config(ch.to_config()) == ch
    assert ChannelModel.from_config({"noiseless": True}).noiseless
    with pytest.raises(ValueError):
        ChannelModel(sigma=-1.0)

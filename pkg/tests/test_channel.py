import numpy as np
import pytest
from hypothesis import given, strategies as st

from nflas.channel import (OfdmGrid, PropagationPath, apply_mask, assemble_channel, element_response,
                           ff_steering, make_mask, nf_steering, ris_cascaded_path, synth_observation)
from nflas.geometry import SPEED_OF_LIGHT, build_ula, fraunhofer_distance

from conftest import F30, LAM30, Q


def test_ofdm_grid_edges():
    g = OfdmGrid(30e9, 4e9, 3)
    np.testing.assert_allclose(g.frequencies, [28e9, 30e9, 32e9])
    assert OfdmGrid(3.5e9, 0, 1).frequencies.tolist() == [3.5e9]
    g = OfdmGrid(3.5e9, 1e6, 64)
    assert np.all(np.diff(g.frequencies) > 0)
    assert g.frequencies[0] == pytest.approx(3.5e9 - 0.5e6)
    assert g.frequencies[-1] == pytest.approx(3.5e9 + 0.5e6)
    for bad in [(1e9, 3e9, 4), (1e9, -1, 1), (1e9, 0, 4), (1e9, 1e6, 0)]:
        with pytest.raises(ValueError):
            OfdmGrid(*bad)


def test_nf_steering_full_wavelength():
    a = build_ula(1, 0.5)
    v = nf_steering(a, (1, 0, 0), SPEED_OF_LIGHT)
    assert v[0] == pytest.approx(1.0, abs=1e-12)


def test_nf_steering_boresight_symmetry():
    a = build_ula(2, 0.25, wavelength=0.5)
    for r in (0.3, 2.0, 100.0):
        v = nf_steering(a, (r, 0, 0), SPEED_OF_LIGHT * 2)
        assert v[0] == pytest.approx(v[1], abs=1e-12)


def test_nf_steering_brute_force_phase():
    a = build_ula(256, LAM30 / 2)
    v = nf_steering(a, Q, F30)
    q = np.array([Q[0], Q[1], 0.0])
    expect = np.array([-2 * np.pi * F30 * np.linalg.norm(q - e) / SPEED_OF_LIGHT for e in a.element_positions])
    diff = np.angle(v * np.exp(-1j * expect))
    assert np.max(np.abs(diff)) < 1e-9
    np.testing.assert_allclose(np.abs(v), 1.0, rtol=0, atol=1e-15)


def test_free_space_amplitude_and_errors():
    a = build_ula(4, LAM30 / 2)
    v = nf_steering(a, (2, 0, 0), F30, "free_space")
    d = a.distances((2, 0, 0))[0]
    np.testing.assert_allclose(np.abs(v), LAM30 / (4 * np.pi * d))
    with pytest.raises(ValueError):
        nf_steering(a, a.element_positions[0], F30)
    with pytest.raises(ValueError):
        nf_steering(a, (2, 0, 0), F30, "isotropic")


def test_ff_steering_examples():
    a = build_ula(16, LAM30 / 2)
    np.testing.assert_allclose(ff_steering(a, (1, 0, 0), F30), 1.0)
    two = build_ula(2, LAM30 / 2)
    v = ff_steering(two, (0, 1, 0), F30)
    assert abs(np.angle(v[1] / v[0])) == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        ff_steering(a, (1, 1, 0), F30)


@given(angle=st.floats(-1.2, 1.2), scale=st.sampled_from([100.0, 1e3, 1e4]))
def test_nf_converges_to_ff(angle, scale):
    a = build_ula(64, LAM30 / 2)
    r = scale * fraunhofer_distance(a.aperture(), LAM30)
    u = np.array([np.cos(angle), np.sin(angle), 0.0])
    ratio = nf_steering(a, r * u, F30) / ff_steering(a, u, F30)
    dev = np.abs(np.angle(ratio / ratio[len(ratio) // 2]))
    assert np.max(dev) < np.pi / 80
    if scale == 1e4:
        assert np.max(dev) < 1e-3


def test_masks():
    v = nf_steering(build_ula(512, LAM30 / 2), Q, F30)
    np.testing.assert_array_equal(apply_mask(v, np.ones(512)), v)
    assert not np.any(apply_mask(v, np.zeros(512)))
    m = make_mask(512, [(128, 384)])
    assert np.sum(np.abs(apply_mask(v, m)) ** 2) == pytest.approx(0.5 * np.sum(np.abs(v) ** 2))
    with pytest.raises(ValueError):
        apply_mask(v, np.ones(3))
    with pytest.raises(ValueError):
        make_mask(4, [(2, 9)])


def test_assemble_channel_identities():
    a = build_ula(8, LAM30 / 2)
    g1 = OfdmGrid(F30, 0, 1)
    H = assemble_channel([PropagationPath((2, 1, 0))], a, g1)
    np.testing.assert_allclose(H[:, 0], nf_steering(a, (2, 1, 0), F30))
    g = OfdmGrid(F30, 1e9, 5)
    H = assemble_channel([PropagationPath((2, 1, 0), 0.3 - 1j), PropagationPath((2, 1, 0), -0.3 + 1j)], a, g)
    assert np.max(np.abs(H)) < 1e-15
    with pytest.raises(ValueError):
        assemble_channel([PropagationPath((2, 1, 0), mask=np.ones(3))], a, g)
    with pytest.raises(ValueError):
        assemble_channel([], a, g)


@given(re=st.floats(-5, 5), im=st.floats(-5, 5))
def test_assemble_linear_in_gain(re, im):
    a = build_ula(8, LAM30 / 2)
    g = OfdmGrid(F30, 1e9, 4)
    alpha = complex(re, im)
    base = assemble_channel([PropagationPath((1, -1, 0))], a, g, "free_space")
    scaled = assemble_channel([PropagationPath((1, -1, 0), alpha)], a, g, "free_space")
    np.testing.assert_allclose(scaled, alpha * base, rtol=1e-12, atol=1e-300)


def _ris():
    lam = SPEED_OF_LIGHT / 28e9
    return build_ula(512, lam / 2, axis=(1, 0, 0), normal=(0, 1, 0))


def test_ris_cascade_single_element_and_optimum():
    one = build_ula(1, 0.01)
    v = ris_cascaded_path((1, 1, 0), one, [1.0], (2, -1, 0), 28e9)
    a1 = nf_steering(one, (1, 1, 0), 28e9, "free_space")[0]
    a2 = nf_steering(one, (2, -1, 0), 28e9, "free_space")[0]
    assert v == pytest.approx(a1 * a2)
    ris = _ris()
    tx, rx = (5, 3, 0), (0, 5, 0)
    at = nf_steering(ris, tx, 28e9, "free_space")
    ar = nf_steering(ris, rx, 28e9, "free_space")
    best = np.exp(-1j * np.angle(at * ar))
    top = abs(ris_cascaded_path(tx, ris, best, rx, 28e9))
    assert top == pytest.approx(np.sum(np.abs(at * ar)), rel=1e-12)
    half = abs(ris_cascaded_path(tx, ris, best, rx, 28e9, make_mask(512, [(128, 384)])))
    assert half < top
    with pytest.raises(ValueError):
        ris_cascaded_path(tx, ris, best[:10], rx, 28e9)


@given(seed=st.integers(0, 2 ** 31))
def test_ris_conjugate_profile_is_upper_bound(seed):
    rng = np.random.default_rng(seed)
    ris = build_ula(16, 0.005, axis=(1, 0, 0), normal=(0, 1, 0))
    tx, rx = (1, 2, 0), (-0.5, 1, 0)
    at = nf_steering(ris, tx, 30e9, "free_space")
    ar = nf_steering(ris, rx, 30e9, "free_space")
    best = abs(ris_cascaded_path(tx, ris, np.exp(-1j * np.angle(at * ar)), rx, 30e9))
    rand = np.exp(2j * np.pi * rng.random(16))
    assert abs(ris_cascaded_path(tx, ris, rand, rx, 30e9)) <= best * (1 + 1e-12)


def test_ris_path_in_assemble_matches_cascade():
    ris = _ris()
    rx = build_ula(1, 0.01, center=(0, 5, 0))
    prof = np.exp(1j * np.linspace(0, 3, 512))
    g = OfdmGrid(28e9, 250e6, 4)
    H = assemble_channel([PropagationPath((5, 3, 0), kind="ris", ris=ris, ris_profile=prof)], rx, g)
    ref = ris_cascaded_path((5, 3, 0), ris, prof, (0, 5, 0), g.frequencies)
    np.testing.assert_allclose(H[0], ref, rtol=1e-12)


def test_synth_observation_contract():
    H = np.ones((4, 3), dtype=complex)
    np.testing.assert_array_equal(synth_observation(H, [1, 2, 3], 0.0, 0), H * [1, 2, 3])
    y1 = synth_observation(H, [1, 2, 3], 0.5, 7)
    y2 = synth_observation(H, [1, 2, 3], 0.5, 7)
    assert np.array_equal(y1, y2)
    with pytest.raises(ValueError):
        synth_observation(H, [1, 2], 0.5, 7)
    y = synth_observation(np.zeros((1000, 100)), np.ones(100), 1.0, 3)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(1.0, rel=0.05)
    assert abs(np.mean(y)) < 3 / np.sqrt(y.size)


def test_element_response_shapes():
    d = np.ones((3, 4))
    assert element_response(d, [1e9, 2e9]).shape == (3, 4, 2)
    assert element_response(d, 1e9).shape == (3, 4, 1)

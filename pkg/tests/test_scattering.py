import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from colldeco import scattering as sc
from colldeco.errors import InputError

# partial-wave sums evaluated with mpmath half-integer Bessel functions (30 digits, l <= 59)
HARD_SPHERE_SIGMA = {0.01: 12.565951782806584, 0.1: 12.524952426231317, 1.0: 10.626241899593979, 5.0: 8.1756065790694918}
HARD_SPHERE_F = [
    (1.0, 0.3, -0.60907682658917829 + 0.74834854334931422j),
    (5.0, -0.7, 0.49018121676343681 + 0.16069553746619149j),
]

vectors = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


def on_shell_pair(p, cos_t):
    sin_t = math.sqrt(1 - cos_t**2)
    return p * np.array([sin_t, 0.0, cos_t]), p * np.array([0.0, 0.0, 1.0])


def test_constant_amplitude_value():
    m = sc.ConstantAmplitude(0.7)
    assert sc.amplitude(m, 0, [1, 2, 3], 0, [0, 0, 0.1]) == 0.7


def test_hard_sphere_low_energy_limit():
    f = sc.amplitude(sc.HardSphere(1.0), 0, *on_shell_pair(1e-3, 0.5)[:1], 0, on_shell_pair(1e-3, 0.5)[1])
    assert abs(f - (-1.0)) < 1e-3


@pytest.mark.parametrize("p,cos_t,expected", HARD_SPHERE_F)
def test_hard_sphere_amplitude_oracle(p, cos_t, expected):
    out, inc = on_shell_pair(p, cos_t)
    assert sc.amplitude(sc.HardSphere(1.0), 0, out, 0, inc) == pytest.approx(expected, rel=1e-12)


def test_hard_sphere_rejects_off_shell():
    with pytest.raises(InputError) as exc:
        sc.HardSphere(1.0).amplitude(0, [0, 0, 1.0], 0, [0, 0, 1.1])
    assert exc.value.code == "OFF_SHELL_REQUEST"


@given(vectors, st.floats(-1.0, 1.0))
def test_gaussian_born_depends_on_transfer_only(p_in, r):
    model = sc.GaussianBorn(0.8, 0.6)
    rot = Rotation.from_rotvec([r, 2 * r, -r]).as_matrix()
    shift = np.array([0.3, -1.0, 2.0])
    a = model.amplitude(0, p_in + shift, 0, p_in)
    b = model.amplitude(0, rot @ (p_in + shift), 0, rot @ p_in)
    c = model.amplitude(0, shift, 0, np.zeros(3))
    assert a == pytest.approx(b, rel=1e-12) and a == pytest.approx(c, rel=1e-12)


@given(st.floats(0.05, 8.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_hard_sphere_detailed_balance(p, cos_t, r):
    model = sc.HardSphere(0.9)
    out, inc = on_shell_pair(p, cos_t)
    rot = Rotation.from_rotvec([r, 0.5, r * r]).as_matrix()
    f = model.amplitude(0, out, 0, inc)
    assert model.amplitude(0, -inc, 0, -out) == pytest.approx(f, rel=1e-10, abs=1e-14)
    assert model.amplitude(0, rot @ out, 0, rot @ inc) == pytest.approx(f, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("p", [0.3, 1.0, 4.0])
def test_constant_cross_section(p):
    model = sc.ConstantAmplitude(0.4 - 0.3j)
    assert sc.total_cross_section(model, p, 0) == pytest.approx(4 * math.pi * 0.25, rel=1e-12)


def test_hard_sphere_s_wave_limit():
    assert sc.total_cross_section(sc.HardSphere(1.0), 1e-2, 0) == pytest.approx(4 * math.pi, rel=1e-2)


@pytest.mark.parametrize("pa", sorted(HARD_SPHERE_SIGMA))
def test_hard_sphere_cross_section_oracle(pa):
    model = sc.HardSphere(1.0)
    assert sc.total_cross_section(model, pa, 0) == pytest.approx(HARD_SPHERE_SIGMA[pa], rel=1e-10)
    assert model.cross_section(pa) == pytest.approx(HARD_SPHERE_SIGMA[pa], rel=1e-12)


def test_closed_channel_contributes_nothing():
    toy = sc.TwoChannelToy([0.0, 5.0], [[0.5, 0.2], [0.2, 0.3]])
    p = 1.0
    assert sc.final_momentum(toy, p, 0, 1) is None
    assert sc.total_cross_section(toy, p, 0) == pytest.approx(4 * math.pi * 0.25, rel=1e-12)
    assert toy.cross_section(p, 0) == pytest.approx(4 * math.pi * 0.25, rel=1e-12)


def test_open_inelastic_channel_has_flux_factor():
    toy = sc.TwoChannelToy([0.0, 1.0], [[0.5, 0.2], [0.2, 0.3]])
    p = 2.0
    pf = math.sqrt(2.0)
    expected = 4 * math.pi * (0.25 + pf / p * 0.04)
    assert sc.total_cross_section(toy, p, 0) == pytest.approx(expected, rel=1e-12)
    assert toy.cross_section(p, 0) == pytest.approx(expected, rel=1e-12)


@given(st.floats(0.01, 10.0))
def test_gaussian_born_closed_form_cross_section(p):
    model = sc.GaussianBorn(0.5, 0.8)
    assert model.cross_section(p) == pytest.approx(sc.total_cross_section(model, p, 0), rel=1e-8)


@pytest.mark.parametrize("pa", [0.1, 1.0, 5.0])
def test_optical_theorem_hard_sphere(pa):
    assert abs(sc.optical_theorem_defect(sc.HardSphere(1.0), pa, 0)) < 1e-8


def test_optical_theorem_hard_sphere_fixed_lmax():
    assert abs(sc.optical_theorem_defect(sc.HardSphere(1.0, l_max=30), 1.0, 0)) < 1e-8


def test_optical_theorem_fails_for_non_unitary_models():
    assert sc.optical_theorem_defect(sc.ConstantAmplitude(0.5), 1.0, 0) == pytest.approx(-1.0)
    assert not sc.ConstantAmplitude.unitary
    assert sc.optical_theorem_defect(sc.GaussianBorn(1.0, 1.0), 1.0, 0) != 0.0


@given(st.floats(0.05, 6.0))
def test_partial_wave_convergence(pa):
    model = sc.HardSphere(1.0)
    lm = model.lmax_for(pa)
    if pa <= lm / 2:
        a = sc.HardSphere(1.0, l_max=lm).cross_section(pa)
        b = sc.HardSphere(1.0, l_max=lm + 10).cross_section(pa)
        assert abs(a - b) <= 1e-10 * b


@given(st.floats(0.01, 10.0), st.sampled_from(["hard", "born", "const"]))
def test_cross_sections_non_negative(p, kind):
    model = {"hard": sc.HardSphere(0.7), "born": sc.GaussianBorn(-2.0, 0.5), "const": sc.ConstantAmplitude(1j)}[kind]
    assert model.cross_section(p) >= 0


def test_errors():
    with pytest.raises(InputError) as exc:
        sc.total_cross_section(sc.HardSphere(1.0), 0.0, 0)
    assert exc.value.code == "NEGATIVE_MOMENTUM"
    with pytest.raises(InputError) as exc:
        sc.ConstantAmplitude(1.0).amplitude(1, [0, 0, 1], 0, [0, 0, 1])
    assert exc.value.code == "UNKNOWN_CHANNEL"


def test_fingerprint_stable():
    assert sc.HardSphere(1.0).fingerprint() == sc.HardSphere(1.0).fingerprint()
    assert sc.HardSphere(1.0).fingerprint() != sc.HardSphere(2.0).fingerprint()

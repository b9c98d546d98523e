import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperresp.hilbert import HilbertError, partial_trace
from hyperresp.states import (
    AZIMUTHAL,
    BELL_ORDER,
    DEFAULT_CIRCULAR,
    RADIAL,
    TARGET_STATES,
    AmplitudeQuad,
    BellKind,
    CircularConvention,
    FamilyParams,
    arbitrary_state,
    bell_coefficients,
    catalog,
    circular_pol_convert,
    resource_identity_residual,
    family_state,
    hyperentangled_resource,
    hyperentangled_resource_bell_sum,
    ket,
    phase_aligned_residual,
    radial_identity_residual,
    spatial_basis_convert,
    spin_orbit_bell,
    superpose,
)

S2 = math.sqrt(2)
# (Hl, Hr, Vl, Vr) written out by hand
HAND_BELL = {
    "phi+": np.array([1, 0, 0, 1]) / S2,
    "phi-": np.array([1, 0, 0, -1]) / S2,
    "psi+": np.array([0, 1, 1, 0]) / S2,
    "psi-": np.array([0, 1, -1, 0]) / S2,
}


def up_to_phase(a, b, tol=1e-12):
    return abs(abs(np.vdot(a, b)) - 1) < tol


@pytest.mark.parametrize("kind", list(HAND_BELL))
def test_spin_orbit_bell_matches_definition(kind):
    np.testing.assert_allclose(spin_orbit_bell(kind).amplitudes, HAND_BELL[kind], atol=1e-15)


def test_bell_states_orthonormal():
    m = np.array([spin_orbit_bell(k).amplitudes for k in BELL_ORDER])
    np.testing.assert_allclose(m @ m.conj().T, np.eye(4), atol=1e-15)


def test_bell_kind_symbols():
    assert BellKind("psi-").symbol == "ψ⁻"


def test_resource_two_constructions_agree():
    a, b = hyperentangled_resource(), hyperentangled_resource_bell_sum()
    assert abs(np.vdot(a.amplitudes, b.amplitudes)) == pytest.approx(1, abs=1e-12)
    assert resource_identity_residual() < 1e-12


def test_resource_amplitude_by_hand_expansion():
    res = hyperentangled_resource()
    # (|HH>+|VV>)(|lr>+|rl>)/2 with pair order (polA, orbA, polB, orbB)
    for lab in ("HlHr", "HrHl", "VlVr", "VrVl"):
        assert res.amplitude(lab) == pytest.approx(0.5)
    assert res.amplitude("HlHl") == 0


def test_resource_reduced_state_is_maximally_mixed():
    np.testing.assert_allclose(partial_trace(hyperentangled_resource(), (2, 3)).matrix, np.eye(4) / 4, atol=1e-15)


def test_family_state_canonical_reductions():
    p = FamilyParams(alpha=math.pi / 4, beta=math.pi / 4)
    assert up_to_phase(family_state("phi+", p).amplitudes, HAND_BELL["psi+"])
    assert up_to_phase(family_state("psi-", p).amplitudes, HAND_BELL["phi-"])


def test_family_state_radial_member():
    p = FamilyParams(alpha=math.pi / 4, beta=math.pi / 4, eta=math.pi, theta=math.pi / 4, phi=-math.pi / 2)
    assert up_to_phase(family_state("phi+", p).amplitudes, RADIAL.amplitudes)


def test_family_params_reject_non_finite():
    with pytest.raises(HilbertError):
        FamilyParams(alpha=float("nan"))


def test_arbitrary_state_examples():
    assert up_to_phase(arbitrary_state(AmplitudeQuad(1, 0, 0, 0)).amplitudes, HAND_BELL["phi+"])
    hr = arbitrary_state(AmplitudeQuad(0, 0, 1 / S2, 1 / S2))
    np.testing.assert_allclose(hr.amplitudes, ket("Hr").amplitudes, atol=1e-15)


def test_amplitude_quad_norm_checked():
    with pytest.raises(HilbertError):
        AmplitudeQuad(1, 1, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bell_coefficient_round_trip(seed):
    q = AmplitudeQuad.random(np.random.default_rng(seed))
    np.testing.assert_allclose(bell_coefficients(arbitrary_state(q)), q.as_array(), atol=1e-12)


def test_spatial_conversion_examples():
    hv = spatial_basis_convert(ket("Hl"), "hv")
    assert hv.labels == ("Hh", "Hv", "Vh", "Vv")
    # h = (l+r)/√2, v = i(l−r)/√2 so l = (h − i v)/√2
    np.testing.assert_allclose(hv.amplitudes, np.array([1, -1j, 0, 0]) / S2, atol=1e-15)
    state = superpose((1, "Hh"), (1, "Vv"))
    lr = spatial_basis_convert(state, "lr")
    np.testing.assert_allclose(lr.amplitudes, np.array([1, 1, 1j, -1j]) / 2, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_double_conversions_are_identity(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    from hyperresp.states import single_photon

    s = single_photon(v / np.linalg.norm(v))
    back = spatial_basis_convert(spatial_basis_convert(s, "hv"), "lr")
    np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)
    back = circular_pol_convert(circular_pol_convert(s, "RL"), "HV")
    np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)
    assert back.labels == s.labels


def test_circular_convention_and_radial_identity():
    m = DEFAULT_CIRCULAR.matrix()
    np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-15)
    assert radial_identity_residual() < 1e-10
    # the opposite handedness breaks the identity
    flipped = CircularConvention(DEFAULT_CIRCULAR.left, DEFAULT_CIRCULAR.right)
    assert radial_identity_residual(flipped) > 0.1


def test_vector_states_in_circular_basis():
    rl = circular_pol_convert(RADIAL, "RL")
    expected = np.zeros(4, complex)
    expected[rl.labels.index("Rr")] = 1 / S2
    expected[rl.labels.index("Ll")] = -1 / S2
    assert phase_aligned_residual(rl.amplitudes, expected) < 1e-12
    rl = circular_pol_convert(AZIMUTHAL, "RL")
    expected[rl.labels.index("Ll")] = 1 / S2
    assert phase_aligned_residual(rl.amplitudes, expected) < 1e-12


def test_table_targets_and_catalog():
    assert sorted(TARGET_STATES) == ["2" + c for c in "abcdefghijk"]
    cat = catalog()
    assert cat["mixed"].dim == 4
    np.testing.assert_allclose(cat["classical_psi"].matrix, np.diag([0, 0.5, 0.5, 0]))
    np.testing.assert_allclose(cat["classical_phi"].matrix, np.diag([0.5, 0, 0, 0.5]))

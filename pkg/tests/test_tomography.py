import json
import math

import numpy as np
import pytest

from hyperresp import metrics, tomography as T
from hyperresp.serialize import SchemaError
from hyperresp.states import TARGET_STATES, ket, spin_orbit_bell


def test_catalog_is_informationally_complete():
    cat = T.setting_catalog()
    assert len(cat) == 36
    assert T.design_rank(cat) == 16
    assert T.design_rank(T.setting_catalog(2)) == 4
    for s in cat:
        np.testing.assert_allclose(s.projector @ s.projector, s.projector, atol=1e-14)
        assert np.trace(s.projector).real == pytest.approx(1)


def test_setting_labels_round_trip_and_reject_unknown():
    assert T.setting("Dh").label == "Dh"
    with pytest.raises(T.TomographyError):
        T.setting("Qx")


def test_expected_counts_examples():
    cat = T.setting_catalog()
    rec = T.expected_counts(ket("Hl"), cat, 1000)
    c = dict(zip(rec.labels, rec.counts))
    assert c["Hl"] == pytest.approx(1000)
    assert c["Vl"] == pytest.approx(0, abs=1e-9)
    assert c["Hr"] == pytest.approx(0, abs=1e-9)
    assert c["Dl"] == pytest.approx(500)
    assert c["Hh"] == pytest.approx(500)


def test_simulated_mixed_counts_match_poisson_mean():
    cat = T.setting_catalog()
    rec = T.simulate_counts(np.eye(4) / 4, cat, 36 * 400 * 4, seed=7)
    # Every projector sees p = 1/4 of a mean_total 57600, i.e. 14400 expected.
    mu = 14400
    assert np.all(np.abs(rec.counts - mu) < 5 * math.sqrt(mu))
    assert T.simulate_counts(np.eye(4) / 4, cat, 1000, seed=7).counts.tolist() == \
        T.simulate_counts(np.eye(4) / 4, cat, 1000, seed=7).counts.tolist()


def test_depolarizing():
    phi = spin_orbit_bell("phi+")
    np.testing.assert_allclose(T.depolarizing(phi, 1).matrix, np.eye(4) / 4)
    np.testing.assert_allclose(T.depolarizing(phi, 0).matrix, phi.density().matrix)
    with pytest.raises(T.TomographyError):
        T.depolarizing(phi, -0.1)
    p = T.depolarizing_for_fidelity(0.955)
    assert metrics.fidelity(T.depolarizing(phi, p), phi) == pytest.approx(0.955)


def test_linear_reconstruction_noiseless_and_negative_at_low_counts():
    cat = T.setting_catalog()
    rho = T.depolarizing(spin_orbit_bell("psi-"), 0.1).matrix
    lin = T.linear_reconstruct(T.expected_counts(rho, cat, 1e5))
    np.testing.assert_allclose(lin.matrix, rho, atol=1e-12)
    assert not lin.negative
    low = T.linear_reconstruct(T.simulate_counts(spin_orbit_bell("phi+"), cat, 100, seed=3))
    assert low.negative and low.min_eigenvalue < 0
    phys = T.project_to_physical(low.matrix)
    assert np.linalg.eigvalsh(phys).min() > -1e-12
    assert np.trace(phys).real == pytest.approx(1)


def test_linear_reconstruction_requires_complete_settings():
    rec = T.expected_counts(ket("Hl"), T.setting_catalog()[:10], 100)
    with pytest.raises(T.TomographyError):
        T.linear_reconstruct(rec)


@pytest.mark.parametrize("key", sorted(TARGET_STATES))
def test_mle_noiseless_targets(key):
    _, target = TARGET_STATES[key]
    res = T.mle_reconstruct(T.expected_counts(target, T.setting_catalog(), 1e6))
    assert res.converged
    assert metrics.fidelity(res.rho, target) > 1 - 1e-6
    assert np.trace(res.rho.matrix).real == pytest.approx(1, abs=1e-12)
    assert np.linalg.eigvalsh(res.rho.matrix).min() > -1e-12


def test_mle_history_is_monotone_and_beats_linear_start():
    counts = T.simulate_counts(spin_orbit_bell("phi+"), T.setting_catalog(), 500, seed=11)
    res = T.mle_reconstruct(counts)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12)
    lin = T.project_to_physical(T.linear_reconstruct(counts).matrix)
    assert res.log_likelihood >= T.poisson_log_likelihood(counts, lin) - 1e-9


def test_mle_random_restarts_agree():
    counts = T.simulate_counts(T.depolarizing(spin_orbit_bell("psi+"), 0.1), T.setting_catalog(), 2000, seed=5)
    rng = np.random.default_rng(0)
    lls = []
    for _ in range(10):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = g @ g.conj().T
        res = T.mle_reconstruct(counts, init=m / np.trace(m).real)
        assert res.converged
        lls.append(res.log_likelihood)
    assert max(lls) - min(lls) < 1e-6


def test_mle_single_qubit():
    h = np.array([[1, 0], [0, 0]], dtype=complex)
    res = T.mle_reconstruct(T.expected_counts(h, T.setting_catalog(2), 1e4))
    assert res.rho.matrix[0, 0].real == pytest.approx(1, abs=1e-6)


def test_all_zero_counts_rejected():
    cat = T.setting_catalog()
    rec = T.CountRecord(tuple(s.label for s in cat), np.zeros(len(cat)), 1.0)
    with pytest.raises(T.TomographyError):
        T.mle_reconstruct(rec)


def test_mixed_state_metrics_from_reconstruction():
    res = T.mle_reconstruct(T.expected_counts(np.eye(4) / 4, T.setting_catalog(), 1e6))
    assert metrics.linear_entropy(res.rho) == pytest.approx(1, abs=1e-4)
    assert metrics.tangle(res.rho) == pytest.approx(0, abs=1e-9)


def test_werner_tangle_oracle():
    phi = spin_orbit_bell("phi+")
    for f in (1.0, 0.955, 0.8, 0.5):
        rho = T.depolarizing(phi, T.depolarizing_for_fidelity(f))
        assert T.werner_tangle(f) == pytest.approx(metrics.tangle(rho), abs=1e-12)


def test_monte_carlo_deterministic():
    counts = T.simulate_counts(spin_orbit_bell("phi+"), T.setting_catalog(), 1e4, seed=1)
    a = T.monte_carlo_errors(counts, 3, seed=9, target=spin_orbit_bell("phi+"))
    b = T.monte_carlo_errors(counts, 3, seed=9, target=spin_orbit_bell("phi+"))
    assert a == b
    assert a.n_unconverged == 0
    with pytest.raises(T.TomographyError):
        T.monte_carlo_errors(counts, 1, seed=9, target=spin_orbit_bell("phi+"))


def test_monte_carlo_scaling():
    phi = spin_orbit_bell("phi+")
    rho = T.depolarizing(phi, T.depolarizing_for_fidelity(0.955))
    cat = T.setting_catalog()
    lo = T.monte_carlo_errors(T.expected_counts(rho, cat, 1e4), 30, seed=2, target=phi)
    hi = T.monte_carlo_errors(T.expected_counts(rho, cat, 1e6), 30, seed=2, target=phi)
    ratio = lo.fidelity.std / hi.fidelity.std
    assert 6 < ratio < 15


def test_count_record_json_and_csv_round_trip():
    rec = T.simulate_counts(ket("Hl"), T.setting_catalog(), 500, seed=4, acquisition_time=5.0)
    back = T.CountRecord.from_dict(json.loads(json.dumps(rec.to_dict())))
    assert back.labels == rec.labels and np.array_equal(back.counts, rec.counts)
    text = rec.to_csv()
    assert text.startswith("# schema_version=")
    back = T.CountRecord.from_csv(text)
    assert back.labels == rec.labels and np.array_equal(back.counts, rec.counts)
    assert back.acquisition_time == 5.0


def test_newer_schema_refused():
    rec = T.expected_counts(ket("Hl"), T.setting_catalog(), 10)
    doc = rec.to_dict()
    doc["schema_version"] = "2.0"
    with pytest.raises(SchemaError):
        T.CountRecord.from_dict(doc)
    text = rec.to_csv().replace("schema_version=1.0", "schema_version=9.1")
    with pytest.raises(SchemaError):
        T.CountRecord.from_csv(text)


def test_reconstruction_result_round_trip():
    res = T.mle_reconstruct(T.expected_counts(ket("Vr"), T.setting_catalog(), 1e3))
    back = T.ReconstructionResult.from_dict(json.loads(json.dumps(res.to_dict())))
    np.testing.assert_allclose(back.rho.matrix, res.rho.matrix)
    assert back.converged == res.converged

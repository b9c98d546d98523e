import math

import numpy as np
import pytest

from hyperresp import beams as B
from hyperresp.states import AZIMUTHAL, RADIAL, ket, superpose
from hyperresp.tomography import depolarizing

W = 1.15


def test_lg_null_on_axis_and_ring_radius():
    assert abs(B.lg_amplitude(1, 0.0, 0.0, W)) == 0
    assert abs(B.lg_amplitude(-1, 0.0, 0.0, W)) == 0
    r = np.linspace(0, 3 * W, 30001)
    i = np.abs(B.lg_amplitude(1, r, 0 * r, W)) ** 2
    assert r[np.argmax(i)] == pytest.approx(W / math.sqrt(2), abs=1e-3)


def test_lg_symmetry_and_normalization():
    x, y = 0.3, -0.7
    assert abs(B.lg_amplitude(1, x, y, W)) == pytest.approx(abs(B.lg_amplitude(-1, x, y, W)))
    assert B.lg_amplitude(-1, x, y, W) == pytest.approx(-np.conj(B.lg_amplitude(1, x, y, W)))
    xs = np.linspace(-6 * W, 6 * W, 801)
    X, Y = np.meshgrid(xs, xs)
    dA = (xs[1] - xs[0]) ** 2
    for l_index in (-1, 0, 1):
        assert np.sum(np.abs(B.lg_amplitude(l_index, X, Y, W)) ** 2) * dA == pytest.approx(1, abs=1e-6)
    overlap = np.sum(np.conj(B.lg_amplitude(1, X, Y, W)) * B.lg_amplitude(-1, X, Y, W)) * dA
    assert abs(overlap) < 1e-8
    with pytest.raises(B.BeamError):
        B.lg_amplitude(2, 0, 0, W)


def test_jones_linearity():
    a, b = ket("Hl"), ket("Vr")
    s = superpose((0.6, "Hl"), (0.8j, "Vr"))
    x, y = np.array([0.1, -0.5]), np.array([0.4, 0.2])
    np.testing.assert_allclose(B.jones_at(s, x, y, W),
                               0.6 * B.jones_at(a, x, y, W) + 0.8j * B.jones_at(b, x, y, W), atol=1e-15)


def test_power_conservation_on_fine_grid():
    grid = B.GridSpec(nx=161, ny=161, step=0.06, waist=W)
    fld = B.field_of_state(RADIAL, grid)
    assert fld.total_power() == pytest.approx(1, abs=1e-4)


def test_donut_profile():
    fld = B.field_of_state(RADIAL, B.GridSpec(nx=17, ny=17))
    s0 = fld.stokes[..., 0]
    assert s0[8, 8] == pytest.approx(0, abs=1e-15)
    assert s0.max() > 0


def test_uniform_polarization_stokes_examples():
    pos = (0.3, 0.3)
    grid = B.GridSpec()
    cases = {
        "H": (ket("Hl"), (1, 0, 0)),
        "V": (ket("Vr"), (-1, 0, 0)),
        "D": (superpose((1, "Hl"), (1, "Vl")), (0, 1, 0)),
        "R": (superpose((1, "Hl"), (1j, "Vl")), (0, 0, 1)),
    }
    for state, expected in cases.values():
        s = B.stokes_at(B.field_of_state(state, grid), pos)
        np.testing.assert_allclose(np.array(s.stokes[1:]) / s.stokes[0], expected, atol=1e-12)
        assert s.dop == pytest.approx(1)
    with pytest.raises(B.BeamError):
        B.stokes_at(B.field_of_state(ket("Hl"), grid), (10.0, 0.0))


def _orthogonal_fraction(state, unit):
    fld = B.field_of_state(state, B.GridSpec())
    x, y = fld.grid.mesh()
    r = np.hypot(x, y)
    e = fld.jones
    along = unit(x / r, y / r)
    across = np.stack([-along[..., 1], along[..., 0]], axis=-1)
    s0 = fld.stokes[..., 0]
    det = s0 > B.INDETERMINATE_FRACTION * s0.max()
    return (np.abs(np.sum(e * across, axis=-1)) ** 2 / s0)[det]


def test_radial_and_azimuthal_profiles():
    radial = _orthogonal_fraction(RADIAL, lambda c, s: np.stack([c, s], axis=-1))
    azimuthal = _orthogonal_fraction(AZIMUTHAL, lambda c, s: np.stack([-s, c], axis=-1))
    assert radial.max() < 1e-9
    assert azimuthal.max() < 1e-9


def test_pinhole_quadrature_integrates_polynomials():
    qx, qy, qw = B.pinhole_quadrature(2.0)
    assert qw.sum() == pytest.approx(1)
    assert np.sum(qw * (qx**2 + qy**2)) == pytest.approx(0.5)  # mean r² over the unit disk
    assert np.sum(qw * qx) == pytest.approx(0, abs=1e-15)
    with pytest.raises(B.BeamError):
        B.pinhole_quadrature(0)


def test_tiny_pinhole_matches_point_sample():
    grid = B.GridSpec()
    scan = B.pinhole_scan(RADIAL, grid, pinhole_diameter=grid.step / 10)
    fld = B.field_of_state(RADIAL, grid)
    for k in (20, 77, 130):
        point = B.stokes_at(fld, scan.samples[k].position)
        a = np.array(scan.samples[k].stokes[1:]) / scan.samples[k].stokes[0]
        b = np.array(point.stokes[1:]) / point.stokes[0]
        np.testing.assert_allclose(a, b, atol=1e-3)


def test_noiseless_scans():
    scan = B.pinhole_scan(RADIAL)
    assert len(scan.samples) == 256
    summ = B.profile_fidelity(scan, RADIAL)
    assert summ.n_points == 256
    assert summ.mean == pytest.approx(1, abs=1e-6)
    h = B.pinhole_scan(ket("Hl"))
    for s in h.determinate:
        np.testing.assert_allclose(s.rho, np.diag([1, 0]), atol=1e-12)


def test_depolarized_scan_closed_form_at_small_pinhole():
    p = 0.1
    rho = depolarizing(RADIAL, p).matrix
    scan = B.pinhole_scan(rho, pinhole_diameter=1e-4)
    summ = B.profile_fidelity(scan, RADIAL)
    assert summ.mean == pytest.approx(1 - p / 2, abs=1e-4)


def test_noisy_scan_is_seeded():
    grid = B.GridSpec(nx=6, ny=6, step=0.5)
    a = B.pinhole_scan(RADIAL, grid, counts_per_projection=25, seed=3)
    b = B.pinhole_scan(RADIAL, grid, counts_per_projection=25, seed=3)
    assert [s.stokes for s in a.samples] == [s.stokes for s in b.samples]
    with pytest.raises(B.BeamError):
        B.pinhole_scan(RADIAL, grid, counts_per_projection=-1)


def test_registration_recovers_offset():
    grid = B.GridSpec(origin_offset=(0.4, -0.2))
    scan = B.pinhole_scan(RADIAL, grid)
    reg = B.register_center(scan, RADIAL, span=3)
    assert not reg.degenerate
    cell = grid.step / 4
    assert abs(reg.offset[0] - 0.4) <= cell and abs(reg.offset[1] + 0.2) <= cell


def test_registration_degenerate_for_uniform_polarization():
    scan = B.pinhole_scan(ket("Hl"), B.GridSpec(nx=8, ny=8))
    assert B.register_center(scan, ket("Hl"), span=1).degenerate


def test_render_outputs():
    fld = B.field_of_state(RADIAL, B.GridSpec())
    svg1, csv1 = B.render_profile(fld)
    svg2, csv2 = B.render_profile(fld)
    assert svg1 == svg2 and csv1 == csv2
    assert svg1.startswith("<?xml") and svg1.rstrip().endswith("</svg>")
    lines = csv1.strip().splitlines()
    assert lines[0].startswith("# schema_version=")
    assert len(lines) == 2 + 256
    svg3, _ = B.render_profile(fld, style="intensity-projections")
    assert svg3.count("<rect") == 1 + 6 * 256
    with pytest.raises(B.BeamError):
        B.render_profile(fld, style="sketch")


def test_projection_images_of_horizontal_beam():
    scan = B.pinhole_scan(ket("Hl"))
    imgs = B.projection_images(scan.samples, scan.grid)
    assert np.abs(imgs["V"]).max() < 1e-12
    np.testing.assert_allclose(imgs["D"], imgs["H"] / 2, atol=1e-12)

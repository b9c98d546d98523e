"""Transverse vector-beam profiles of spin-orbit states.

|l> and |r> are the Laguerre-Gauss modes LG₀^{+1} and LG₀^{-1} at the waist
plane, with the Condon-Shortley sign (LG₊₁ = −g e^{iφ}, LG₋₁ = +g e^{−iφ}).
With the module-wide conventions R = (H + iV)/√2 and
h = (l + r)/√2, v = i(l − r)/√2, the state (|Hv> + |Vh>)/√2 is radially and
(|Hh> − |Vv>)/√2 azimuthally polarized.

A pinhole scan integrates the local polarization density matrix
M(x) ρ M(x)† (M maps spin-orbit to polarization through the mode
amplitudes) over the pinhole disk, simulates the six polarization
projections and reconstructs a 2×2 state per grid point.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tomography
from .hilbert import PureState, State
from .seeding import derive_seed, rng_for
from .serialize import SCHEMA_VERSION

INDETERMINATE_FRACTION = 1e-6
DEFAULT_PINHOLE = 0.5
RADIAL_NODES = 4
AZIMUTHAL_NODES = 8


class BeamError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Scan lattice in millimeters; ``origin_offset`` is the beam center in grid coordinates."""

    nx: int = 16
    ny: int = 16
    step: float = 0.2
    origin_offset: tuple[float, float] = (0.0, 0.0)
    waist: float = 1.15

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise BeamError("grid needs at least 2 points per axis")
        if not self.step > 0 or not self.waist > 0:
            raise BeamError("step and waist must be positive")
        object.__setattr__(self, "origin_offset", tuple(float(v) for v in self.origin_offset))

    @property
    def xs(self) -> np.ndarray:
        return (np.arange(self.nx) - (self.nx - 1) / 2) * self.step

    @property
    def ys(self) -> np.ndarray:
        return (np.arange(self.ny) - (self.ny - 1) / 2) * self.step

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid coordinates, shape (ny, nx), row-major with y increasing."""
        return np.meshgrid(self.xs, self.ys)

    def contains(self, x: float, y: float) -> bool:
        xs, ys = self.xs, self.ys
        return xs[0] - 1e-12 <= x <= xs[-1] + 1e-12 and ys[0] - 1e-12 <= y <= ys[-1] + 1e-12


def lg_amplitude(l_index: int, x, y, waist: float):
    """LG₀^{l} at the waist, unit-normalized over the plane (Condon-Shortley sign for l = +1)."""
    if waist <= 0:
        raise BeamError("waist must be positive")
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    r2 = (x * x + y * y) / waist**2
    gauss = math.sqrt(2 / math.pi) / waist * np.exp(-r2)
    if l_index == 0:
        return gauss.astype(complex)
    if l_index == 1:
        return -gauss * math.sqrt(2) * (x + 1j * y) / waist
    if l_index == -1:
        return gauss * math.sqrt(2) * (x - 1j * y) / waist
    raise BeamError(f"unsupported OAM index {l_index}")


def mode_amplitudes(x, y, waist: float) -> np.ndarray:
    """(u_l, u_r) stacked on the last axis."""
    return np.stack([lg_amplitude(1, x, y, waist), lg_amplitude(-1, x, y, waist)], axis=-1)


def _amplitudes(state: PureState) -> np.ndarray:
    if not isinstance(state, PureState) or state.dim != 4:
        raise BeamError("a 4-dimensional pure spin-orbit state is required")
    return state.amplitudes.reshape(2, 2)


def jones_at(state: PureState, x, y, waist: float) -> np.ndarray:
    """E_p = Σ_o ψ[p, o] u_o(x, y); the last axis is (E_H, E_V)."""
    u = mode_amplitudes(x, y, waist)
    return u @ _amplitudes(state).T


@dataclass(frozen=True, eq=False)
class TransverseField:
    grid: GridSpec
    jones: np.ndarray
    state: PureState | None = None

    @property
    def stokes(self) -> np.ndarray:
        return stokes_from_jones(self.jones)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.jones) ** 2) * self.grid.step**2)


def field_of_state(state: PureState, grid: GridSpec) -> TransverseField:
    x, y = grid.mesh()
    dx, dy = grid.origin_offset
    return TransverseField(grid, jones_at(state, x - dx, y - dy, grid.waist), state)


def stokes_from_jones(e: np.ndarray) -> np.ndarray:
    eh, ev = e[..., 0], e[..., 1]
    cross = np.conj(eh) * ev
    return np.stack([
        np.abs(eh) ** 2 + np.abs(ev) ** 2,
        np.abs(eh) ** 2 - np.abs(ev) ** 2,
        2 * cross.real,
        2 * cross.imag,
    ], axis=-1)


def stokes_from_rho(rho: np.ndarray) -> np.ndarray:
    """Stokes vector of a (possibly unnormalized) 2×2 polarization matrix, same convention as Jones."""
    rho = np.asarray(rho)
    hh, vv, hv = rho[..., 0, 0].real, rho[..., 1, 1].real, rho[..., 0, 1]
    return np.stack([hh + vv, hh - vv, 2 * hv.real, -2 * hv.imag], axis=-1)


def ellipse_parameters(s: np.ndarray) -> tuple[float, float, float]:
    """(orientation, ellipticity tan χ, degree of polarization) of one Stokes vector."""
    s0, s1, s2, s3 = (float(v) for v in s)
    pol = math.sqrt(s1 * s1 + s2 * s2 + s3 * s3)
    dop = min(1.0, pol / s0) if s0 > 0 else 0.0
    orientation = 0.5 * math.atan2(s2, s1)
    chi = 0.5 * math.asin(max(-1.0, min(1.0, s3 / pol))) if pol > 0 else 0.0
    return orientation, math.tan(chi), dop


@dataclass(frozen=True, eq=False)
class PolarizationSample:
    position: tuple[float, float]
    stokes: tuple[float, float, float, float]
    orientation: float
    ellipticity: float
    dop: float
    determinate: bool = True
    rho: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_stokes(cls, position, s, determinate=True, rho=None) -> "PolarizationSample":
        o, e, d = ellipse_parameters(s)
        return cls(tuple(float(v) for v in position), tuple(float(v) for v in s), o, e, d, determinate, rho)


def stokes_at(fld: TransverseField, position: tuple[float, float]) -> PolarizationSample:
    x, y = position
    if not fld.grid.contains(x, y):
        raise BeamError(f"position {position} outside the grid")
    if fld.state is not None:
        dx, dy = fld.grid.origin_offset
        e = jones_at(fld.state, x - dx, y - dy, fld.grid.waist)
    else:
        i = int(np.argmin(np.abs(fld.grid.xs - x)))
        j = int(np.argmin(np.abs(fld.grid.ys - y)))
        e = fld.jones[j, i]
    return PolarizationSample.from_stokes(position, stokes_from_jones(e))


def field_samples(fld: TransverseField) -> list[PolarizationSample]:
    x, y = fld.grid.mesh()
    s = fld.stokes
    peak = s[..., 0].max()
    out = []
    for j in range(fld.grid.ny):
        for i in range(fld.grid.nx):
            det = s[j, i, 0] > INDETERMINATE_FRACTION * peak
            out.append(PolarizationSample.from_stokes((x[j, i], y[j, i]), s[j, i], bool(det)))
    return out


def pinhole_quadrature(diameter: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Offsets and weights (summing to 1) of the 32-point polar rule over a disk."""
    if not diameter > 0:
        raise BeamError("pinhole diameter must be positive")
    radius = diameter / 2
    t, w = np.polynomial.legendre.leggauss(RADIAL_NODES)
    r = (t + 1) / 2 * radius
    wr = w / 2 * radius * r  # ∫ f r dr
    phi = 2 * np.pi * (np.arange(AZIMUTHAL_NODES) + 0.5) / AZIMUTHAL_NODES
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    weights = np.repeat(wr, AZIMUTHAL_NODES) * (2 * np.pi / AZIMUTHAL_NODES) / (np.pi * radius**2)
    return (rr * np.cos(pp)).ravel(), (rr * np.sin(pp)).ravel(), weights


def local_polarization(rho4: np.ndarray, x, y, waist: float) -> np.ndarray:
    """Unnormalized M(x) ρ M(x)† on the last two axes."""
    u = mode_amplitudes(x, y, waist)
    r = np.asarray(rho4).reshape(2, 2, 2, 2)  # (p, o, p', o')
    return np.einsum("...a,paqb,...b->...pq", u, r, u.conj())


def pinhole_polarization(state: State | np.ndarray, grid: GridSpec, diameter: float) -> np.ndarray:
    """Pinhole-averaged unnormalized polarization matrices, shape (ny, nx, 2, 2)."""
    rho4 = state if isinstance(state, np.ndarray) else state.density().matrix
    x, y = grid.mesh()
    dx, dy = grid.origin_offset
    qx, qy, qw = pinhole_quadrature(diameter)
    px = x[..., None] - dx + qx
    py = y[..., None] - dy + qy
    loc = local_polarization(rho4, px, py, grid.waist)
    return np.einsum("...k,...kpq->...pq", qw, loc)


def qubit_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Tr ρσ + 2√(det ρ det σ) for normalized 2×2 states."""
    dr = max(0.0, float(np.linalg.det(rho).real))
    ds = max(0.0, float(np.linalg.det(sigma).real))
    return float(np.clip(np.trace(rho @ sigma).real + 2 * math.sqrt(dr * ds), 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class ScanResult:
    grid: GridSpec
    pinhole_diameter: float
    counts_per_projection: float
    samples: list[PolarizationSample]

    @property
    def determinate(self) -> list[PolarizationSample]:
        return [s for s in self.samples if s.determinate]


def pinhole_scan(state: State | np.ndarray, grid: GridSpec = GridSpec(), pinhole_diameter: float = DEFAULT_PINHOLE,
                 counts_per_projection: float = 0.0, seed=None) -> ScanResult:
    """Per-point polarization tomography through a pinhole.

    ``counts_per_projection`` sets the expected counts in each projection at the
    brightest point for an unpolarized input (μ = 2C·Tr[Π ρ_pin]/I_peak); 0 uses
    exact expectations.  Point k draws from ``derive_seed(seed, k)``.
    """
    if counts_per_projection < 0:
        raise BeamError("counts_per_projection must be nonnegative")
    pin = pinhole_polarization(state, grid, pinhole_diameter)
    intensity = np.trace(pin, axis1=-2, axis2=-1).real
    peak = float(intensity.max())
    if peak <= 0:
        raise BeamError("the scanned field carries no power")
    settings = tomography.setting_catalog(2)
    labels = tuple(s.label for s in settings)
    projs = np.array([s.projector for s in settings])
    if seed is None and counts_per_projection > 0:
        seed = int(rng_for(None).integers(2**63))
    x, y = grid.mesh()
    samples = []
    for k, (j, i) in enumerate(np.ndindex(grid.ny, grid.nx)):
        pos = (x[j, i], y[j, i])
        local = pin[j, i]
        mu = np.clip(np.einsum("kpq,qp->k", projs, local).real, 0.0, None) / peak
        if counts_per_projection > 0:
            n = rng_for(derive_seed(seed, k)).poisson(2 * counts_per_projection * mu)
            if n.sum() == 0:
                samples.append(PolarizationSample.from_stokes(pos, np.zeros(4), False))
                continue
            rec = tomography.CountRecord(labels, n)
            rho = tomography.mle_reconstruct(rec).rho.matrix
            s0 = n.sum() / (6 * counts_per_projection)
        else:
            if intensity[j, i] < INDETERMINATE_FRACTION * peak:
                samples.append(PolarizationSample.from_stokes(pos, np.zeros(4), False))
                continue
            rec = tomography.CountRecord(labels, mu)
            lin = tomography.linear_reconstruct(rec)
            rho = lin.matrix if not lin.negative else tomography.mle_reconstruct(rec).rho.matrix
            s0 = intensity[j, i] / peak
        s = stokes_from_rho(rho) * s0
        samples.append(PolarizationSample.from_stokes(pos, s, True, rho))
    return ScanResult(grid, pinhole_diameter, counts_per_projection, samples)


def ideal_polarization(ideal: State, grid: GridSpec, diameter: float) -> np.ndarray:
    """Normalized pinhole-averaged ideal polarization states (zero where the ideal is dark)."""
    pin = pinhole_polarization(ideal, grid, diameter)
    tr = np.trace(pin, axis1=-2, axis2=-1).real
    return pin / np.where(tr > 0, tr, 1.0)[..., None, None]


@dataclass(frozen=True)
class FidelitySummary:
    mean: float
    std: float
    weighted_mean: float
    n_points: int


def _point_fidelities(scan: ScanResult, ideal_rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f, w = [], []
    for k, s in enumerate(scan.samples):
        if not s.determinate:
            continue
        j, i = divmod(k, scan.grid.nx)
        f.append(qubit_fidelity(s.rho, ideal_rho[j, i]))
        w.append(s.stokes[0])
    return np.array(f), np.array(w)


def profile_fidelity(scan: ScanResult, ideal: State) -> FidelitySummary:
    """Equal-weight and S0-weighted mean of per-point fidelities over determinate points."""
    f, w = _point_fidelities(scan, ideal_polarization(ideal, scan.grid, scan.pinhole_diameter))
    if f.size == 0:
        raise BeamError("no determinate points")
    std = float(f.std(ddof=1)) if f.size > 1 else 0.0
    return FidelitySummary(float(f.mean()), std, float(np.sum(w * f) / np.sum(w)), int(f.size))


@dataclass(frozen=True)
class Registration:
    offset: tuple[float, float]
    degenerate: bool
    objective: float


def register_center(scan: ScanResult, ideal: State, waist: float | None = None,
                    center: tuple[float, float] = (0.0, 0.0), span: int = 2, subdivisions: int = 4) -> Registration:
    """Beam-center offset maximizing the S0-weighted mean fidelity with the ideal profile.

    The search lattice covers ±``span`` grid steps around ``center`` at step/``subdivisions``.
    """
    grid = scan.grid if waist is None else replace(scan.grid, waist=waist)
    det = scan.determinate
    if not det or sum(s.stokes[0] for s in det) <= 0:
        raise BeamError("scan carries no determinate intensity")
    delta = grid.step / subdivisions
    ticks = np.arange(-span * subdivisions, span * subdivisions + 1) * delta
    best, best_val, values = (0.0, 0.0), -np.inf, []
    for oy in ticks:
        for ox in ticks:
            off = (center[0] + ox, center[1] + oy)
            ideal_rho = ideal_polarization(ideal, replace(grid, origin_offset=off), scan.pinhole_diameter)
            f, w = _point_fidelities(scan, ideal_rho)
            val = float(np.sum(w * f) / np.sum(w))
            values.append(val)
            if val > best_val + 1e-12:
                best, best_val = off, val
    if max(values) - min(values) < 1e-9:
        return Registration(tuple(center), True, best_val)
    return Registration((float(best[0]), float(best[1])), False, best_val)


def projection_images(samples: Sequence[PolarizationSample], grid: GridSpec) -> dict[str, np.ndarray]:
    """Intensity through each of the six polarization projections, shape (ny, nx) per label."""
    out = {}
    for st in tomography.setting_catalog(2):
        img = np.zeros((grid.ny, grid.nx))
        for k, s in enumerate(samples):
            if s.determinate:
                j, i = divmod(k, grid.nx)
                s0, s1, s2, s3 = s.stokes
                rho = 0.5 * np.array([[s0 + s1, s2 - 1j * s3], [s2 + 1j * s3, s0 - s1]])
                img[j, i] = max(0.0, np.trace(st.projector @ rho).real)
        out[st.label] = img
    return out


def samples_csv(samples: Sequence[PolarizationSample]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_mm", "y_mm", "S0", "S1", "S2", "S3", "dop", "orientation_rad", "ellipticity", "determinate_flag"])
    for s in samples:
        w.writerow([f"{s.position[0]:.6f}", f"{s.position[1]:.6f}", *(f"{v:.9e}" for v in s.stokes),
                    f"{s.dop:.9f}", f"{s.orientation:.9f}", f"{s.ellipticity:.9f}", int(s.determinate)])
    return buf.getvalue()


def _svg_header(width: float, height: float) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]


def _ellipse_svg(samples: Sequence[PolarizationSample], grid: GridSpec, cell: float) -> str:
    width, height = grid.nx * cell, grid.ny * cell
    peak = max((s.stokes[0] for s in samples if s.determinate), default=0.0)
    lines = _svg_header(width, height)
    for k, s in enumerate(samples):
        if not s.determinate or peak <= 0:
            continue
        j, i = divmod(k, grid.nx)
        cx, cy = (i + 0.5) * cell, (grid.ny - j - 0.5) * cell
        a = 0.45 * cell * s.dop
        b = a * abs(s.ellipticity)
        shade = int(round(255 * (1 - min(1.0, s.stokes[0] / peak))))
        color = "#c0392b" if s.ellipticity > 1e-6 else "#2c3e50" if s.ellipticity >= -1e-6 else "#2471a3"
        angle = -math.degrees(s.orientation)  # SVG y points down
        lines.append(f'<rect x="{i * cell:.3f}" y="{(grid.ny - j - 1) * cell:.3f}" width="{cell:.3f}" '
                     f'height="{cell:.3f}" fill="rgb({shade},{shade},{shade})" fill-opacity="0.35"/>')
        if b < 1e-6 * cell:
            dx, dy = a * math.cos(math.radians(angle)), a * math.sin(math.radians(angle))
            lines.append(f'<line x1="{cx - dx:.3f}" y1="{cy - dy:.3f}" x2="{cx + dx:.3f}" y2="{cy + dy:.3f}" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        else:
            lines.append(f'<ellipse cx="{cx:.3f}" cy="{cy:.3f}" rx="{a:.3f}" ry="{b:.3f}" '
                         f'transform="rotate({angle:.3f} {cx:.3f} {cy:.3f})" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _projection_svg(samples: Sequence[PolarizationSample], grid: GridSpec, cell: float) -> str:
    images = projection_images(samples, grid)
    peak = max(float(img.max()) for img in images.values()) or 1.0
    pad = cell
    panel_w, panel_h = grid.nx * cell, grid.ny * cell
    width, height = 3 * panel_w + 4 * pad, 2 * panel_h + 3 * pad + 2 * cell
    lines = _svg_header(width, height)
    for n, (label, img) in enumerate(images.items()):
        ox = pad + (n % 3) * (panel_w + pad)
        oy = pad + cell + (n // 3) * (panel_h + pad + cell)
        lines.append(f'<text x="{ox:.3f}" y="{oy - 0.3 * cell:.3f}" font-size="{cell:.1f}" '
                     f'font-family="sans-serif">{label}</text>')
        for j in range(grid.ny):
            for i in range(grid.nx):
                level = int(round(255 * img[j, i] / peak))
                lines.append(f'<rect x="{ox + i * cell:.3f}" y="{oy + (grid.ny - j - 1) * cell:.3f}" '
                             f'width="{cell:.3f}" height="{cell:.3f}" fill="rgb({level},{level},{level})"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_profile(source: TransverseField | ScanResult, style: str = "ellipse-grid",
                   cell: float = 24.0) -> tuple[str, str]:
    """Deterministic SVG document and Stokes CSV for a field or a scan."""
    if isinstance(source, TransverseField):
        samples, grid = field_samples(source), source.grid
    else:
        samples, grid = source.samples, source.grid
    if style == "ellipse-grid":
        svg = _ellipse_svg(samples, grid, cell)
    elif style == "intensity-projections":
        svg = _projection_svg(samples, grid, cell)
    else:
        raise BeamError(f"unknown render style {style!r}")
    return svg, samples_csv(samples)

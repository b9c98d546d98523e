"""Named states and basis conventions.

Conventions (fixed once, used everywhere):

* single photon ``pol ⊗ orbit`` ordered ``(Hl, Hr, Vl, Vr)``; ``l`` carries
  +1 unit of OAM, ``r`` carries -1;
* photon pairs ordered ``(polA, orbA, polB, orbB)``, i.e. Alice ⊗ Bob;
* circular polarization ``R = (H + iV)/√2``, ``L = (H - iV)/√2``;
* spatial superpositions ``h = (l + r)/√2``, ``v = i(l - r)/√2``.

The phase on ``v`` is what makes ``|Rr> - |Ll>`` and ``|Hv> + |Vh>`` the same
ray, and (together with the LG phase convention in :mod:`hyperresp.beams`)
makes that ray radially polarized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    DensityMatrix,
    HilbertError,
    PureState,
    State,
    basis_labels,
    permute,
    tensor,
)

S2 = math.sqrt(2.0)

POL_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / S2,
    "A": np.array([1, -1], dtype=complex) / S2,
    "R": np.array([1, 1j], dtype=complex) / S2,
    "L": np.array([1, -1j], dtype=complex) / S2,
}
SPATIAL_KETS = {
    "l": np.array([1, 0], dtype=complex),
    "r": np.array([0, 1], dtype=complex),
    "h": np.array([1, 1], dtype=complex) / S2,
    "v": 1j * np.array([1, -1], dtype=complex) / S2,
    "d": np.array([1, 1j], dtype=complex) / S2,
    "a": np.array([1, -1j], dtype=complex) / S2,
}

SINGLE_DIMS = (2, 2)
PAIR_DIMS = (2, 2, 2, 2)
SINGLE_LABELS = basis_labels("HV", "lr")
PAIR_LABELS = basis_labels("HV", "lr", "HV", "lr")


class BellKind(str, enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def symbol(self) -> str:
        return {"phi+": "φ⁺", "phi-": "φ⁻", "psi+": "ψ⁺", "psi-": "ψ⁻"}[self.value]


BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)


def single_photon(amplitudes, normalize: bool = False) -> PureState:
    amps = np.asarray(amplitudes, dtype=complex)
    if normalize:
        amps = amps / np.linalg.norm(amps)
    return PureState(amps, SINGLE_LABELS, SINGLE_DIMS)


def ket(label: str) -> PureState:
    """Product ket such as ``"Hl"``, ``"Dh"`` or ``"Rr"`` in the (Hl, Hr, Vl, Vr) basis."""
    if len(label) != 2 or label[0] not in POL_KETS or label[1] not in SPATIAL_KETS:
        raise HilbertError(f"unknown product label {label!r}")
    return single_photon(np.kron(POL_KETS[label[0]], SPATIAL_KETS[label[1]]))


def superpose(*terms: tuple[complex, str]) -> PureState:
    """Normalized ``sum c_k |label_k>``, e.g. ``superpose((1, "Hv"), (1, "Vh"))``."""
    amps = sum(c * ket(lab).amplitudes for c, lab in terms)
    return single_photon(amps, normalize=True)


def spin_orbit_bell(kind: BellKind | str) -> PureState:
    """Single-photon spin-orbit Bell state: φ± = (Hl ± Vr)/√2, ψ± = (Hr ± Vl)/√2."""
    kind = BellKind(kind)
    sign = 1 if kind.value.endswith("+") else -1
    if kind.value.startswith("phi"):
        return superpose((1, "Hl"), (sign, "Vr"))
    return superpose((1, "Hr"), (sign, "Vl"))


def two_photon_bell(kind: BellKind | str, dof: str = "spin") -> PureState:
    """Two-photon Bell state in one degree of freedom, ordered (photon A, photon B)."""
    kind = BellKind(kind)
    alphabet = {"spin": "HV", "orbit": "lr"}[dof]
    amps = np.zeros(4, dtype=complex)
    sign = 1 if kind.value.endswith("+") else -1
    if kind.value.startswith("phi"):
        amps[0], amps[3] = 1, sign
    else:
        amps[1], amps[2] = 1, sign
    return PureState(amps / S2, basis_labels(alphabet, alphabet), (2, 2))


def hyperentangled_resource() -> PureState:
    """Φ⁺_spin ⊗ Ψ⁺_orbit regrouped into Alice ⊗ Bob single-photon factors."""
    raw = tensor(two_photon_bell("phi+", "spin"), two_photon_bell("psi+", "orbit"))
    # (polA, polB, orbA, orbB) -> (polA, orbA, polB, orbB)
    return permute(raw, (0, 2, 1, 3))


def hyperentangled_resource_bell_sum() -> PureState:
    """Same resource written as ½(φ⁺φ⁺-pairings) in the single-photon Bell basis."""
    b = {k: spin_orbit_bell(k).amplitudes for k in BellKind}
    amps = 0.5 * (
        np.kron(b[BellKind.PHI_PLUS], b[BellKind.PSI_PLUS])
        + np.kron(b[BellKind.PHI_MINUS], b[BellKind.PSI_MINUS])
        + np.kron(b[BellKind.PSI_PLUS], b[BellKind.PHI_PLUS])
        + np.kron(b[BellKind.PSI_MINUS], b[BellKind.PHI_MINUS])
    )
    return PureState(amps, PAIR_LABELS, PAIR_DIMS)


def phase_aligned_residual(a: np.ndarray | PureState, b: np.ndarray | PureState) -> float:
    """Max entrywise |â - e^{iχ} b̂| with the best global phase χ."""
    va = a.amplitudes if isinstance(a, PureState) else np.asarray(a, dtype=complex)
    vb = b.amplitudes if isinstance(b, PureState) else np.asarray(b, dtype=complex)
    va = va / np.linalg.norm(va)
    vb = vb / np.linalg.norm(vb)
    ov = np.vdot(vb, va)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.abs(va - phase * vb).max())


def resource_identity_residual() -> float:
    return phase_aligned_residual(hyperentangled_resource(), hyperentangled_resource_bell_sum())


@dataclass(frozen=True)
class FamilyParams:
    """Angles (radians) of the rotated-BSA family.  No range reduction is applied."""

    alpha: float = math.pi / 4
    beta: float = math.pi / 4
    eta: float = 0.0
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "eta", "theta", "phi"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise HilbertError(f"family parameter {name} is not finite")
            object.__setattr__(self, name, val)


def xi(theta: float, phi: float) -> np.ndarray:
    """Polarization ``cosθ|H> - e^{iφ} sinθ|V>``."""
    return np.array([math.cos(theta), -np.exp(1j * phi) * math.sin(theta)], dtype=complex)


def xi_perp(theta: float, phi: float) -> np.ndarray:
    return np.array([math.sin(theta), np.exp(1j * phi) * math.cos(theta)], dtype=complex)


def family_state(branch: BellKind | str, p: FamilyParams) -> PureState:
    """Bob's state for one branch of the four-parameter family."""
    branch = BellKind(branch)
    x, xp = xi(p.theta, p.phi), xi_perp(p.theta, p.phi)
    l, r = SPATIAL_KETS["l"], SPATIAL_KETS["r"]
    e = np.exp(1j * p.eta)
    ang = p.alpha if branch.value.startswith("phi") else p.beta
    near, far = (r, l) if branch.value.startswith("phi") else (l, r)
    c, s = math.cos(ang), math.sin(ang)
    if branch.value.endswith("+"):
        amps = c * np.kron(x, near) + e * s * np.kron(xp, far)
    else:
        amps = s * np.kron(x, near) - e * c * np.kron(xp, far)
    return single_photon(amps)


@dataclass(frozen=True)
class AmplitudeQuad:
    """Coefficients of ``a φ⁺ + b φ⁻ + c ψ⁺ + d ψ⁻``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        norm = sum(abs(getattr(self, n)) ** 2 for n in "abcd")
        if abs(norm - 1.0) > 1e-12:
            raise HilbertError(f"|a|²+|b|²+|c|²+|d|² = {norm!r}, expected 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=complex)

    @classmethod
    def from_array(cls, v) -> "AmplitudeQuad":
        return cls(*np.asarray(v, dtype=complex))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "AmplitudeQuad":
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        return cls.from_array(v / np.linalg.norm(v))


def bell_matrix() -> np.ndarray:
    """Columns are φ⁺, φ⁻, ψ⁺, ψ⁻ in the (Hl, Hr, Vl, Vr) basis."""
    return np.column_stack([spin_orbit_bell(k).amplitudes for k in BELL_ORDER])


def arbitrary_state(q: AmplitudeQuad) -> PureState:
    return single_photon(bell_matrix() @ q.as_array())


def bell_coefficients(state: PureState) -> np.ndarray:
    """Inverse of :func:`arbitrary_state`: ``(<φ⁺|ψ>, <φ⁻|ψ>, <ψ⁺|ψ>, <ψ⁻|ψ>)``."""
    return bell_matrix().conj().T @ state.amplitudes


def _change_factor(state: State, factor: int, w: np.ndarray, old: str, new: str) -> State:
    """Apply basis-change matrix ``w`` to one factor of a single-photon state."""
    full = np.kron(w, np.eye(2)) if factor == 0 else np.kron(np.eye(2), w)
    labels = [lab[:factor] + new[old.index(lab[factor])] + lab[factor + 1:] for lab in state.labels]
    if isinstance(state, PureState):
        return PureState(full @ state.amplitudes, labels, state.dims)
    return DensityMatrix(full @ state.matrix @ full.conj().T, labels, state.dims)


def _current_alphabet(state: State, factor: int) -> str:
    if len(state.dims) != 2 or state.dim != 4:
        raise HilbertError("basis conversion expects a single-photon (2x2) state")
    letters = {lab[factor] for lab in state.labels}
    for alpha in (("HV", "RL"), ("lr", "hv"))[factor]:
        if letters == set(alpha):
            return alpha
    raise HilbertError(f"unrecognized labels {state.labels}")


def spatial_basis_convert(state: State, to: str) -> State:
    """Re-express the orbit qubit in ``"lr"`` or ``"hv"`` coordinates."""
    if to not in ("lr", "hv"):
        raise HilbertError(f"unknown spatial basis {to!r}")
    cur = _current_alphabet(state, 1)
    if cur == to:
        return state
    w = np.array([SPATIAL_KETS["h"].conj(), SPATIAL_KETS["v"].conj()])  # rows <h|, <v| in l/r coords
    if to == "lr":
        w = w.conj().T
    return _change_factor(state, 1, w, cur, to)


@dataclass(frozen=True, eq=False)
class CircularConvention:
    """``R`` and ``L`` written in the (H, V) basis."""

    right: np.ndarray = field(default_factory=lambda: POL_KETS["R"].copy())
    left: np.ndarray = field(default_factory=lambda: POL_KETS["L"].copy())

    def matrix(self) -> np.ndarray:
        """Rows <R|, <L| in (H, V) coordinates."""
        return np.array([np.conj(self.right), np.conj(self.left)])


DEFAULT_CIRCULAR = CircularConvention()


def circular_pol_convert(state: State, to: str, convention: CircularConvention = DEFAULT_CIRCULAR) -> State:
    """Re-express the polarization qubit in ``"RL"`` or ``"HV"`` coordinates."""
    if to not in ("HV", "RL"):
        raise HilbertError(f"unknown polarization basis {to!r}")
    w = convention.matrix()
    if np.abs(w @ w.conj().T - np.eye(2)).max() > 1e-12:
        raise HilbertError("circular convention vectors are not orthonormal")
    cur = _current_alphabet(state, 0)
    if cur == to:
        return state
    if to == "HV":
        w = w.conj().T
    return _change_factor(state, 0, w, cur, to)


def radial_identity_residual(convention: CircularConvention = DEFAULT_CIRCULAR) -> float:
    """Residual of |Rr> - |Ll> = |Hv> + |Vh> (up to global phase and norm)."""
    r, l = SPATIAL_KETS["r"], SPATIAL_KETS["l"]
    lhs = np.kron(convention.right, r) - np.kron(convention.left, l)
    rhs = ket("Hv").amplitudes + ket("Vh").amplitudes
    return phase_aligned_residual(lhs, rhs)


def classically_correlated(which: str) -> DensityMatrix:
    """Equal mixture (|Hl><Hl| + |Vr><Vr|)/2 (``"phi"``) or (|Hr><Hr| + |Vl><Vl|)/2 (``"psi"``)."""
    pair = {"phi": ("Hl", "Vr"), "psi": ("Hr", "Vl")}[which]
    m = sum(ket(lab).density().matrix for lab in pair) / 2
    return DensityMatrix(m, SINGLE_LABELS, SINGLE_DIMS)


def completely_mixed() -> DensityMatrix:
    return DensityMatrix(np.eye(4) / 4, SINGLE_LABELS, SINGLE_DIMS)


RADIAL = superpose((1, "Hv"), (1, "Vh"))
AZIMUTHAL = superpose((1, "Hh"), (-1, "Vv"))

# Target states of the quality table, keyed by panel label.
TARGET_STATES: dict[str, tuple[str, State]] = {
    "2a": ("φ⁺", spin_orbit_bell("phi+")),
    "2b": ("φ⁻", spin_orbit_bell("phi-")),
    "2c": ("ψ⁺", spin_orbit_bell("psi+")),
    "2d": ("ψ⁻", spin_orbit_bell("psi-")),
    "2e": ("(|Hl><Hl|+|Vr><Vr|)/2", classically_correlated("phi")),
    "2f": ("(|Hr><Hr|+|Vl><Vl|)/2", classically_correlated("psi")),
    "2g": ("I/4", completely_mixed()),
    "2h": ("(|Hh>+|Vv>)/√2", superpose((1, "Hh"), (1, "Vv"))),
    "2i": ("(|Hh>-|Vv>)/√2", superpose((1, "Hh"), (-1, "Vv"))),
    "2j": ("(|Hv>+|Vh>)/√2", superpose((1, "Hv"), (1, "Vh"))),
    "2k": ("(|Hv>-|Vh>)/√2", superpose((1, "Hv"), (-1, "Vh"))),
}


def catalog() -> dict[str, State]:
    """Every named state, keyed by a short identifier."""
    out: dict[str, State] = {k.value: spin_orbit_bell(k) for k in BellKind}
    for k in BellKind:
        out[f"{k.value}_spin"] = two_photon_bell(k, "spin")
        out[f"{k.value}_orbit"] = two_photon_bell(k, "orbit")
    out["resource"] = hyperentangled_resource()
    out["radial"] = RADIAL
    out["azimuthal"] = AZIMUTHAL
    out["classical_phi"] = classically_correlated("phi")
    out["classical_psi"] = classically_correlated("psi")
    out["mixed"] = completely_mixed()
    for key, (_, st) in TARGET_STATES.items():
        out[f"table1_{key}"] = st
    return out

"""Remote state preparation over the hyperentangled pair.

Four protocols share one resource, Φ⁺_spin ⊗ Ψ⁺_orbit (2 ebits):

* canonical: Alice's spin-orbit BSA + a Pauli correction on Bob's
  polarization (2 cbits);
* family: Alice rotates her polarization and measures a rotated BSA
  (2 cbits, no correction);
* mixed: coarse-grained BSA (1 cbit), no measurement (0 cbits),
  orbit dephasing, or ensembles;
* arbitrary: four-outcome POVM, a von Neumann measurement, and two
  Bell-basis corrections (4 cbits, or 1 cbit heralded).

Only forward classical communication is counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import metrics
from .hilbert import (
    DensityMatrix,
    KrausSet,
    PureState,
    State,
    embed,
    hermitize,
    partial_trace,
    projector,
    sample_outcome,
)
from .seeding import rng_for
from .serialize import check_schema, state_from_json, state_to_json, tagged
from .states import (
    BELL_ORDER,
    PAIR_DIMS,
    SINGLE_DIMS,
    SINGLE_LABELS,
    AmplitudeQuad,
    BellKind,
    FamilyParams,
    arbitrary_state,
    bell_matrix,
    family_state,
    hyperentangled_resource,
    ket,
    single_photon,
    spin_orbit_bell,
)

EBITS = 2


class ProtocolError(ValueError):
    pass


I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "Z": np.diag([1, -1]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
}
PAULI["XZ"] = PAULI["X"] @ PAULI["Z"]  # V→−V first, then H↔V

CORRECTION_TEXT = {"I": "identity", "Z": "V→−V", "X": "H↔V", "XZ": "V→−V and H↔V"}
CORRECTION_BITS = {"I": "00", "Z": "01", "X": "10", "XZ": "11"}

# target -> Alice outcome -> Pauli on Bob's polarization.  The psi+ row is the
# reference rule; the other rows compose it with the Pauli taking psi+ to the
# target (psi-: Z, phi+: X, phi-: XZ).
CORRECTION_TABLE: dict[str, dict[str, str]] = {
    "psi+": {"phi+": "I", "phi-": "Z", "psi+": "X", "psi-": "XZ"},
    "psi-": {"phi+": "Z", "phi-": "I", "psi+": "XZ", "psi-": "X"},
    "phi+": {"phi+": "X", "phi-": "XZ", "psi+": "I", "psi-": "Z"},
    "phi-": {"phi+": "XZ", "phi-": "X", "psi+": "Z", "psi-": "I"},
}

# Bob's photon seen through one mirror: V→−V on polarization, l↔r on OAM.
MIRROR_FRAME = np.kron(PAULI["Z"], PAULI["X"])


def pol_operator(u2: np.ndarray) -> np.ndarray:
    """Lift a 2x2 polarization operator to the single-photon space."""
    return np.kron(np.asarray(u2, dtype=complex), I2)


def correction_operator(name: str) -> np.ndarray:
    return pol_operator(PAULI[name])


@lru_cache(maxsize=1)
def _resource() -> PureState:
    return hyperentangled_resource()


@dataclass(frozen=True, eq=False)
class BsaOutcome:
    label: str
    probability: float
    alice_vector: np.ndarray
    bob_state: PureState | None


@dataclass(frozen=True, eq=False)
class ProtocolTranscript:
    protocol: str
    alice_outcome: str
    probability: float
    cbits_sent: int
    ebits_consumed: int
    correction: str
    message: str
    bob_state: State
    target: State | None = None
    success: bool = True
    details: dict = field(default_factory=dict)

    def fidelity(self) -> float | None:
        if self.target is None:
            return None
        return metrics.fidelity(self.bob_state, self.target)

    def to_dict(self) -> dict:
        return tagged("transcript", {
            "protocol": self.protocol,
            "alice_outcome": self.alice_outcome,
            "probability": self.probability,
            "cbits_sent": self.cbits_sent,
            "ebits_consumed": self.ebits_consumed,
            "correction": self.correction,
            "message": self.message,
            "success": self.success,
            "fidelity": self.fidelity(),
            "bob_state": state_to_json(self.bob_state),
            "target": None if self.target is None else state_to_json(self.target),
        })

    @classmethod
    def from_dict(cls, doc: dict) -> "ProtocolTranscript":
        check_schema(doc, "transcript")
        return cls(
            protocol=doc["protocol"],
            alice_outcome=doc["alice_outcome"],
            probability=doc["probability"],
            cbits_sent=doc["cbits_sent"],
            ebits_consumed=doc["ebits_consumed"],
            correction=doc["correction"],
            message=doc["message"],
            bob_state=state_from_json(doc["bob_state"]),
            target=None if doc["target"] is None else state_from_json(doc["target"]),
            success=doc["success"],
        )


def canonical_bsa_vectors() -> list[tuple[str, np.ndarray]]:
    return [(k.value, spin_orbit_bell(k).amplitudes) for k in BELL_ORDER]


def rotated_bsa_vectors(alpha: float, beta: float) -> list[tuple[str, np.ndarray]]:
    """φ±_A(α) on the (Hr, Vl) pair, ψ±_A(β) on the (Hl, Vr) pair."""
    hr, vl, hl, vr = (ket(x).amplitudes for x in ("Hr", "Vl", "Hl", "Vr"))
    ca, sa, cb, sb = math.cos(alpha), math.sin(alpha), math.cos(beta), math.sin(beta)
    return [
        ("phi+", ca * hr + sa * vl),
        ("phi-", sa * hr - ca * vl),
        ("psi+", cb * hl + sb * vr),
        ("psi-", sb * hl - cb * vr),
    ]


def _bob_conditional(joint: np.ndarray, alice: np.ndarray) -> tuple[float, PureState | None]:
    bob = alice.conj() @ joint.reshape(4, 4)
    p = float(np.vdot(bob, bob).real)
    if p < 1e-15:
        return 0.0, None
    return p, single_photon(bob / math.sqrt(p))


def bsa_project(resource: PureState, rotated: tuple[float, float] | None = None) -> list[BsaOutcome]:
    """Alice's (possibly rotated) spin-orbit BSA and Bob's conditional states."""
    if resource.dim != 16:
        raise ProtocolError(f"BSA expects the 16-dimensional pair state, got dimension {resource.dim}")
    vectors = canonical_bsa_vectors() if rotated is None else rotated_bsa_vectors(*rotated)
    out = []
    for label, vec in vectors:
        p, bob = _bob_conditional(resource.amplitudes, vec)
        out.append(BsaOutcome(label, p, vec, bob))
    return out


def bsa_operators(rotated: tuple[float, float] | None = None) -> list[np.ndarray]:
    vectors = canonical_bsa_vectors() if rotated is None else rotated_bsa_vectors(*rotated)
    return [np.kron(projector(v), np.eye(4)) for _, v in vectors]


def canonical_conditional(outcome: BellKind | str) -> BellKind:
    """Bob's Bell state after Alice's canonical outcome: φ±_A ↦ ψ±_B, ψ±_A ↦ φ±_B."""
    outcome = BellKind(outcome)
    swap = {"phi": "psi", "psi": "phi"}
    return BellKind(swap[outcome.value[:3]] + outcome.value[3])


def apply_correction(outcome: BellKind | str, target: BellKind | str, bob_state: PureState) -> tuple[PureState, str]:
    """Bob's table-driven Pauli correction; returns the corrected state and the 2-bit message."""
    outcome, target = BellKind(outcome), BellKind(target)
    overlaps = {k: abs(np.vdot(spin_orbit_bell(k).amplitudes, bob_state.amplitudes)) for k in BELL_ORDER}
    best = max(overlaps, key=overlaps.get)
    if overlaps[best] < 1 - 1e-6:
        raise ProtocolError("Bob's state is not a spin-orbit Bell state")
    if best != canonical_conditional(outcome):
        raise ProtocolError(f"Bob holds {best.value}, which does not follow from outcome {outcome.value}")
    name = CORRECTION_TABLE[target.value][outcome.value]
    amps = correction_operator(name) @ bob_state.amplitudes
    return single_photon(amps), CORRECTION_BITS[name]


def run_resp(target: BellKind | str, seed: int | None = None) -> ProtocolTranscript:
    target = BellKind(target)
    res = _resource()
    idx, post = sample_outcome(res, bsa_operators(), rng_for(seed))
    label, vec = canonical_bsa_vectors()[idx]
    p, bob = _bob_conditional(post.amplitudes, vec)
    corrected, bits = apply_correction(label, target, bob)
    name = CORRECTION_TABLE[target.value][label]
    return ProtocolTranscript(
        protocol="resp",
        alice_outcome=label,
        probability=0.25,
        cbits_sent=2,
        ebits_consumed=EBITS,
        correction=CORRECTION_TEXT[name],
        message=bits,
        bob_state=corrected,
        target=spin_orbit_bell(target),
        details={"bob_before_correction": bob},
    )


def family_unitary(p: FamilyParams) -> np.ndarray:
    """|H> → cosθ|H> + e^{iη}sinθ|V>,  |V> → e^{iφ}(sinθ|H> − e^{iη}cosθ|V>)."""
    c, s = math.cos(p.theta), math.sin(p.theta)
    e_eta, e_phi = np.exp(1j * p.eta), np.exp(1j * p.phi)
    return np.array([[c, e_phi * s], [e_eta * s, -e_eta * e_phi * c]], dtype=complex)


# Liquid-crystal setting that yields the (|Hh>±|Vv>), (|Hv>±|Vh>) vector states:
# |H> → (|H>+|V>)/√2, |V> → i(|H>−|V>)/√2.
LC1_PRESET = FamilyParams(alpha=math.pi / 4, beta=math.pi / 4, eta=0.0, theta=math.pi / 4, phi=math.pi / 2)
LC1_UNITARY = np.array([[1, 1j], [1, -1j]], dtype=complex) / math.sqrt(2)


def family_conditionals(p: FamilyParams, bob_frame: str = "mirror") -> list[BsaOutcome]:
    """All four rotated-BSA outcomes after Alice's polarization unitary.

    ``bob_frame="mirror"`` describes Bob's photon after one reflection, the frame
    in which the family formulas hold; ``"source"`` leaves it untouched.
    """
    if bob_frame not in ("mirror", "source"):
        raise ProtocolError(f"unknown frame {bob_frame!r}")
    amps = embed(family_unitary(p), 0, PAIR_DIMS) @ _resource().amplitudes
    if bob_frame == "mirror":
        amps = np.kron(np.eye(4), MIRROR_FRAME) @ amps
    return bsa_project(PureState(amps, _resource().labels, PAIR_DIMS), rotated=(p.alpha, p.beta))


def run_family(p: FamilyParams, seed: int | None = None, bob_frame: str = "mirror") -> ProtocolTranscript:
    outcomes = family_conditionals(p, bob_frame)
    probs = np.array([o.probability for o in outcomes])
    rng = rng_for(seed)
    idx = int(rng.choice(4, p=probs / probs.sum()))
    o = outcomes[idx]
    return ProtocolTranscript(
        protocol="family",
        alice_outcome=o.label,
        probability=o.probability,
        cbits_sent=2,
        ebits_consumed=EBITS,
        correction="none",
        message=format(idx, "02b"),
        bob_state=o.bob_state,
        target=family_state(o.label, p),
        details={"params": p, "bob_frame": bob_frame},
    )


def coarse_bsa_operators() -> list[np.ndarray]:
    """Alice's BSA without HWPs/PBSs: only the φ (Hl, Vr) or ψ (Hr, Vl) port is resolved."""
    phi = projector(ket("Hl")) + projector(ket("Vr"))
    psi = projector(ket("Hr")) + projector(ket("Vl"))
    return [np.kron(phi, np.eye(4)), np.kron(psi, np.eye(4))]


def _bob_mixed(post: State) -> DensityMatrix:
    return partial_trace(post, (2, 3))


def _rotated_resource(basis_rotation: np.ndarray | None) -> PureState:
    res = _resource()
    if basis_rotation is None:
        return res
    amps = embed(np.asarray(basis_rotation, dtype=complex), 0, PAIR_DIMS) @ res.amplitudes
    return PureState(amps, res.labels, PAIR_DIMS)


def prepare_classically_correlated(which: str, basis_rotation: np.ndarray | None = None) -> DensityMatrix:
    """Bob's state for one coarse-BSA port.

    ``which="psi"`` gives (|Hr><Hr| + |Vl><Vl|)/2 (Alice saw the φ port), ``"phi"``
    gives (|Hl><Hl| + |Vr><Vr|)/2.  A polarization unitary on Alice's photon before
    the measurement yields the analogous state in a rotated polarization basis.
    """
    if which not in ("phi", "psi"):
        raise ProtocolError(f"unknown port {which!r}")
    res = _rotated_resource(basis_rotation)
    op = coarse_bsa_operators()[0 if which == "psi" else 1]
    v = op @ res.amplitudes
    post = PureState(v / np.linalg.norm(v), res.labels, PAIR_DIMS)
    return _bob_mixed(post)


def run_classically_correlated(which: str, seed: int | None = None,
                               basis_rotation: np.ndarray | None = None) -> ProtocolTranscript:
    res = _rotated_resource(basis_rotation)
    idx, post = sample_outcome(res, coarse_bsa_operators(), rng_for(seed))
    bob = _bob_mixed(post)
    wanted_idx = 0 if which == "psi" else 1
    correction, matrix = "none", np.eye(4)
    if idx != wanted_idx:
        w_t = np.eye(2) if basis_rotation is None else np.asarray(basis_rotation).T
        matrix = pol_operator(w_t @ PAULI["X"] @ w_t.conj().T)
        correction = "H↔V" if basis_rotation is None else "H↔V (rotated basis)"
    m = hermitize(matrix @ bob.matrix @ matrix.conj().T)
    return ProtocolTranscript(
        protocol="classically-correlated",
        alice_outcome=("phi-port", "psi-port")[idx],
        probability=0.5,
        cbits_sent=1,
        ebits_consumed=EBITS,
        correction=correction,
        message=str(idx),
        bob_state=DensityMatrix(m, SINGLE_LABELS, SINGLE_DIMS),
        target=prepare_classically_correlated(which, basis_rotation),
    )


def prepare_completely_mixed() -> DensityMatrix:
    """Alice ignores both spin and OAM: Bob is left with Tr_A of the resource."""
    return partial_trace(_resource(), (2, 3))


def run_completely_mixed() -> ProtocolTranscript:
    rho = prepare_completely_mixed()
    return ProtocolTranscript(
        protocol="completely-mixed",
        alice_outcome="none",
        probability=1.0,
        cbits_sent=0,
        ebits_consumed=EBITS,
        correction="none",
        message="",
        bob_state=rho,
        target=DensityMatrix(np.eye(4) / 4, SINGLE_LABELS, SINGLE_DIMS),
    )


def dephase_spin_orbit(bob: State, strength: float) -> DensityMatrix:
    """Orbit-phase dephasing from a detuned BSA interferometer.

    Every l–r coherence (in particular Hl–Vr and Hr–Vl, the ones separating
    φ⁺ from φ⁻ and ψ⁺ from ψ⁻) is multiplied by ``1 - strength``.
    """
    if not 0.0 <= strength <= 1.0:
        raise ProtocolError(f"dephasing strength {strength} outside [0, 1]")
    m = bob.density().matrix
    z = np.kron(I2, PAULI["Z"])
    out = (1 - strength / 2) * m + (strength / 2) * z @ m @ z
    return DensityMatrix(hermitize(out), bob.labels, bob.dims)


def prepare_ensemble(components: Sequence[tuple[float, PureState]]) -> DensityMatrix:
    weights = np.array([w for w, _ in components], dtype=float)
    if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-12:
        raise ProtocolError(f"ensemble weights must be nonnegative and sum to 1, got {weights.sum()!r}")
    m = sum(w * st.density().matrix for w, st in components)
    first = components[0][1]
    return DensityMatrix(hermitize(m), first.labels, first.dims)


def povm_kraus(q: AmplitudeQuad) -> KrausSet:
    """F_i = Σ_k q_{(k+i-1) mod 4} |B_k><B_k| over the ordered Bell projectors (Alice's photon)."""
    coeffs = q.as_array()
    projs = [projector(spin_orbit_bell(k)) for k in BELL_ORDER]
    return KrausSet(tuple(sum(coeffs[(k + i) % 4] * projs[k] for k in range(4)) for i in range(4)))


VN_LABELS = ("i", "ii", "iii", "iv")


def von_neumann_vectors() -> list[np.ndarray]:
    """(H±V)|l>/√2 then (H±V)|r>/√2 on Alice's photon."""
    return [
        (ket("Hl").amplitudes + ket("Vl").amplitudes) / math.sqrt(2),
        (ket("Hl").amplitudes - ket("Vl").amplitudes) / math.sqrt(2),
        (ket("Hr").amplitudes + ket("Vr").amplitudes) / math.sqrt(2),
        (ket("Hr").amplitudes - ket("Vr").amplitudes) / math.sqrt(2),
    ]


# (POVM outcome, von Neumann outcome) -> (destination, sign) per Bell component of
# Bob's conditional, Bell order (φ⁺, φ⁻, ψ⁺, ψ⁻).  Bob's component m carries
# sign[m]·q[dest[m]]; the correction sends it to component dest[m] with that sign.
ARBITRARY_CORRECTIONS: dict[tuple[int, str], tuple[tuple[int, ...], tuple[int, ...]]] = {
    (1, "i"): ((2, 3, 0, 1), (1, -1, 1, 1)),
    (1, "ii"): ((2, 3, 0, 1), (-1, 1, 1, 1)),
    (1, "iii"): ((2, 3, 0, 1), (1, 1, 1, -1)),
    (1, "iv"): ((2, 3, 0, 1), (1, 1, -1, 1)),
    (2, "i"): ((3, 0, 1, 2), (1, -1, 1, 1)),
    (2, "ii"): ((3, 0, 1, 2), (-1, 1, 1, 1)),
    (2, "iii"): ((3, 0, 1, 2), (1, 1, 1, -1)),
    (2, "iv"): ((3, 0, 1, 2), (1, 1, -1, 1)),
    (3, "i"): ((0, 1, 2, 3), (1, -1, 1, 1)),
    (3, "ii"): ((0, 1, 2, 3), (-1, 1, 1, 1)),
    (3, "iii"): ((0, 1, 2, 3), (1, 1, 1, -1)),
    (3, "iv"): ((0, 1, 2, 3), (1, 1, -1, 1)),
    (4, "i"): ((1, 2, 3, 0), (1, -1, 1, 1)),
    (4, "ii"): ((1, 2, 3, 0), (-1, 1, 1, 1)),
    (4, "iii"): ((1, 2, 3, 0), (1, 1, 1, -1)),
    (4, "iv"): ((1, 2, 3, 0), (1, 1, -1, 1)),
}
HERALD_OUTCOME = (3, "i")


def arbitrary_correction(i: int, j: str) -> np.ndarray:
    """Bob's correction for outcome (F_i, j) in the (Hl, Hr, Vl, Vr) basis."""
    dest, sign = ARBITRARY_CORRECTIONS[(i, j)]
    c = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        c[dest[m], m] = sign[m]
    b = bell_matrix()
    return b @ c @ b.conj().T


def describe_arbitrary_correction(i: int, j: str) -> str:
    dest, sign = ARBITRARY_CORRECTIONS[(i, j)]
    names = [k.symbol for k in BELL_ORDER]
    parts = [f"{'-' if s < 0 else ''}{names[m]}→{names[d]}" for m, (d, s) in enumerate(zip(dest, sign))]
    return ", ".join(parts)


@dataclass(frozen=True, eq=False)
class ArbitraryOutcome:
    povm: int
    vn: str
    probability: float
    bob_state: PureState
    corrected: PureState


def arbitrary_outcomes(q: AmplitudeQuad) -> list[ArbitraryOutcome]:
    """All sixteen (POVM, von Neumann) branches with Bob's state before and after correction."""
    res = _resource().amplitudes
    out = []
    for i, f in enumerate(povm_kraus(q), start=1):
        filtered = np.kron(f, np.eye(4)) @ res
        for j, vec in zip(VN_LABELS, von_neumann_vectors()):
            p, bob = _bob_conditional(filtered, vec)
            if bob is None:
                continue
            fixed = single_photon(arbitrary_correction(i, j) @ bob.amplitudes)
            out.append(ArbitraryOutcome(i, j, p, bob, fixed))
    return out


def run_arbitrary_resp(q: AmplitudeQuad, seed: int | None = None, heralded: bool = False) -> ProtocolTranscript:
    rng = rng_for(seed)
    res = _resource()
    kraus = povm_kraus(q).embedded(0, (4, 4))
    i_idx, filtered = sample_outcome(res, kraus, rng)
    vn_ops = [np.kron(projector(v), np.eye(4)) for v in von_neumann_vectors()]
    j_idx, post = sample_outcome(filtered, vn_ops, rng)
    i, j = i_idx + 1, VN_LABELS[j_idx]
    _, bob = _bob_conditional(post.amplitudes, von_neumann_vectors()[j_idx])
    target = arbitrary_state(q)
    label = f"F{i},{j}"
    prob = 1 / 16
    if heralded:
        success = (i, j) == HERALD_OUTCOME
        state = single_photon(arbitrary_correction(*HERALD_OUTCOME) @ bob.amplitudes) if success else bob
        return ProtocolTranscript(
            protocol="arbitrary-heralded",
            alice_outcome=label,
            probability=prob,
            cbits_sent=1,
            ebits_consumed=EBITS,
            correction=describe_arbitrary_correction(*HERALD_OUTCOME) if success else "discard",
            message="1" if success else "0",
            bob_state=state,
            target=target,
            success=success,
        )
    fixed = single_photon(arbitrary_correction(i, j) @ bob.amplitudes)
    return ProtocolTranscript(
        protocol="arbitrary",
        alice_outcome=label,
        probability=prob,
        cbits_sent=4,
        ebits_consumed=EBITS,
        correction=describe_arbitrary_correction(i, j),
        message=format(i - 1, "02b") + format(j_idx, "02b"),
        bob_state=fixed,
        target=target,
        details={"bob_before_correction": bob},
    )

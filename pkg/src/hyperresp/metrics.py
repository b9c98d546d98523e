"""Figures of merit for reconstructed spin-orbit states."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .hilbert import DensityMatrix, PureState, check_density_matrix, psd_eigh, psd_sqrt

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(SIGMA_Y, SIGMA_Y)


def _matrix(rho) -> np.ndarray:
    if isinstance(rho, (PureState, DensityMatrix)):
        return rho.density().matrix
    m = np.asarray(rho, dtype=complex)
    if m.ndim == 1:
        return np.outer(m, m.conj())
    check_density_matrix(m)
    return m


def fidelity(rho, target) -> float:
    """``<ψ|ρ|ψ>`` for a pure target, ``(Tr √(√σ ρ √σ))²`` for a mixed one."""
    m = _matrix(rho)
    if isinstance(target, PureState) or np.ndim(target) == 1:
        psi = target.amplitudes if isinstance(target, PureState) else np.asarray(target, dtype=complex)
        if psi.size != m.shape[0]:
            raise ValueError("dimension mismatch between state and target")
        return float(np.clip(np.vdot(psi, m @ psi).real, 0.0, 1.0))
    sigma = _matrix(target)
    if sigma.shape != m.shape:
        raise ValueError("dimension mismatch between state and target")
    root = psd_sqrt(sigma)
    w, _ = psd_eigh(root @ m @ root)
    return float(np.clip(np.sum(np.sqrt(w)) ** 2, 0.0, 1.0))


def concurrence(rho) -> float:
    """Wootters concurrence with the spin flip ``σy⊗σy`` (orbit l→0, r→1)."""
    m = _matrix(rho)
    if m.shape != (4, 4):
        raise ValueError("concurrence is defined here for two-qubit states only")
    flipped = _YY @ m.conj() @ _YY
    root = psd_sqrt(m)
    w, _ = psd_eigh(root @ flipped @ root)
    lam = np.sort(np.sqrt(w))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho) -> float:
    return concurrence(rho) ** 2


def purity(rho) -> float:
    m = _matrix(rho)
    return float(np.real(np.trace(m @ m)))


def linear_entropy(rho) -> float:
    """``d/(d-1) (1 - Tr ρ²)``: 0 for pure states, 1 for the maximally mixed state."""
    m = _matrix(rho)
    d = m.shape[0]
    return float(np.clip(d / (d - 1) * (1.0 - purity(m)), 0.0, 1.0))


@dataclass(frozen=True)
class QualityReport:
    fidelity: float
    tangle: float
    linear_entropy: float
    purity: float

    def as_dict(self) -> dict:
        return asdict(self)


def quality_report(rho, target) -> QualityReport:
    return QualityReport(
        fidelity=fidelity(rho, target),
        tangle=tangle(rho),
        linear_entropy=linear_entropy(rho),
        purity=purity(rho),
    )


# Measured quality parameters, panel -> (F, dF, T, dT, S_L, dS_L).
REPORTED_VALUES = {
    "2a": (0.955, 0.002, 0.86, 0.01, 0.06, 0.01),
    "2b": (0.968, 0.002, 0.90, 0.01, 0.06, 0.01),
    "2c": (0.938, 0.003, 0.85, 0.02, 0.07, 0.01),
    "2d": (0.949, 0.003, 0.85, 0.01, 0.08, 0.01),
    "2e": (0.967, 0.002, 0.005, 0.002, 0.666, 0.003),
    "2f": (0.961, 0.003, 0.015, 0.003, 0.658, 0.003),
    "2g": (0.986, 0.001, 0.000, 0.001, 0.982, 0.001),
    "2h": (0.964, 0.003, 0.88, 0.01, 0.07, 0.01),
    "2i": (0.940, 0.005, 0.82, 0.02, 0.06, 0.01),
    "2j": (0.938, 0.003, 0.82, 0.01, 0.10, 0.01),
    "2k": (0.928, 0.003, 0.81, 0.01, 0.12, 0.01),
}


def format_uncertain(value: float, err: float | None, decimals: int = 3) -> str:
    """``0.955(2)``-style formatting; the error is quoted in units of the last digit."""
    if err is None or not np.isfinite(err):
        return f"{value:.{decimals}f}"
    digits = max(1, int(round(err * 10**decimals)))
    return f"{value:.{decimals}f}({digits})"

"""Small-dimensional complex linear algebra for spin-orbit photon states.

Every state carries its tensor structure (``dims``) and per-basis-vector
labels.  Single-photon states live in ``pol ⊗ orbit`` with the fixed ordering
``(Hl, Hr, Vl, Vr)``; two-photon states are ``Alice ⊗ Bob`` in that order.
Nothing here exceeds 16 dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence, Union

import numpy as np

MAX_DIM = 16
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_FLOOR = -1e-10
UNITARY_TOL = 1e-10
COMPLETENESS_TOL = 1e-10


class HilbertError(ValueError):
    """Invalid state, operator or subsystem selection."""


class IncompleteMeasurementError(HilbertError):
    def __init__(self, deficiency: float):
        super().__init__(f"measurement operators are not complete: ||sum K^dag K - I|| = {deficiency:.3e}")
        self.deficiency = deficiency


def basis_labels(*alphabets: Sequence[str]) -> tuple[str, ...]:
    """Row-major product labels, e.g. ``basis_labels("HV", "lr")``."""
    return tuple("".join(p) for p in product(*alphabets))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_dims(dim: int, labels: tuple[str, ...], dims: tuple[int, ...]) -> None:
    if dim not in (2, 4, 16):
        raise HilbertError(f"dimension {dim} outside the modeled set {{2, 4, 16}}")
    if len(labels) != dim:
        raise HilbertError(f"{len(labels)} labels for dimension {dim}")
    if int(np.prod(dims)) != dim:
        raise HilbertError(f"subsystem dims {dims} do not multiply to {dim}")


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        _check_dims(amps.size, self.labels, self.dims)
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise HilbertError(f"state norm^2 = {norm!r}, expected 1")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.labels.index(label)])

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.labels, self.dims)

    def __repr__(self):
        terms = [f"{a:.4g}|{lab}>" for a, lab in zip(self.amplitudes, self.labels) if abs(a) > 1e-12]
        return "PureState(" + " + ".join(terms) + ")"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise HilbertError(f"density matrix must be square, got shape {m.shape}")
        _check_dims(m.shape[0], self.labels, self.dims)
        check_density_matrix(m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def density(self) -> "DensityMatrix":
        return self


State = Union[PureState, DensityMatrix]


def check_density_matrix(m: np.ndarray) -> None:
    """Raise :class:`HilbertError` unless ``m`` is Hermitian, unit-trace and PSD."""
    m = np.asarray(m)
    herm = np.abs(m - m.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise HilbertError(f"matrix is not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > NORM_TOL:
        raise HilbertError(f"trace = {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(m).min()
    if lam < PSD_FLOOR:
        raise HilbertError(f"minimum eigenvalue {lam:.3e} below PSD floor")


def as_density(state: State) -> DensityMatrix:
    return state.density()


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def psd_eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues in ``[PSD_FLOOR, 0)`` clamped to zero."""
    w, v = np.linalg.eigh(hermitize(np.asarray(m, dtype=complex)))
    w = np.where((w < 0) & (w >= PSD_FLOOR), 0.0, w)
    if (w < 0).any():
        raise HilbertError(f"negative eigenvalue {w.min():.3e} below PSD floor")
    return w, v


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = psd_eigh(m)
    return (v * np.sqrt(w)) @ v.conj().T


def projector(vec: np.ndarray | PureState) -> np.ndarray:
    if isinstance(vec, PureState):
        vec = vec.amplitudes
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj())


def is_projector(p: np.ndarray, tol: float = 1e-12) -> bool:
    p = np.asarray(p)
    return bool(np.abs(p @ p - p).max() <= tol and np.abs(p - p.conj().T).max() <= tol)


def overlap(a: PureState | np.ndarray, b: PureState | np.ndarray) -> float:
    """Phase-insensitive overlap ``|<a|b>|``."""
    va = a.amplitudes if isinstance(a, PureState) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, PureState) else np.asarray(b)
    return float(abs(np.vdot(va, vb)))


def tensor(a: State, b: State) -> State:
    """Kronecker product; mixing a pure and a mixed operand yields a DensityMatrix."""
    dim = a.dim * b.dim
    if dim > MAX_DIM:
        raise HilbertError(f"tensor product dimension {dim} exceeds {MAX_DIM}")
    labels = tuple(x + y for x, y in product(a.labels, b.labels))
    dims = a.dims + b.dims
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), labels, dims)
    return DensityMatrix(np.kron(a.density().matrix, b.density().matrix), labels, dims)


def _label_parts(labels: tuple[str, ...], dims: tuple[int, ...]) -> list[list[str]]:
    """Per-subsystem single-letter alphabets recovered from composite labels."""
    n = len(dims)
    width = len(labels[0])
    if width % n or any(len(lab) != width for lab in labels):
        return [[str(i) for i in range(d)] for d in dims]
    w = width // n
    alphabets: list[list[str | None]] = [[None] * d for d in dims]
    for idx, lab in enumerate(labels):
        for k, digit in enumerate(np.unravel_index(idx, dims)):
            alphabets[k][digit] = lab[k * w:(k + 1) * w]
    return alphabets  # type: ignore[return-value]


def permute(state: State, order: Sequence[int]) -> State:
    """Reorder tensor factors: new factor ``k`` is old factor ``order[k]``."""
    order = tuple(order)
    if sorted(order) != list(range(len(state.dims))):
        raise HilbertError(f"invalid subsystem order {order} for dims {state.dims}")
    alphabets = _label_parts(state.labels, state.dims)
    new_dims = tuple(state.dims[k] for k in order)
    labels = basis_labels(*[alphabets[k] for k in order])
    if isinstance(state, PureState):
        amps = state.amplitudes.reshape(state.dims).transpose(order).ravel()
        return PureState(amps, labels, new_dims)
    n = len(state.dims)
    m = state.matrix.reshape(state.dims + state.dims)
    m = m.transpose(order + tuple(n + k for k in order)).reshape(state.dim, state.dim)
    return DensityMatrix(m, labels, new_dims)


def regroup(state: State, dims: Sequence[int]) -> State:
    """Declare a coarser (or finer) tensor structure with the same ordering."""
    dims = tuple(dims)
    if int(np.prod(dims)) != state.dim:
        raise HilbertError(f"dims {dims} incompatible with dimension {state.dim}")
    if isinstance(state, PureState):
        return PureState(state.amplitudes, state.labels, dims)
    return DensityMatrix(state.matrix, state.labels, dims)


def partial_trace(rho: State, keep: int | Sequence[int]) -> DensityMatrix:
    """Trace out every subsystem not listed in ``keep`` (indices into ``rho.dims``)."""
    keep = (keep,) if isinstance(keep, (int, np.integer)) else tuple(keep)
    n = len(rho.dims)
    if not keep or any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise HilbertError(f"subsystem selector {keep} inconsistent with dims {rho.dims}")
    keep = tuple(sorted(keep))
    m = rho.density().matrix.reshape(rho.dims + rho.dims)
    traced = [k for k in range(n) if k not in keep]
    # trace from the highest index down so remaining axis positions stay valid
    for k in sorted(traced, reverse=True):
        cur = m.ndim // 2
        m = np.trace(m, axis1=k, axis2=k + cur)
    kd = tuple(rho.dims[k] for k in keep)
    d = int(np.prod(kd))
    out = hermitize(m.reshape(d, d))
    alphabets = _label_parts(rho.labels, rho.dims)
    return DensityMatrix(out, basis_labels(*[alphabets[k] for k in keep]), kd)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if dev > tol:
        raise HilbertError(f"operator is not unitary: max |U^dag U - I| = {dev:.3e}")
    return u


def embed(op: np.ndarray, position: int, dims: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on factor ``position`` to the full space ``dims``."""
    out = np.eye(1, dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == position else np.eye(d))
    return out


def apply_unitary(state: State, u: np.ndarray) -> State:
    u = check_unitary(u)
    if u.shape[0] != state.dim:
        raise HilbertError(f"unitary of size {u.shape[0]} on a {state.dim}-dimensional state")
    if isinstance(state, PureState):
        amps = u @ state.amplitudes
        return PureState(amps / np.linalg.norm(amps), state.labels, state.dims)
    return DensityMatrix(hermitize(u @ state.matrix @ u.conj().T), state.labels, state.dims)


def completeness_deficiency(operators: Sequence[np.ndarray]) -> float:
    ops = [np.asarray(k, dtype=complex) for k in operators]
    total = sum(k.conj().T @ k for k in ops)
    return float(np.abs(total - np.eye(total.shape[0])).max())


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Generalized measurement ``{F_i}`` with ``sum F_i^dag F_i = I``."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.operators)
        object.__setattr__(self, "operators", ops)
        dev = completeness_deficiency(ops)
        if dev > COMPLETENESS_TOL:
            raise IncompleteMeasurementError(dev)

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def embedded(self, position: int, dims: Sequence[int]) -> "KrausSet":
        return KrausSet(tuple(embed(k, position, dims) for k in self.operators))


def born_probabilities(
    state: State, outcomes: KrausSet | Sequence[np.ndarray]
) -> tuple[np.ndarray, list[State | None]]:
    """Outcome probabilities and normalized post-measurement states.

    ``outcomes`` may be projectors or Kraus operators on the full space.
    Post-states of zero-probability outcomes are ``None``.
    """
    ops = list(outcomes)
    dev = completeness_deficiency(ops)
    if dev > COMPLETENESS_TOL:
        raise IncompleteMeasurementError(dev)
    probs, posts = [], []
    for k in ops:
        if isinstance(state, PureState):
            v = k @ state.amplitudes
            p = float(np.vdot(v, v).real)
            post = PureState(v / np.sqrt(p), state.labels, state.dims) if p > 1e-15 else None
        else:
            m = k @ state.matrix @ k.conj().T
            p = float(np.trace(m).real)
            post = DensityMatrix(hermitize(m / p), state.labels, state.dims) if p > 1e-15 else None
        probs.append(max(p, 0.0))
        posts.append(post)
    return np.array(probs), posts


def sample_outcome(
    state: State, outcomes: KrausSet | Sequence[np.ndarray], seed: int | np.random.Generator
) -> tuple[int, State]:
    probs, posts = born_probabilities(state, outcomes)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = int(rng.choice(len(probs), p=probs / probs.sum()))
    return idx, posts[idx]

"""Simulated spin-orbit (and polarization-only) state tomography.

Settings are product projectors |pol><pol| ⊗ |mode><mode| with
pol ∈ {H,V,D,A,R,L} and mode ∈ {l,r,h,v,d,a}; the spatial diagonal pair is
d/a = (|l> ± i|r>)/√2.  A single-letter label is a polarization-only
setting used for the 2-dimensional reconstructions of the beam scans.

The maximum-likelihood fit parameterizes ρ = G†G / Tr[G†G] with G lower
triangular (real diagonal, d² real parameters) and maximizes the Poisson
likelihood Σ n ln μ − μ.  The overall rate is profiled out, which leaves
the scale-free objective Σ f_ν ln(f_ν Σp / p_ν) with f_ν = n_ν / Σn.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import metrics
from .hilbert import DensityMatrix, State, basis_labels, hermitize
from .seeding import derive_seed, rng_for
from .serialize import SchemaError, check_schema, matrix_from_json, matrix_to_json, tagged
from .states import POL_KETS, SINGLE_DIMS, SINGLE_LABELS, SPATIAL_KETS

POL_ORDER = "HVDARL"
SPATIAL_ORDER = "lrhvda"
GRAD_TOL = 1e-8
MAX_ITER = 10_000


class TomographyError(ValueError):
    pass


class ConvergenceError(TomographyError):
    pass


@dataclass(frozen=True, eq=False)
class Setting:
    pol: str
    spatial: str | None
    projector: np.ndarray

    @property
    def label(self) -> str:
        return self.pol + (self.spatial or "")


def setting(label: str) -> Setting:
    pol, spatial = label[0], label[1:] or None
    if pol not in POL_KETS or (spatial is not None and spatial not in SPATIAL_KETS):
        raise TomographyError(f"unknown setting {label!r}")
    vec = POL_KETS[pol] if spatial is None else np.kron(POL_KETS[pol], SPATIAL_KETS[spatial])
    return Setting(pol, spatial, np.outer(vec, vec.conj()))


def setting_catalog(dim: int = 4) -> list[Setting]:
    """36 spin-orbit settings (``dim=4``) or the 6 polarization settings (``dim=2``)."""
    if dim == 4:
        return [setting(p + s) for p in POL_ORDER for s in SPATIAL_ORDER]
    if dim == 2:
        return [setting(p) for p in POL_ORDER]
    raise TomographyError(f"no setting catalog for dimension {dim}")


def design_matrix(settings: Sequence[Setting]) -> np.ndarray:
    """Rows A_ν with A_ν · vec(ρ) = Tr[P_ν ρ]."""
    return np.array([s.projector.T.reshape(-1) for s in settings])


def design_rank(settings: Sequence[Setting]) -> int:
    return int(np.linalg.matrix_rank(design_matrix(settings)))


@dataclass(frozen=True, eq=False)
class CountRecord:
    """Counts per setting.  Non-integer values are allowed for noiseless expectations."""

    labels: tuple[str, ...]
    counts: np.ndarray
    acquisition_time: float = 1.0
    rate: float | None = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(self.labels))
        if counts.shape != (len(self.labels),):
            raise TomographyError("one count per setting label is required")
        if (counts < 0).any() or not np.isfinite(counts).all():
            raise TomographyError("counts must be finite and nonnegative")
        dims = {len(lab) for lab in self.labels}
        if len(dims) != 1:
            raise TomographyError("cannot mix polarization-only and spin-orbit settings")
        for lab in self.labels:
            setting(lab)

    @property
    def dim(self) -> int:
        return 2 if len(self.labels[0]) == 1 else 4

    @property
    def settings(self) -> list[Setting]:
        return [setting(lab) for lab in self.labels]

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def to_dict(self) -> dict:
        return tagged("counts", {
            "acquisition_time_s": self.acquisition_time,
            "rate_per_s": self.rate,
            "counts": {lab: float(c) for lab, c in zip(self.labels, self.counts)},
        })

    @classmethod
    def from_dict(cls, doc: dict) -> "CountRecord":
        check_schema(doc, "counts")
        items = doc["counts"]
        return cls(tuple(items), np.array(list(items.values())), doc.get("acquisition_time_s", 1.0),
                   doc.get("rate_per_s"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={tagged('counts', {})['schema_version']}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "count", "acquisition_s"])
        for lab, c in zip(self.labels, self.counts):
            w.writerow([lab, repr(float(c)) if c != int(c) else int(c), self.acquisition_time])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountRecord":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# schema_version="):
            raise SchemaError("count CSV lacks a schema_version header")
        check_schema({"schema_version": lines[0].split("=", 1)[1].strip()})
        rows = list(csv.DictReader(lines[1:]))
        if not rows:
            raise TomographyError("count CSV has no rows")
        return cls(
            tuple(r["setting"] for r in rows),
            np.array([float(r["count"]) for r in rows]),
            float(rows[0]["acquisition_s"]),
        )


def _rho_matrix(rho: State | np.ndarray) -> np.ndarray:
    if isinstance(rho, np.ndarray):
        return rho
    return rho.density().matrix


def depolarizing(rho: State | np.ndarray, p: float) -> DensityMatrix:
    """(1 − p) ρ + p I/d."""
    if not 0.0 <= p <= 1.0:
        raise TomographyError(f"depolarizing strength {p} outside [0, 1]")
    m = _rho_matrix(rho)
    d = m.shape[0]
    out = (1 - p) * m + p * np.eye(d) / d
    if isinstance(rho, np.ndarray):
        labels, dims = (SINGLE_LABELS, SINGLE_DIMS) if d == 4 else (basis_labels("HV"), (2,))
    else:
        labels, dims = rho.labels, rho.dims
    return DensityMatrix(hermitize(out), labels, dims)


def probabilities(rho: State | np.ndarray, settings: Sequence[Setting]) -> np.ndarray:
    m = _rho_matrix(rho)
    return np.clip(np.array([np.trace(s.projector @ m).real for s in settings]), 0.0, None)


def expected_counts(rho: State | np.ndarray, settings: Sequence[Setting], mean_total: float,
                    noise: Callable | None = None, acquisition_time: float = 1.0) -> CountRecord:
    """Noiseless count expectations ``mean_total · Tr[P ρ']``."""
    if mean_total <= 0:
        raise TomographyError("mean_total must be positive")
    m = _rho_matrix(rho) if noise is None else _rho_matrix(noise(rho))
    mu = mean_total * probabilities(m, settings)
    return CountRecord(tuple(s.label for s in settings), mu, acquisition_time)


def simulate_counts(rho: State | np.ndarray, settings: Sequence[Setting], mean_total: float, seed=None,
                    noise: Callable | None = None, acquisition_time: float = 1.0,
                    rate: float | None = None) -> CountRecord:
    """Poisson counts with means ``mean_total · Tr[P ρ']`` where ρ' = noise(ρ)."""
    mu = expected_counts(rho, settings, mean_total, noise).counts
    n = rng_for(seed).poisson(mu)
    return CountRecord(tuple(s.label for s in settings), n, acquisition_time, rate)


@dataclass(frozen=True, eq=False)
class LinearResult:
    matrix: np.ndarray
    min_eigenvalue: float
    negative: bool


def linear_reconstruct(counts: CountRecord) -> LinearResult:
    """Least-squares inversion with trace normalization; may be non-physical."""
    a = design_matrix(counts.settings)
    d = counts.dim
    if np.linalg.matrix_rank(a) < d * d:
        raise TomographyError("settings are not informationally complete")
    if counts.total <= 0:
        raise TomographyError("all counts are zero")
    x, *_ = np.linalg.lstsq(a, counts.counts.astype(complex), rcond=None)
    m = hermitize(x.reshape(d, d))
    m = m / np.trace(m).real
    lam = float(np.linalg.eigvalsh(m).min())
    return LinearResult(m, lam, lam < -1e-12)


def project_to_physical(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize."""
    w, v = np.linalg.eigh(hermitize(m))
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    gradient_norm: float = float("nan")
    history: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return tagged("reconstruction", {
            "rho": matrix_to_json(self.rho.matrix),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
        })

    @classmethod
    def from_dict(cls, doc: dict) -> "ReconstructionResult":
        check_schema(doc, "reconstruction")
        m = matrix_from_json(doc["rho"])
        labels, dims = (SINGLE_LABELS, SINGLE_DIMS) if m.shape[0] == 4 else (basis_labels("HV"), (2,))
        return cls(DensityMatrix(m, labels, dims), doc["log_likelihood"], doc["iterations"],
                   doc["converged"], doc.get("gradient_norm", float("nan")))


class _Objective:
    """Scale-free negative log-likelihood per detected event, in the G parameters."""

    def __init__(self, counts: CountRecord):
        self.d = counts.dim
        self.proj = np.array([s.projector for s in counts.settings])
        self.freq = counts.counts / counts.total
        self.psum = self.proj.sum(axis=0)
        self.tril = np.tril_indices(self.d)
        self.off = np.tril_indices(self.d, -1)
        self.n_off = len(self.off[0])

    def unpack(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        g = np.zeros((d, d), dtype=complex)
        g[np.diag_indices(d)] = x[:d]
        g[self.off] = x[d:d + self.n_off] + 1j * x[d + self.n_off:]
        return g

    def pack(self, g: np.ndarray) -> np.ndarray:
        return np.concatenate([np.diag(g).real, g[self.off].real, g[self.off].imag])

    def value_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        g = self.unpack(x)
        sigma = g.conj().T @ g
        p = np.einsum("nij,ji->n", self.proj, sigma).real
        s = np.trace(self.psum @ sigma).real
        used = self.freq > 0
        p_used = np.maximum(p[used], 1e-300)
        # Written as a KL divergence, termwise, so it stays precise near zero.
        f = float(np.sum(self.freq[used] * np.log(self.freq[used] * s / p_used)))
        gamma = -np.einsum("n,nij->ij", self.freq[used] / p_used, self.proj[used]) + self.psum / s
        grad_c = 2.0 * g @ gamma
        grad = np.concatenate([np.diag(grad_c).real, grad_c[self.off].real, grad_c[self.off].imag])
        return f, grad

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return x / np.linalg.norm(x)


def _cholesky_start(m: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Lower-triangular G with G†G ∝ a slightly mixed copy of ``m``."""
    d = m.shape[0]
    m = (1 - eps) * project_to_physical(m) + eps * np.eye(d) / d
    # m = U U† with U upper triangular comes from the Cholesky factor of the index-reversed matrix.
    j = np.eye(d)[::-1]
    upper = j @ np.linalg.cholesky(hermitize(j @ m @ j)) @ j
    return upper.conj().T


def mle_reconstruct(counts: CountRecord, init: State | np.ndarray | None = None,
                    max_iter: int = MAX_ITER) -> ReconstructionResult:
    if counts.total <= 0:
        raise TomographyError("all counts are zero")
    obj = _Objective(counts)
    d = counts.dim
    if init is None:
        try:
            start = linear_reconstruct(counts).matrix
        except TomographyError:
            start = np.eye(d) / d
    else:
        start = _rho_matrix(init)
    g0 = _cholesky_start(start)
    x = obj.normalize(obj.pack(g0))
    history = [obj.value_grad(x)[0]]
    iterations = 0
    grad_norm = float("inf")
    # Each pass restarts from the normalized point, which keeps the scale gauge
    # tame; a stalled pass hands over to the other quasi-Newton method.
    methods = ("BFGS", "L-BFGS-B")
    stalled = 0
    k = 0
    while iterations < max_iter and stalled < len(methods):
        method = methods[k % len(methods)]
        opts = {"gtol": GRAD_TOL / 10, "maxiter": max_iter - iterations}
        if method == "L-BFGS-B":
            opts["ftol"] = 0.0
        res = minimize(obj.value_grad, x, jac=True, method=method, options=opts,
                       callback=lambda xk: history.append(obj.value_grad(xk)[0]))
        iterations += max(int(res.nit), 1)
        f_old = obj.value_grad(x)[0]
        if res.fun < f_old:
            x = obj.normalize(res.x)
            stalled = 0 if res.nit > 1 else stalled + 1
        else:
            stalled += 1
        grad_norm = float(np.abs(obj.value_grad(x)[1]).max())
        if grad_norm < GRAD_TOL:
            break
        k += 1
    g = obj.unpack(x)
    sigma = g.conj().T @ g
    rho = hermitize(sigma / np.trace(sigma).real)
    labels, dims = (SINGLE_LABELS, SINGLE_DIMS) if d == 4 else (basis_labels("HV"), (2,))
    return ReconstructionResult(
        rho=DensityMatrix(rho, labels, dims),
        log_likelihood=poisson_log_likelihood(counts, rho),
        iterations=iterations,
        converged=grad_norm < GRAD_TOL,
        gradient_norm=grad_norm,
        history=tuple(history),
    )


def poisson_log_likelihood(counts: CountRecord, rho: np.ndarray, mean_total: float | None = None) -> float:
    """Σ n ln μ − μ (without ln n!), with the rate profiled out unless given."""
    p = probabilities(rho, counts.settings)
    n = counts.counts
    scale = counts.total / p.sum() if mean_total is None else mean_total
    mu = scale * p
    used = n > 0
    return float(np.sum(n[used] * np.log(np.maximum(mu[used], 1e-300))) - mu.sum())


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float


@dataclass(frozen=True)
class MonteCarloSummary:
    fidelity: MetricSummary
    tangle: MetricSummary | None
    linear_entropy: MetricSummary
    n_samples: int
    n_unconverged: int

    def as_dict(self) -> dict:
        out = {"n_samples": self.n_samples, "n_unconverged": self.n_unconverged}
        for name in ("fidelity", "tangle", "linear_entropy"):
            m = getattr(self, name)
            out[name] = None if m is None else {"mean": m.mean, "std": m.std}
        return out


def _resample_metrics(counts: CountRecord, target, seed: int) -> tuple[float, float, float, bool]:
    n = rng_for(seed).poisson(counts.counts)
    if n.sum() == 0:
        n = counts.counts
    res = mle_reconstruct(CountRecord(counts.labels, n, counts.acquisition_time, counts.rate))
    t = metrics.tangle(res.rho) if counts.dim == 4 else float("nan")
    return metrics.fidelity(res.rho, target), t, metrics.linear_entropy(res.rho), res.converged


def monte_carlo_errors(counts: CountRecord, n_samples: int, seed: int, target: State,
                       workers: int = 1) -> MonteCarloSummary:
    """Poisson-resample the observed counts, refit, and summarize F, T and S_L."""
    if n_samples < 2:
        raise TomographyError("n_samples must be at least 2")
    seeds = [derive_seed(seed, k) for k in range(n_samples)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda s: _resample_metrics(counts, target, s), seeds))
    else:
        rows = [_resample_metrics(counts, target, s) for s in seeds]
    a = np.array([r[:3] for r in rows])
    summ = [MetricSummary(float(a[:, k].mean()), float(a[:, k].std(ddof=1))) for k in range(3)]
    return MonteCarloSummary(
        fidelity=summ[0],
        tangle=summ[1] if counts.dim == 4 else None,
        linear_entropy=summ[2],
        n_samples=n_samples,
        n_unconverged=sum(not r[3] for r in rows),
    )


def werner_tangle(fidelity: float) -> float:
    """Tangle of a Werner state with Bell-state fidelity F: ((3v − 1)/2)², v = (4F − 1)/3."""
    v = (4 * fidelity - 1) / 3
    return max(0.0, (3 * v - 1) / 2) ** 2


def depolarizing_for_fidelity(fidelity: float) -> float:
    """Depolarizing strength taking a pure state to fidelity F: p = 4(1 − F)/3."""
    return 4 * (1 - fidelity) / 3

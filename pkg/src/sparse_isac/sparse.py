"""Subcarrier selection and l1 recovery of the delay spectrum from a subset of subcarriers.

With ``F`` the delay DFT matrix, every ``(n_a, n_v)`` fiber satisfies
``F^{-1} y = y_hat`` where ``y_hat`` is the zero-padded per-subcarrier data.
Observing only the selected subcarriers leaves the underdetermined system
``Phi F^{-1} y = Phi y_hat``, solved here by basis pursuit
(``min ||y||_1`` subject to equality), with greedy OMP as a cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, SystemConfig
from .sensing import ProcessedCube, delay_dft_matrix, front_end

BP_TOL = 1e-6
BP_MAX_ITER = 2000
BP_RHO = 1.0


@dataclass(frozen=True)
class SelectionMask:
    """Which subcarriers are sensed; padding rows beyond ``N_s`` are always kept."""

    phi: np.ndarray  # (N_s,) bool
    N_d: int
    seed: int | None = None

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=bool)
        object.__setattr__(self, "phi", phi)
        if phi.ndim != 1 or self.N_d < phi.size:
            raise ConfigError("mask length must not exceed N_d")
        if not phi.any():
            raise ConfigError("mask must select at least one subcarrier")

    @property
    def N_s(self) -> int:
        return self.phi.size

    @property
    def N_sel(self) -> int:
        return int(self.phi.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.phi)

    @property
    def rows(self) -> np.ndarray:
        """Rows of the length-``N_d`` zero-padded vector that are kept."""
        return np.concatenate([self.indices, np.arange(self.N_s, self.N_d)])

    def matrix(self) -> np.ndarray:
        """Row-selection operator of shape ``(N_sel + N_d - N_s, N_d)``."""
        return np.eye(self.N_d)[self.rows]

    def to_json(self) -> str:
        return json.dumps({"N_s": self.N_s, "N_d": self.N_d, "seed": self.seed,
                           "selected": self.indices.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SelectionMask":
        doc = json.loads(text)
        phi = np.zeros(doc["N_s"], dtype=bool)
        phi[doc["selected"]] = True
        return cls(phi, doc["N_d"], doc.get("seed"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SelectionMask":
        return cls.from_json(Path(path).read_text())


def make_selection_mask(cfg: SystemConfig, seed: int, N_sel: int | None = None) -> SelectionMask:
    """Uniformly random ``N_sel``-subset of the subcarriers."""
    N_sel = cfg.N_sel if N_sel is None else N_sel
    if not 0 < N_sel <= cfg.N_s:
        raise ConfigError(f"need 0 < N_sel <= N_s, got {N_sel}")
    rng = np.random.default_rng(seed)
    phi = np.zeros(cfg.N_s, dtype=bool)
    phi[rng.choice(cfg.N_s, size=N_sel, replace=False)] = True
    return SelectionMask(phi, cfg.N_d, seed)


def full_mask(cfg: SystemConfig) -> SelectionMask:
    return SelectionMask(np.ones(cfg.N_s, dtype=bool), cfg.N_d)


def measurement_operator(mask: SelectionMask) -> np.ndarray:
    """``A = Phi F^{-1}`` with ``F^{-1} = F^H / N_d``; rows are checked orthogonal."""
    F = delay_dft_matrix(mask.N_d)
    A = F.conj().T[mask.rows] / mask.N_d
    gram = A @ A.conj().T
    if not np.allclose(gram, np.eye(A.shape[0]) / mask.N_d, rtol=0, atol=1e-10):
        raise ArithmeticError("measurement rows are not orthogonal")
    return A


# --------------------------------------------------------------------------
# basis pursuit


@dataclass
class BpSolution:
    y_hat: np.ndarray  # (N_d,) or (batch, N_d)
    objective: np.ndarray | float
    residual: np.ndarray | float
    iterations: np.ndarray | int
    converged: np.ndarray | bool


def soft_threshold(z: np.ndarray, tau: float) -> np.ndarray:
    """Complex shrinkage: moduli reduced by ``tau``, phases kept."""
    mag = np.abs(z)
    return z * (np.maximum(mag - tau, 0.0) / np.where(mag > 0, mag, 1.0))


def basis_pursuit(
    A: np.ndarray,
    b: np.ndarray,
    tol_eq: float = BP_TOL,
    max_iter: int = BP_MAX_ITER,
    rho: float = BP_RHO,
) -> BpSolution:
    """``min ||y||_1 s.t. A y = b`` by ADMM for ``A`` with orthogonal equal-norm rows.

    ``b`` may be one vector or a batch ``(batch, m)``; fibers are solved jointly
    but stop independently.  Each fiber is scaled so its least-norm solution
    has unit peak modulus before iterating.  The returned iterate is the
    projection onto the constraint set, so its equality residual is at
    round-off level; convergence requires the splitting gap and the change of
    the sparse iterate to fall below ``tol_eq`` (scaled units).
    """
    single = b.ndim == 1
    B = np.atleast_2d(np.asarray(b, dtype=complex))
    m, n = A.shape
    if B.shape[1] != m:
        raise ValueError(f"measurement length {B.shape[1]} does not match operator rows {m}")
    row_sq = float(np.real(np.vdot(A[0], A[0])))  # A A^H = row_sq * I
    Ah = A.conj().T

    def project(V, Bs):
        return V - ((V @ A.T - Bs) @ Ah.T) / row_sq

    least_norm = (B @ Ah.T) / row_sq
    scale = np.max(np.abs(least_norm), axis=1)
    zero = scale == 0
    scale[zero] = 1.0
    Bs = B / scale[:, None]

    batch = B.shape[0]
    y = least_norm / scale[:, None]
    z = y.copy()
    u = np.zeros_like(y)
    iters = np.zeros(batch, dtype=int)
    done = zero.copy()
    y[zero] = 0.0
    z[zero] = 0.0
    for it in range(1, max_iter + 1):
        active = ~done
        if not active.any():
            break
        ya = project(z[active] - u[active], Bs[active])
        z_old = z[active]
        za = soft_threshold(ya + u[active], 1.0 / rho)
        ua = u[active] + ya - za
        y[active], z[active], u[active] = ya, za, ua
        iters[active] = it
        gap = np.linalg.norm(ya - za, axis=1)
        change = rho * np.linalg.norm(za - z_old, axis=1)
        idx = np.flatnonzero(active)
        done[idx[(gap <= tol_eq) & (change <= tol_eq)]] = True

    y_out = project(z, Bs) * scale[:, None]
    y_out[zero] = 0.0
    residual = np.linalg.norm(y_out @ A.T - B, axis=1)
    objective = np.sum(np.abs(y_out), axis=1)
    if single:
        return BpSolution(y_out[0], float(objective[0]), float(residual[0]), int(iters[0]), bool(done[0]))
    return BpSolution(y_out, objective, residual, iters, done)


# --------------------------------------------------------------------------
# greedy oracle


@dataclass
class OmpResult:
    support: list[int]
    values: np.ndarray
    rank_deficient: bool = False

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=complex)
        out[self.support] = self.values
        return out


def omp_oracle(A: np.ndarray, b: np.ndarray, sparsity_k: int, atol: float = 1e-12) -> OmpResult:
    """Orthogonal matching pursuit: ``k`` greedy atoms, least-squares refit after each pick."""
    m, n = A.shape
    if sparsity_k > m:
        raise ValueError(f"sparsity {sparsity_k} exceeds measurement count {m}")
    b = np.asarray(b, dtype=complex)
    norms = np.linalg.norm(A, axis=0)
    support: list[int] = []
    values = np.zeros(0, dtype=complex)
    residual = b.copy()
    scale = max(np.linalg.norm(b), 1.0)
    for _ in range(sparsity_k):
        corr = np.abs(A.conj().T @ residual) / np.where(norms > 0, norms, 1.0)
        corr[support] = 0.0
        if corr.max() <= atol * scale:
            break
        support.append(int(np.argmax(corr)))
        sub = A[:, support]
        if np.linalg.matrix_rank(sub) < len(support):
            support.pop()
            return OmpResult(support, values, rank_deficient=True)
        values = np.linalg.lstsq(sub, b, rcond=None)[0]
        residual = b - sub @ values
    return OmpResult(support, values)


# --------------------------------------------------------------------------
# compressive delay processing


def cs_delay(Yd: np.ndarray, mask: SelectionMask, **bp_options) -> ProcessedCube:
    """Replace the delay DFT by basis pursuit on the selected subcarriers.

    ``Yd`` is the ``(N_a, N_s, N_v)`` stack of per-subcarrier fibers; entries
    of unselected subcarriers are ignored.  Output uses the same ``1/N_s``
    normalization as the full delay DFT.
    """
    N_a, N_s, N_v = Yd.shape
    if N_s != mask.N_s:
        raise ConfigError(f"mask covers {mask.N_s} subcarriers, data has {N_s}")
    A = measurement_operator(mask)
    padded = np.zeros((N_a, N_v, mask.N_d), dtype=complex)
    padded[:, :, :N_s] = Yd.transpose(0, 2, 1)
    b = padded[:, :, mask.rows].reshape(N_a * N_v, -1)
    sol = basis_pursuit(A, b, **bp_options)
    data = sol.y_hat.reshape(N_a, N_v, mask.N_d).transpose(0, 2, 1) / N_s
    flags = ~np.asarray(sol.converged).reshape(N_a, N_v)
    return ProcessedCube.from_data(data, flags)


def cs_estimate(cube: np.ndarray, X: np.ndarray, mask: SelectionMask, cfg: SystemConfig,
                **bp_options) -> ProcessedCube:
    """Processing chain that senses only the selected subcarriers."""
    if mask.N_s != cfg.N_s or mask.N_d != cfg.N_d:
        raise ConfigError("mask is inconsistent with the configuration")
    Yd, _ = front_end(cube, X, cfg, subcarriers=mask.phi)
    return cs_delay(Yd, mask, **bp_options)

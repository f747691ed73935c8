"""Sum-rate maximizing ISAC beamforming with a sensing-SNR constraint.

The solver alternates three layers inside one loop:

* a majorization-minimization (MM) linearization of the beampattern
  constraint around the current precoder,
* a fractional-programming quadratic transform of the sum-rate objective
  (auxiliary SINR ``r`` and ``t`` variables with closed-form updates),
* one sweep of an ADMM with a nonlinear equality constraint
  (``||x_i||^2 = p_i``) that splits the coupled problem into per-subcarrier
  blocks with closed-form solutions.

Per-subcarrier arrays carry the subcarrier on axis 0.  ``w_i`` is the
column-stacked ``vec(W_i)`` of length ``n = N_t * K``; block ``k`` holds
the precoder of user ``k``.  Sensing variables ``Gamma`` / ``gamma`` are
stored as ``(N_s, G)`` with rows of unselected subcarriers held at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .config import SystemConfig, omega_t, path_loss, sensing_grid, steering_matrix
from .cubic import depressed_cubic_roots
from .waveform import ChannelSet, sinr, user_gains

PINV_RCOND = 1e-10
STATIONARITY_TOL = 1e-8


class SolverConsistencyError(RuntimeError):
    """A closed-form step produced a result violating its optimality conditions."""


# --------------------------------------------------------------------------
# layout helpers


def vec_precoders(W: np.ndarray) -> np.ndarray:
    """``(N_s, N_t, K) -> (N_s, N_t*K)`` column stacking."""
    N_s, N_t, K = W.shape
    return W.transpose(0, 2, 1).reshape(N_s, K * N_t)


def unvec_precoders(w: np.ndarray, N_t: int) -> np.ndarray:
    N_s, n = w.shape
    return w.reshape(N_s, n // N_t, N_t).transpose(0, 2, 1)


def real_stack(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=-1)


def complex_unstack(v: np.ndarray) -> np.ndarray:
    n = v.shape[-1] // 2
    return v[..., :n] + 1j * v[..., n:]


def selection_vector(mask, N_s: int) -> np.ndarray:
    """Boolean ``phi`` from a mask object, an index list, a boolean vector or ``None``."""
    if mask is None:
        return np.zeros(N_s, dtype=bool)
    phi = getattr(mask, "phi", mask)
    phi = np.asarray(phi)
    if phi.dtype != bool:
        if phi.shape == (N_s,) and set(np.unique(phi)) <= {0, 1}:
            phi = phi.astype(bool)
        else:
            out = np.zeros(N_s, dtype=bool)
            out[phi.astype(int)] = True
            phi = out
    if phi.shape != (N_s,):
        raise ValueError(f"selection vector must have length {N_s}")
    return phi


# --------------------------------------------------------------------------
# sensing metric and spec


@dataclass(frozen=True)
class SensingSpec:
    """Sensing directions and the right-hand side of the summed beampattern constraint."""

    theta_g: np.ndarray
    d_0: float
    Gamma_0: float
    threshold_rhs: float
    steering: np.ndarray  # (N_t, G)


def make_sensing_spec(cfg: SystemConfig, N_sel: int | None = None, Gamma_0: float | None = None) -> SensingSpec:
    N_sel = cfg.N_sel if N_sel is None else N_sel
    Gamma_0 = cfg.Gamma_0 if Gamma_0 is None else Gamma_0
    if N_sel <= 0:
        raise ValueError("sensing spec needs at least one selected subcarrier")
    if Gamma_0 <= 0:
        raise ValueError("Gamma_0 must be positive")
    theta_g = sensing_grid(cfg)
    rhs = N_sel * cfg.sigma_s_sq * Gamma_0 / (cfg.sigma_beta_sq * path_loss(2 * cfg.d_0, cfg))
    steering = steering_matrix(omega_t(theta_g, cfg), cfg.N_t)
    return SensingSpec(theta_g, cfg.d_0, Gamma_0, float(rhs), steering)


def beampattern(W: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``a^H W_i W_i^H a`` for each subcarrier and each column of ``a``: ``(N_s, G)``."""
    proj = np.einsum("tg,itk->igk", a.conj(), W)
    return np.sum(np.abs(proj) ** 2, axis=2)


def received_snr(W: np.ndarray, theta, d: float, mask, cfg: SystemConfig):
    """Echo SNR accumulated over the selected subcarriers for a target at ``(theta, d)``."""
    phi = selection_vector(mask, cfg.N_s)
    N_sel = int(phi.sum())
    if N_sel == 0:
        raise ValueError("received SNR is undefined without selected subcarriers")
    if d < cfg.d_ref:
        raise ValueError("d must be >= d_ref")
    a = steering_matrix(omega_t(np.atleast_1d(theta), cfg), cfg.N_t)
    gain = beampattern(np.asarray(W), a)[phi].sum(axis=0)
    snr = cfg.sigma_beta_sq * path_loss(2 * d, cfg) * gain / (N_sel * cfg.sigma_s_sq)
    return float(snr[0]) if np.ndim(theta) == 0 else snr


# --------------------------------------------------------------------------
# MM and FP layers


def mm_surrogate(W: np.ndarray, steering: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear minorant ``Re{b_ig^H w_i} + c_ig`` of the beampattern at ``W``.

    Returns ``b`` of shape ``(N_s, G, N_t*K)`` and real ``c`` of shape ``(N_s, G)``.
    """
    proj = np.einsum("tg,itk->igk", steering.conj(), W)  # a^H w_{i,k}
    N_s, G, K = proj.shape
    b = 2 * proj[..., None] * steering.T[None, :, None, :]  # (N_s, G, K, N_t)
    c = -np.sum(np.abs(proj) ** 2, axis=2)
    return b.reshape(N_s, G, K * steering.shape[0]), c


def mm_value(w: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Evaluate ``Re{b_ig^H w_i} + c_ig`` for all ``(i, g)``."""
    return np.einsum("ign,in->ig", b.conj(), w).real + c


def fp_update(W: np.ndarray, h: np.ndarray, sigma_c_sq: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form quadratic-transform auxiliaries ``(r, t)``, each ``(N_s, K)``."""
    gains = user_gains(h, W)
    total = np.sum(np.abs(gains) ** 2, axis=2) + sigma_c_sq
    r = sinr(h, W, sigma_c_sq)
    t = np.sqrt(1 + r) * np.einsum("ikk->ik", gains) / total
    return r, t


# --------------------------------------------------------------------------
# per-subcarrier quadratic for the w-update


@dataclass
class QuadraticBlock:
    """Real-valued quadratic ``w^T A w - b^T w`` of the w-subproblem, batched over subcarriers."""

    T: np.ndarray  # (N_s, n, n) Hermitian
    h_hat: np.ndarray  # (N_s, n)
    A: np.ndarray  # (N_s, 2n, 2n) complex, U^H(...)U + MM rank-one terms
    A_sym: np.ndarray  # (N_s, 2n, 2n) real, A + A^T
    b: np.ndarray  # (N_s, 2n) real
    eig: tuple[np.ndarray, np.ndarray] | None = None  # cached eigh(A_sym)

    def objective(self, w_hat: np.ndarray) -> np.ndarray:
        quad = np.einsum("in,inm,im->i", w_hat, self.A_sym, w_hat) / 2
        return quad - np.einsum("in,in->i", self.b, w_hat)


def assemble_quadratic(
    h: np.ndarray,
    r: np.ndarray,
    t: np.ndarray,
    x: np.ndarray,
    mu: np.ndarray,
    b_mm: np.ndarray,
    c_mm: np.ndarray,
    Gamma: np.ndarray,
    gamma: np.ndarray,
    phi: np.ndarray,
    rho_1: float,
    rho_3: float,
) -> QuadraticBlock:
    """Build the w-subproblem of every subcarrier from the FP, MM and dual state."""
    N_s, K, N_t = h.shape
    n = N_t * K
    weights = np.abs(t) ** 2  # (N_s, K)
    M = np.einsum("ij,ija,ijb->iab", weights, h, h.conj())
    M = (M + M.conj().transpose(0, 2, 1)) / 2
    T = np.einsum("kl,iab->ikalb", np.eye(K), M).reshape(N_s, n, n)
    h_hat = (np.sqrt(1 + r) * t)[..., None] * h  # (N_s, K, N_t)
    h_hat = h_hat.reshape(N_s, n)

    Mp = T + (rho_1 / 2) * np.eye(n)
    A = np.block([[Mp, 1j * Mp], [-1j * Mp, Mp]])  # U^H Mp U with U = [I, jI]
    beta = real_stack(b_mm) * phi[:, None, None]  # (N_s, G, 2n)
    A = A + (rho_3 / 2) * np.einsum("igm,ign->imn", beta, beta)

    shift = (c_mm - Gamma + gamma / rho_3) * phi[:, None]  # (N_s, G)
    lin = 2 * h_hat + rho_1 * (x + mu / rho_1) - rho_3 * np.einsum("ig,ign->in", shift, b_mm)
    A_sum = A + A.transpose(0, 2, 1)
    return QuadraticBlock(T=T, h_hat=h_hat, A=A, A_sym=A_sum.real.copy(), b=real_stack(lin))


def check_block(block: QuadraticBlock, tol_imag: float = 1e-12, tol_eig: float = 1e-9) -> np.ndarray:
    """Assert ``A + A^T`` is real symmetric PSD; return its eigenvalues.

    The eigendecomposition is cached on the block for :func:`update_w`.
    """
    A_sum = block.A + block.A.transpose(0, 2, 1)
    scale = np.linalg.norm(block.A_sym, axis=(1, 2))
    if np.any(np.max(np.abs(A_sum.imag), axis=(1, 2)) > tol_imag * scale):
        raise SolverConsistencyError("A + A^T has a non-negligible imaginary part")
    if not np.allclose(block.A_sym, block.A_sym.transpose(0, 2, 1), rtol=0, atol=1e-12 * scale.max()):
        raise SolverConsistencyError("A + A^T is not symmetric")
    lam, V = np.linalg.eigh(block.A_sym)
    if np.any(lam[:, 0] < -tol_eig * scale):
        raise SolverConsistencyError("A + A^T is not positive semidefinite")
    block.eig = (lam, V)
    return lam


def symmetric_pinv_solve(M: np.ndarray, b: np.ndarray, rcond: float = PINV_RCOND, eig=None) -> np.ndarray:
    """``pinv(M) @ b`` for symmetric PSD ``M`` (batched) via eigendecomposition."""
    lam, V = np.linalg.eigh(M) if eig is None else eig
    cutoff = rcond * np.max(np.abs(lam), axis=-1, keepdims=True)
    inv = np.where(np.abs(lam) > cutoff, 1.0 / np.where(lam == 0, 1, lam), 0.0)
    coeff = np.einsum("...nm,...n->...m", V, b) * inv
    return np.einsum("...nm,...m->...n", V, coeff)


def update_w(block: QuadraticBlock, tol: float = STATIONARITY_TOL) -> np.ndarray:
    """Minimize the real quadratic: ``w_hat = pinv(A + A^T) b``, returned as complex ``w``."""
    w_hat = symmetric_pinv_solve(block.A_sym, block.b, eig=block.eig)
    resid = np.linalg.norm(np.einsum("inm,im->in", block.A_sym, w_hat) - block.b, axis=-1)
    bound = tol * (1 + np.linalg.norm(block.b, axis=-1))
    if np.any(resid > bound):
        raise SolverConsistencyError(
            f"w-update stationarity residual {resid.max():.3e} exceeds bound; "
            "channel rank assumption violated or numerical breakdown"
        )
    return complex_unstack(w_hat)


# --------------------------------------------------------------------------
# x-update


def x_objective(x: np.ndarray, w: np.ndarray, p: float, mu: np.ndarray, nu: float, rho_1: float, rho_2: float) -> float:
    v = w - mu / rho_1
    return float(rho_1 / 2 * np.sum(np.abs(x - v) ** 2) + rho_2 / 2 * (np.sum(np.abs(x) ** 2) - p + nu / rho_2) ** 2)


def x_stationarity(x, w, p, mu, nu, rho_1, rho_2) -> float:
    """Norm of ``rho_1/2 (x - (w - mu/rho_1)) + rho_2 (||x||^2 - p + nu/rho_2) x``."""
    v = w - mu / rho_1
    g = rho_1 / 2 * (x - v) + rho_2 * (np.sum(np.abs(x) ** 2) - p + nu / rho_2) * x
    return float(np.linalg.norm(g))


def x_update_single(w, p, mu, nu, rho_1, rho_2) -> tuple[np.ndarray, bool]:
    """Global minimizer of the x-subproblem for one subcarrier.

    Every stationary point is a multiple ``s * v`` of ``v = w - mu/rho_1``;
    the candidate norms are the non-negative roots of
    ``b n^3 + a n -/+ k = 0``.  Returns ``(x, degenerate)``.
    """
    v = w - mu / rho_1
    k = float(np.linalg.norm(v))
    a = 1 - 2 * rho_2 / rho_1 * p + 2 * nu / rho_1
    b = 2 * rho_2 / rho_1
    candidates: list[np.ndarray] = []
    if k == 0.0:
        candidates.append(np.zeros_like(v))
        # the sphere ||x||^2 = -a/b is also stationary when v = 0
        if -a / b > 0:
            e = np.zeros_like(v)
            e[0] = 1.0
            candidates.append(np.sqrt(-a / b) * e)
    else:
        for sign in (-1.0, 1.0):
            for n in depressed_cubic_roots(a / b, sign * k / b):
                if n < 0:
                    continue
                denom = a + b * n * n
                if denom == 0.0:
                    continue
                candidates.append(v / denom)
    scale = rho_1 * (1 + k)
    valid = [x for x in candidates if x_stationarity(x, w, p, mu, nu, rho_1, rho_2) <= STATIONARITY_TOL * scale]
    if not valid:
        return v.copy(), True
    values = [x_objective(x, w, p, mu, nu, rho_1, rho_2) for x in valid]
    return valid[int(np.argmin(values))], False


def update_x(w, p, mu, nu, rho_1: float, rho_2: float) -> tuple[np.ndarray, np.ndarray]:
    """Batched x-update; returns ``(x, degenerate_flags)``."""
    x = np.empty_like(w)
    flags = np.zeros(w.shape[0], dtype=bool)
    for i in range(w.shape[0]):
        x[i], flags[i] = x_update_single(w[i], p[i], mu[i], nu[i], rho_1, rho_2)
    return x, flags


# --------------------------------------------------------------------------
# Gamma, p and dual updates


def update_gamma(w, b_mm, c_mm, gamma, phi, rho_3: float, threshold_rhs: float) -> np.ndarray:
    """Project the unconstrained optima onto ``sum_i Gamma_ig >= rhs`` for each ``g``."""
    N_sel = int(phi.sum())
    if N_sel == 0:
        raise ValueError("Gamma update needs at least one selected subcarrier")
    hat = mm_value(w, b_mm, c_mm) + gamma / rho_3
    lift = np.maximum((threshold_rhs - hat[phi].sum(axis=0)) / N_sel, 0.0)
    return np.where(phi[:, None], hat + lift[None, :], 0.0)


def update_p(x, nu, rho_2: float, P_0: float) -> np.ndarray:
    """Project ``||x_i||^2 + nu_i/rho_2`` onto ``sum_i p_i <= P_0``."""
    hat = np.sum(np.abs(x) ** 2, axis=1) + nu / rho_2
    return hat - max((hat.sum() - P_0) / hat.size, 0.0)


@dataclass
class SolverState:
    w: np.ndarray  # (N_s, n) complex
    x: np.ndarray  # (N_s, n) complex
    p: np.ndarray  # (N_s,) real
    mu: np.ndarray  # (N_s, n) complex
    nu: np.ndarray  # (N_s,) real
    Gamma: np.ndarray  # (N_s, G) real
    gamma: np.ndarray  # (N_s, G) real
    phi: np.ndarray  # (N_s,) bool
    rho: tuple[float, float, float]
    t: int = 0
    fp_r: np.ndarray | None = None
    fp_t: np.ndarray | None = None

    def copy(self) -> "SolverState":
        return replace(
            self,
            **{k: getattr(self, k).copy() for k in ("w", "x", "p", "mu", "nu", "Gamma", "gamma")},
        )


def update_duals(state: SolverState, b_mm, c_mm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rho_1, rho_2, rho_3 = state.rho
    mu = state.mu + rho_1 * (state.x - state.w)
    nu_step = rho_2 * (np.einsum("in,in->i", state.x.conj(), state.x) - state.p)
    gamma_step = rho_3 * (mm_value(state.w, b_mm, c_mm) - state.Gamma) * state.phi[:, None]
    if np.max(np.abs(nu_step.imag), initial=0.0) >= 1e-14 * max(1.0, np.max(np.abs(nu_step.real), initial=0.0)):
        raise SolverConsistencyError("nu increment is not real")
    return mu, state.nu + nu_step.real, state.gamma + gamma_step


def residual_norms(state: SolverState, prev: SolverState, b_mm, c_mm) -> tuple[float, float]:
    """Primal and dual residual norms ``(r, s)`` between consecutive iterates.

    ``b_mm, c_mm`` are the MM coefficients of the iteration that produced ``state``.
    """
    rho_1, rho_2, rho_3 = state.rho
    phi = state.phi[:, None]
    gap_x = np.sum(np.abs(state.x - state.w) ** 2)
    gap_p = np.sum((np.sum(np.abs(state.x) ** 2, axis=1) - state.p) ** 2)
    gap_g = np.sum(((mm_value(state.w, b_mm, c_mm) - state.Gamma) * phi) ** 2)
    d_w = np.sum(np.abs(rho_1 * (state.w - prev.w)) ** 2)
    d_p = np.sum((rho_2 * (state.p - prev.p)) ** 2)
    b_norm_sq = np.sum(np.abs(b_mm) ** 2, axis=2)
    d_g = np.sum(rho_3 ** 2 * b_norm_sq * ((state.Gamma - prev.Gamma) * phi) ** 2)
    return float(np.sqrt(gap_x + gap_p + gap_g)), float(np.sqrt(d_w + d_p + d_g))


# --------------------------------------------------------------------------
# initialization and the outer loop


def initial_precoders(cfg: SystemConfig) -> np.ndarray:
    """Beams spread uniformly over the sensing sector, scaled to spend exactly ``P_0``."""
    K = cfg.K
    if K == 1:
        angles = np.array([(cfg.theta_a + cfg.theta_b) / 2])
    else:
        angles = cfg.theta_a + np.arange(K) * (cfg.theta_b - cfg.theta_a) / (K - 1)
    cols = steering_matrix(omega_t(angles, cfg), cfg.N_t) * np.sqrt(cfg.P_0 / (cfg.N_s * cfg.N_t * K))
    return np.broadcast_to(cols, (cfg.N_s, cfg.N_t, K)).copy()


def initialize(cfg: SystemConfig, spec: SensingSpec | None, mask=None) -> SolverState:
    phi = selection_vector(mask, cfg.N_s) if spec is not None else np.zeros(cfg.N_s, dtype=bool)
    W = initial_precoders(cfg)
    w = vec_precoders(W)
    G = cfg.G if spec is None else spec.steering.shape[1]
    if spec is not None:
        Gamma = beampattern(W, spec.steering) * phi[:, None]
    else:
        Gamma = np.zeros((cfg.N_s, G))
    return SolverState(
        w=w,
        x=w.copy(),
        p=np.sum(np.abs(w) ** 2, axis=1),
        mu=np.zeros_like(w),
        nu=np.zeros(cfg.N_s),
        Gamma=Gamma,
        gamma=np.zeros((cfg.N_s, G)),
        phi=phi,
        rho=(cfg.rho_1, cfg.rho_2, cfg.rho_3),
    )


def default_tolerance(cfg: SystemConfig) -> float:
    return 1e-3 * np.sqrt(cfg.N_s * cfg.N_t * cfg.K)


@dataclass
class StopRule:
    max_iter: int = 500
    eps_primal: float | None = None
    eps_dual: float | None = None
    min_iter: int = 1


@dataclass
class SolveResult:
    W: np.ndarray
    converged: bool
    feasible: bool
    iterations: int
    trace: list[dict] = field(default_factory=list)
    state: SolverState | None = None
    degenerate_x: int = 0


def power_round(W: np.ndarray, P_0: float) -> np.ndarray:
    total = float(np.sum(np.abs(W) ** 2))
    return W * min(1.0, np.sqrt(P_0 / total)) if total > 0 else W


def sensing_surplus(W, spec: SensingSpec | None, phi, cfg: SystemConfig) -> float:
    """``min_g SNR(theta_g) / Gamma_0`` in dB (NaN without a sensing constraint)."""
    if spec is None or not phi.any():
        return float("nan")
    snr = received_snr(W, spec.theta_g, spec.d_0, phi, cfg)
    worst = float(np.min(snr)) / spec.Gamma_0
    return 10 * np.log10(worst) if worst > 0 else float("-inf")


def solve(
    cfg: SystemConfig,
    H: ChannelSet | np.ndarray,
    spec: SensingSpec | None,
    mask=None,
    stop: StopRule | None = None,
    callback: Callable[[SolverState, dict], None] | None = None,
    feasibility_slack: float = 1e-2,
) -> SolveResult:
    """Run the MM-FP-ADMM loop until both residuals fall below tolerance or ``max_iter``.

    ``spec=None`` drops the sensing constraint (communication-only design).
    """
    stop = stop or StopRule()
    h = H.h if isinstance(H, ChannelSet) else np.asarray(H)
    eps_p = stop.eps_primal if stop.eps_primal is not None else default_tolerance(cfg)
    eps_d = stop.eps_dual if stop.eps_dual is not None else default_tolerance(cfg)
    state = initialize(cfg, spec, mask)
    phi = state.phi
    if spec is not None and not phi.any():
        raise ValueError("sensing constraint requested but no subcarrier is selected")
    steering = spec.steering if spec is not None else np.zeros((cfg.N_t, state.Gamma.shape[1]), complex)
    rhs = spec.threshold_rhs if spec is not None else 0.0
    rho_1, rho_2, rho_3 = state.rho

    def is_feasible(Wr):
        if spec is None:
            return True
        snr = received_snr(Wr, spec.theta_g, spec.d_0, phi, cfg)
        return bool(np.all(snr >= spec.Gamma_0 * (1 - feasibility_slack)))

    trace: list[dict] = []
    best = None  # (rate, W) of the best feasible rounded iterate
    converged = False
    degenerate = 0
    start = time.perf_counter()
    for it in range(1, stop.max_iter + 1):
        prev = state.copy()
        W = unvec_precoders(state.w, cfg.N_t)
        b_mm, c_mm = mm_surrogate(W, steering)
        r_fp, t_fp = fp_update(W, h, cfg.sigma_c_sq)
        block = assemble_quadratic(h, r_fp, t_fp, state.x, state.mu, b_mm, c_mm,
                                   state.Gamma, state.gamma, phi, rho_1, rho_3)
        check_block(block)
        state.w = update_w(block)
        state.x, flags = update_x(state.w, state.p, state.mu, state.nu, rho_1, rho_2)
        degenerate += int(flags.sum())
        if spec is not None:
            state.Gamma = update_gamma(state.w, b_mm, c_mm, state.gamma, phi, rho_3, rhs)
        state.p = update_p(state.x, state.nu, rho_2, cfg.P_0)
        state.mu, state.nu, state.gamma = update_duals(state, b_mm, c_mm)
        state.t = it
        state.fp_r, state.fp_t = r_fp, t_fp
        r_norm, s_norm = residual_norms(state, prev, b_mm, c_mm)

        W_new = unvec_precoders(state.w, cfg.N_t)
        W_round = power_round(W_new, cfg.P_0)
        rate = float(np.sum(np.log2(1 + sinr(h, W_round, cfg.sigma_c_sq))))
        row = {
            "iteration": it,
            "sum_rate_bits": rate,
            "r_primal": r_norm,
            "s_dual": s_norm,
            "min_sensing_surplus_db": sensing_surplus(W_round, spec, phi, cfg),
            "wall_time_ms": 1e3 * (time.perf_counter() - start),
        }
        trace.append(row)
        if callback is not None:
            callback(state, {**row, "b_mm": b_mm, "c_mm": c_mm, "block": block, "prev": prev})
        if is_feasible(W_round) and (best is None or rate > best[0]):
            best = (rate, W_round)
        if it >= stop.min_iter and r_norm < eps_p and s_norm < eps_d:
            converged = True
            break

    W_final = power_round(unvec_precoders(state.w, cfg.N_t), cfg.P_0)
    if not converged and best is not None:
        W_final = best[1]
    return SolveResult(
        W=W_final,
        converged=converged,
        feasible=is_feasible(W_final),
        iterations=state.t,
        trace=trace,
        state=state,
        degenerate_x=degenerate,
    )

"""Communication symbols, precoding, channel synthesis, echo synthesis and sum-rate.

Array conventions used throughout the package:

* symbols ``S``: ``(N_s, L, K)``
* precoders ``W``: ``(N_s, N_t, K)``; column ``k`` of ``W[i]`` is ``w_{i,k}``
* channels ``ChannelSet.h``: ``(N_s, K, N_t)``; row ``h[i, k]`` is ``h_{i,k}``
* transmitted symbols ``X``: ``(N_s, L, N_t)``
* echo cube: ``(N_r, N_s, L)`` indexed ``[m, i, l]``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import (
    SPEED_OF_LIGHT,
    ConfigError,
    SystemConfig,
    TargetScene,
    digital_frequencies,
    path_loss,
    steering_matrix,
    unambiguous_range,
    unambiguous_velocity,
)

MAX_CHANNEL_REDRAWS = 100


class ChannelGenerationError(RuntimeError):
    pass


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def qam_constellation(order: int) -> np.ndarray:
    """Gray-mapped square QAM with unit average power; entry ``b`` is the point for label ``b``."""
    side = int(round(np.sqrt(order)))
    if order < 4 or side * side != order or side & (side - 1):
        raise ConfigError(f"unsupported QAM order {order}")
    bits = side.bit_length() - 1
    levels = 2 * np.arange(side) - (side - 1)  # -(side-1) .. side-1, step 2
    # gray label of a PAM position -> level
    pam = np.empty(side)
    pam[_gray(np.arange(side))] = levels
    labels = np.arange(order)
    points = pam[labels >> bits] + 1j * pam[labels & (side - 1)]
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def generate_symbols(cfg: SystemConfig, seed: int) -> np.ndarray:
    """Draw i.i.d. unit-power QAM symbols of shape ``(N_s, L, K)``."""
    points = qam_constellation(cfg.qam_order)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, cfg.qam_order, size=(cfg.N_s, cfg.L, cfg.K))
    return points[idx]


def precode(W_i: np.ndarray, s_i: np.ndarray) -> np.ndarray:
    """``x_i = W_i s_i`` for one subcarrier (``s_i`` may also be ``(L, K)``)."""
    W_i = np.asarray(W_i)
    s_i = np.asarray(s_i)
    if W_i.ndim != 2 or s_i.shape[-1] != W_i.shape[1]:
        raise ValueError(f"dimension mismatch: W {W_i.shape}, s {s_i.shape}")
    return s_i @ W_i.T


def transmit(W: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Precode every subcarrier and slot: ``X[i, l] = W[i] @ S[i, l]``."""
    if W.shape[0] != S.shape[0] or W.shape[2] != S.shape[2]:
        raise ValueError(f"dimension mismatch: W {W.shape}, S {S.shape}")
    return np.einsum("itk,ilk->ilt", W, S)


@dataclass
class ChannelSet:
    """Frequency-domain downlink channels plus the geometry they were drawn from."""

    h: np.ndarray  # (N_s, K, N_t)
    d_los: np.ndarray  # (K,)
    theta_los: np.ndarray  # (K,)
    delta_paths: np.ndarray  # (K, n_paths)
    d_paths: np.ndarray  # (K, n_paths)
    theta_paths: np.ndarray  # (K, n_paths)
    redraws: int = 0

    @property
    def N_s(self) -> int:
        return self.h.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[1]


def channel_from_geometry(
    cfg: SystemConfig,
    d_los: np.ndarray,
    theta_los: np.ndarray,
    delta_paths: np.ndarray,
    d_paths: np.ndarray,
    theta_paths: np.ndarray,
    delta_los: float = 1.0,
) -> np.ndarray:
    """Evaluate the LoS-plus-scatterers channel on every subcarrier, shape ``(N_s, K, N_t)``."""
    freqs = cfg.f_c + np.arange(cfg.N_s) * cfg.delta_f  # (N_s,)
    n = np.arange(cfg.N_t)
    scale = 2 * np.pi * cfg.d_t / SPEED_OF_LIGHT

    def response(theta, gain):
        # theta, gain: (K, P) -> (N_s, K, N_t)
        phase = scale * np.sin(theta)[None, :, :, None] * freqs[:, None, None, None] * n
        return np.sum(gain[None, :, :, None] * np.exp(1j * phase), axis=2)

    los_gain = delta_los * np.sqrt(path_loss(d_los, cfg))[:, None]
    h = response(theta_los[:, None], los_gain.astype(complex))
    if delta_paths.size:
        h = h + response(theta_paths, delta_paths * np.sqrt(path_loss(d_paths, cfg)))
    return h


def generate_channel(cfg: SystemConfig, seed: int) -> ChannelSet:
    """Draw user geometry and scatterers, redrawing scatterers until every ``H_i`` has rank K."""
    rng = np.random.default_rng(seed)
    K, P = cfg.K, cfg.n_paths
    d_los = rng.uniform(50.0, 100.0, K)
    theta_los = rng.uniform(-np.pi / 2, np.pi / 2, K)
    for attempt in range(MAX_CHANNEL_REDRAWS + 1):
        delta = 0.1 + np.sqrt(0.01 / 2) * (rng.standard_normal((K, P)) + 1j * rng.standard_normal((K, P)))
        d_paths = rng.uniform(d_los[:, None] - 15.0, d_los[:, None] + 15.0, (K, P))
        theta_paths = rng.uniform(theta_los[:, None] - np.radians(10), theta_los[:, None] + np.radians(10), (K, P))
        h = channel_from_geometry(cfg, d_los, theta_los, delta, d_paths, theta_paths)
        ranks = np.linalg.matrix_rank(h)
        if np.all(ranks == K):
            return ChannelSet(h, d_los, theta_los, delta, d_paths, theta_paths, redraws=attempt)
    raise ChannelGenerationError(f"channel rank < K={K} after {MAX_CHANNEL_REDRAWS} redraws")


def user_gains(h: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``G[i, k, j] = h_{i,k}^H w_{i,j}``."""
    return np.einsum("ikt,itj->ikj", h.conj(), W)


def sinr(h: np.ndarray, W: np.ndarray, sigma_c_sq: float) -> np.ndarray:
    """Per-subcarrier, per-user SINR, shape ``(N_s, K)``."""
    power = np.abs(user_gains(h, W)) ** 2
    desired = np.einsum("ikk->ik", power)
    interference = power.sum(axis=2) - desired
    return desired / (interference + sigma_c_sq)


def sum_rate(H, W: np.ndarray, sigma_c_sq: float) -> float:
    """Total downlink rate in bits per channel use (log base 2)."""
    h = H.h if isinstance(H, ChannelSet) else np.asarray(H)
    W = np.asarray(W)
    if h.shape[0] != W.shape[0] or h.shape[2] != W.shape[1] or h.shape[1] != W.shape[2]:
        raise ValueError(f"dimension mismatch: h {h.shape}, W {W.shape}")
    return float(np.sum(np.log2(1.0 + sinr(h, W, sigma_c_sq))))


def draw_beta(n: int, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    return np.sqrt(cfg.sigma_beta_sq / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def check_scene(scene: TargetScene, cfg: SystemConfig) -> None:
    if np.any(scene.d < cfg.d_ref):
        raise ValueError("target ranges must be >= d_ref")
    if np.any(scene.d >= unambiguous_range(cfg)):
        raise ValueError("target range beyond the unambiguous range c/(2*delta_f)")
    if np.any(np.abs(scene.v) >= unambiguous_velocity(cfg)):
        raise ValueError("target velocity beyond the unambiguous velocity c/(4*T*f_c)")


def generate_echo(
    scene: TargetScene,
    W: np.ndarray,
    S: np.ndarray,
    cfg: SystemConfig,
    seed: int | None = None,
    noiseless: bool = False,
) -> np.ndarray:
    """Frequency-domain echo cube ``y[m, i, l]`` of shape ``(N_r, N_s, L)``."""
    W = np.asarray(W)
    S = np.asarray(S)
    if W.size == 0 or S.size == 0:
        raise ValueError("empty precoder or symbol tensor")
    if W.shape != (cfg.N_s, cfg.N_t, S.shape[2]) or S.shape[:2] != (cfg.N_s, cfg.L):
        raise ValueError(f"dimension mismatch: W {W.shape}, S {S.shape}")
    check_scene(scene, cfg)
    X = transmit(W, S)
    cube = np.zeros((cfg.N_r, cfg.N_s, cfg.L), dtype=complex)
    if scene.Q:
        w_t, w_r, w_d, w_v = digital_frequencies(scene.theta, scene.d, scene.v, cfg)
        a_t = steering_matrix(w_t, cfg.N_t)  # (N_t, Q)
        proj = X @ a_t.conj()  # (N_s, L, Q): a(omega_t)^H x_i[l]
        amp = scene.beta * np.sqrt(path_loss(2 * scene.d, cfg))
        rx = steering_matrix(w_r, cfg.N_r)  # (N_r, Q)
        sub = steering_matrix(w_d, cfg.N_s)  # (N_s, Q)
        slot = steering_matrix(w_v, cfg.L)  # (L, Q)
        cube += np.einsum("q,mq,iq,lq,ilq->mil", amp, rx, sub, slot, proj)
    if not noiseless:
        rng = np.random.default_rng(seed)
        shape = cube.shape
        cube += np.sqrt(cfg.sigma_s_sq / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return cube

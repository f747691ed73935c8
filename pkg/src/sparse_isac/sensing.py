"""Angle-range-velocity estimation from the echo cube by three DFT stages.

Processing order: spatial DFT over receive antennas, removal of the
symbol-dependent coefficient on every (subcarrier, slot) sample, Doppler
DFT over slots and delay DFT over subcarriers.  Peaks of the resulting
cube map back to physical parameters through the digital-frequency
relations used by the echo model.

Bin indices follow signed conventions; storage index ``j`` on an axis
corresponds to bin ``n = j + offset``:

* angle:   ``n_a in [-floor(N_a/2), N_a - 1 - floor(N_a/2)]``
* delay:   ``n_d in [-N_d + 1, 0]``
* Doppler: ``n_v in [-floor(N_v/2), N_v - 1 - floor(N_v/2)]``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.optimize import linear_sum_assignment

from .config import SPEED_OF_LIGHT, ConfigError, SystemConfig, TargetScene, steering_matrix

DIV_FLOOR_REL = 1e-9
MIN_REL_PEAK = 0.5


def centered_bins(n: int) -> np.ndarray:
    """Signed bins ``-floor(n/2) .. n-1-floor(n/2)``."""
    return np.arange(n) - n // 2


def delay_bins(N_d: int) -> np.ndarray:
    return np.arange(N_d) - N_d + 1


def dft_rows(bins: np.ndarray, size: int, length: int) -> np.ndarray:
    """``D[b, m] = exp(-j m 2 pi bins[b] / size)`` for ``m < length``."""
    return np.exp(-2j * np.pi * np.outer(bins, np.arange(length)) / size)


# --------------------------------------------------------------------------
# stage 1: spatial DFT and coefficient removal


def spatial_dft(cube: np.ndarray, N_a: int) -> np.ndarray:
    """``Y[n_a, i, l] = (1/N_r) sum_m y[m, i, l] exp(-j m 2 pi n_a / N_a)``."""
    N_r = cube.shape[0]
    if N_a < N_r:
        raise ConfigError(f"N_a={N_a} must be >= N_r={N_r}")
    D = dft_rows(centered_bins(N_a), N_a, N_r)
    return np.tensordot(D, cube, axes=(1, 0)) / N_r


def angle_bin_steering(cfg: SystemConfig) -> np.ndarray:
    """Transmit steering vectors matched to each angle bin, shape ``(N_t, N_a)``."""
    omegas = -cfg.d_t * centered_bins(cfg.N_a) * 2 * np.pi / (cfg.d_r * cfg.N_a)
    return steering_matrix(omegas, cfg.N_t)


@dataclass
class CoefficientRemoval:
    y: np.ndarray  # (N_a, N_s, L)
    alpha: np.ndarray  # (N_a,)
    flagged: np.ndarray  # (N_a, N_s, L) bool, divisor below the floor

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())


def remove_coefficients(
    Y: np.ndarray,
    X: np.ndarray,
    cfg: SystemConfig,
    subcarriers: np.ndarray | None = None,
) -> CoefficientRemoval:
    """Divide out ``a(bin)^H x_i[l]`` and rescale each angle bin by ``alpha``.

    ``X`` holds the transmitted vectors, shape ``(N_s, L, N_t)``.  Samples whose
    divisor falls below ``1e-9 * mean|a^H x|`` are zeroed, flagged and left out
    of ``alpha``.  ``subcarriers`` (boolean) restricts every sum to the sensed
    subcarriers; the others are zeroed.
    """
    a = angle_bin_steering(cfg)
    div = np.einsum("ta,ilt->ail", a.conj(), X)  # (N_a, N_s, L)
    mag = np.abs(div)
    use = np.ones(Y.shape[1], dtype=bool) if subcarriers is None else np.asarray(subcarriers, bool)
    floor = DIV_FLOOR_REL * mag[:, use].mean(axis=(1, 2), keepdims=True)
    flagged = (mag <= floor) & use[None, :, None]
    ok = ~flagged & use[None, :, None]
    ratio = np.zeros_like(Y)
    np.divide(Y, div, out=ratio, where=ok)
    num = np.sum(np.abs(ratio) ** 2, axis=(1, 2))
    den = np.sum(np.where(ok, np.abs(Y) ** 2, 0.0), axis=(1, 2))
    # zero received energy in a bin: 0/0, defined as 1
    alpha = np.ones_like(num)
    nz = den > 0
    alpha[nz] = np.sqrt(num[nz] / den[nz])
    scale = np.where(alpha > 0, alpha, 1.0)
    return CoefficientRemoval(ratio / scale[:, None, None], alpha, flagged)


# --------------------------------------------------------------------------
# stages 2 and 3: Doppler and delay DFTs


def doppler_dft(y: np.ndarray, N_v: int) -> np.ndarray:
    """``Y[n_a, i, n_v] = (1/L) sum_l y[n_a, i, l] exp(-j l 2 pi n_v / N_v)``."""
    L = y.shape[-1]
    if N_v < L:
        raise ConfigError(f"N_v={N_v} must be >= L={L}")
    D = dft_rows(centered_bins(N_v), N_v, L)
    return np.einsum("ail,vl->aiv", y, D) / L


def delay_dft_matrix(N_d: int) -> np.ndarray:
    """``F[m, n] = exp(-j (n-1)(m-N_d) 2 pi / N_d)`` (1-based), with ``F F^H = N_d I`` checked."""
    m = np.arange(1, N_d + 1)[:, None]
    n = np.arange(1, N_d + 1)[None, :]
    F = np.exp(-1j * (n - 1) * (m - N_d) * 2 * np.pi / N_d)
    if not np.allclose(F @ F.conj().T, N_d * np.eye(N_d), rtol=0, atol=1e-10 * N_d):
        raise ArithmeticError("delay DFT matrix lost orthogonality")
    return F


def zero_pad_fibers(Yd: np.ndarray, N_d: int) -> np.ndarray:
    """``(N_a, N_s, N_v) -> (N_a, N_d, N_v)`` with subcarriers zero-padded to ``N_d``."""
    N_a, N_s, N_v = Yd.shape
    out = np.zeros((N_a, N_d, N_v), dtype=complex)
    out[:, :N_s] = Yd
    return out


def delay_dft(Yd: np.ndarray, N_d: int, method: str = "matrix") -> np.ndarray:
    """Delay DFT of every ``(n_a, n_v)`` fiber, normalized by ``1/N_s``.

    ``method="matrix"`` applies ``F`` to the zero-padded fiber; ``method="sum"``
    evaluates the defining sum directly.  Returns ``(N_a, N_d, N_v)`` data.
    """
    N_s = Yd.shape[1]
    if N_d < N_s:
        raise ConfigError(f"N_d={N_d} must be >= N_s={N_s}")
    if method == "matrix":
        F = delay_dft_matrix(N_d)
        return np.einsum("mn,anv->amv", F, zero_pad_fibers(Yd, N_d)) / N_s
    if method == "sum":
        D = dft_rows(delay_bins(N_d), N_d, N_s)
        return np.einsum("di,aiv->adv", D, Yd) / N_s
    raise ValueError(f"unknown method {method!r}")


@dataclass
class ProcessedCube:
    """Processed data ``Y[n_a, n_d, n_v]`` with explicit signed-bin offsets."""

    data: np.ndarray  # (N_a, N_d, N_v)
    offsets: tuple[int, int, int] = field(default=(0, 0, 0))
    flags: np.ndarray | None = None  # per-fiber solver non-convergence, (N_a, N_v)

    @classmethod
    def from_data(cls, data: np.ndarray, flags: np.ndarray | None = None) -> "ProcessedCube":
        N_a, N_d, N_v = data.shape
        return cls(data, (-(N_a // 2), -N_d + 1, -(N_v // 2)), flags)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def bins(self, axis: int) -> np.ndarray:
        return np.arange(self.data.shape[axis]) + self.offsets[axis]

    def at(self, n_a: int, n_d: int, n_v: int) -> complex:
        oa, od, ov = self.offsets
        return complex(self.data[n_a - oa, n_d - od, n_v - ov])


def front_end(cube: np.ndarray, X: np.ndarray, cfg: SystemConfig,
              subcarriers: np.ndarray | None = None) -> tuple[np.ndarray, CoefficientRemoval]:
    """Spatial DFT, coefficient removal and Doppler DFT: returns ``(N_a, N_s, N_v)`` fibers."""
    removal = remove_coefficients(spatial_dft(cube, cfg.N_a), X, cfg, subcarriers)
    return doppler_dft(removal.y, cfg.N_v), removal


def dft_estimate(cube: np.ndarray, X: np.ndarray, cfg: SystemConfig) -> ProcessedCube:
    """Full-subcarrier processing chain ending with the delay DFT."""
    Yd, _ = front_end(cube, X, cfg)
    return ProcessedCube.from_data(delay_dft(Yd, cfg.N_d))


# --------------------------------------------------------------------------
# detection and parameter inversion


@dataclass(frozen=True)
class Detection:
    theta: float
    d: float
    v: float
    magnitude: float
    bins: tuple[int, int, int]


@dataclass
class EstimationResult:
    detections: list[Detection]

    def __len__(self) -> int:
        return len(self.detections)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.array([t.theta for t in self.detections]),
            np.array([t.d for t in self.detections]),
            np.array([t.v for t in self.detections]),
        )

    def to_rows(self) -> list[str]:
        """Whitespace-separated text rows with a header line."""
        rows = ["theta_rad d_m v_mps magnitude n_a n_d n_v"]
        for t in self.detections:
            rows.append(f"{t.theta:.12g} {t.d:.12g} {t.v:.12g} {t.magnitude:.12g} "
                        f"{t.bins[0]} {t.bins[1]} {t.bins[2]}")
        return rows


def bins_to_parameters(n_a, n_d, n_v, cfg: SystemConfig):
    """Map signed bins to ``(sin(theta), d, v)``."""
    c = SPEED_OF_LIGHT
    sin_theta = -np.asarray(n_a) * c / (cfg.N_a * cfg.d_r * cfg.f_c)
    d = -np.asarray(n_d) / cfg.N_d * c / (2 * cfg.delta_f)
    v = np.asarray(n_v) / cfg.N_v * c / (2 * cfg.T * cfg.f_c)
    return sin_theta, d, v


def parameters_to_bins(theta, d, v, cfg: SystemConfig):
    """Real-valued bin positions of a target; integers for on-grid scenes."""
    c = SPEED_OF_LIGHT
    n_a = -np.sin(theta) * cfg.N_a * cfg.d_r * cfg.f_c / c
    n_d = -np.asarray(d) * cfg.N_d * 2 * cfg.delta_f / c
    n_v = np.asarray(v) * cfg.N_v * 2 * cfg.T * cfg.f_c / c
    return n_a, n_d, n_v


def detect_and_invert(
    cube: ProcessedCube,
    cfg: SystemConfig,
    max_targets: int | None = None,
    min_rel_peak: float = MIN_REL_PEAK,
) -> EstimationResult:
    """Local maxima of ``|Y|`` over the 26-neighborhood (cyclic), mapped to parameters."""
    mag = np.abs(cube.data)
    if not np.all(np.isfinite(mag)):
        raise ValueError("processed cube has non-finite entries")
    peak = float(mag.max(initial=0.0))
    if peak == 0.0:
        return EstimationResult([])
    local = mag == maximum_filter(mag, size=3, mode="wrap")
    idx = np.argwhere(local & (mag >= min_rel_peak * peak))
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], -mag[tuple(idx.T)]))
    detections = []
    for j in idx[order]:
        n_a, n_d, n_v = (int(j[ax]) + cube.offsets[ax] for ax in range(3))
        s, d, v = bins_to_parameters(n_a, n_d, n_v, cfg)
        if abs(s) > 1:
            continue
        detections.append(Detection(float(np.arcsin(s)), float(d), float(v), float(mag[tuple(j)]), (n_a, n_d, n_v)))
        if max_targets is not None and len(detections) >= max_targets:
            break
    return EstimationResult(detections)


# --------------------------------------------------------------------------
# scoring


@dataclass(frozen=True)
class RmseResult:
    theta: float
    d: float
    v: float
    matched: int
    misses: int
    miss_penalty: float


def default_scales(cfg: SystemConfig) -> tuple[float, float, float]:
    """Normalization of ``(theta, d, v)`` for assignment: one resolution bin each."""
    c = SPEED_OF_LIGHT
    return (
        c / (cfg.N_a * cfg.d_r * cfg.f_c),  # sin(theta) spacing, ~ radians near broadside
        c / (2 * cfg.delta_f * cfg.N_d),
        c / (2 * cfg.T * cfg.f_c * cfg.N_v),
    )


def rmse(
    estimates: EstimationResult | tuple,
    truth: TargetScene,
    scales: tuple[float, float, float] = (1.0, 1.0, 1.0),
    miss_penalty: float = 1.0,
) -> RmseResult:
    """Per-parameter RMSE after a minimum-distance one-to-one assignment.

    Distances are measured after dividing each parameter by ``scales``.
    Truth targets left unassigned count as misses; their penalty is reported
    separately and never enters the RMSE values.
    """
    if truth.Q == 0:
        raise ValueError("truth scene is empty")
    est = estimates.as_arrays() if isinstance(estimates, EstimationResult) else tuple(map(np.atleast_1d, estimates))
    n_est = est[0].size
    if n_est == 0:
        return RmseResult(np.nan, np.nan, np.nan, 0, truth.Q, truth.Q * miss_penalty)
    E = np.stack(est, axis=1) / np.asarray(scales)
    T = np.stack([truth.theta, truth.d, truth.v], axis=1) / np.asarray(scales)
    cost = np.sum((E[:, None, :] - T[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    err = (np.stack(est, axis=1)[rows] - np.stack([truth.theta, truth.d, truth.v], axis=1)[cols])
    values = np.sqrt(np.mean(err ** 2, axis=0))
    misses = truth.Q - rows.size
    return RmseResult(float(values[0]), float(values[1]), float(values[2]), int(rows.size), misses, misses * miss_penalty)

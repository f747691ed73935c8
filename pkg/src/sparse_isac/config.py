"""System constants, unit handling and closed-form physical primitives.

Everything downstream (waveform synthesis, estimation, beamforming) reads
its scalars from a :class:`SystemConfig`.  Values are stored in linear SI
units; dB quantities are converted exactly once, when a config is built or
loaded.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def watt_to_dbm(value_w: float) -> float:
    return 10.0 * math.log10(value_w) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """All scalar system settings, in linear SI units (angles in radians)."""

    # OFDM numerology
    f_c: float = 28e9
    delta_f: float = 120e3
    N_s: int = 256
    T_cp: float = 0.59e-6
    L: int = 128
    # arrays
    N_t: int = 24
    N_r: int = 24
    d_t: float = 0.5 * SPEED_OF_LIGHT / 28e9
    d_r: float = 0.5 * SPEED_OF_LIGHT / 28e9
    # propagation and noise
    d_ref: float = 1.0
    c_ref: float = 1e-3
    alpha: float = 2.6
    sigma_beta_sq: float = 1.0
    sigma_c_sq: float = 1e-9
    sigma_s_sq: float = 1e-9
    qam_order: int = 16
    # DFT sizes (0 means "same as N_r / N_s / L")
    N_a: int = 0
    N_d: int = 0
    N_v: int = 0
    # beamforming problem
    P_0: float = 10.0
    Gamma_0: float = db_to_linear(-5.0)
    theta_a: float = math.radians(-10.0)
    theta_b: float = math.radians(10.0)
    d_0: float = 75.0
    G: int = 10
    K: int = 5
    N_sel: int = 64
    rho_1: float = 500.0
    rho_2: float = 500.0
    rho_3: float = 50.0
    # scenario generation
    n_paths: int = 5
    n_targets: int = 1
    v_max: float = 20.0
    seed: int = 0
    T_d: float = field(init=False)
    T: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "T_d", 1.0 / self.delta_f)
        object.__setattr__(self, "T", self.T_d + self.T_cp)
        if self.N_a == 0:
            object.__setattr__(self, "N_a", self.N_r)
        if self.N_d == 0:
            object.__setattr__(self, "N_d", self.N_s)
        if self.N_v == 0:
            object.__setattr__(self, "N_v", self.L)
        self.validate()

    def validate(self) -> None:
        """Check every structural invariant; raise :class:`ConfigError` on failure."""
        for name in ("N_s", "L", "N_t", "N_r", "G", "K"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("f_c", "delta_f", "d_t", "d_r", "d_ref", "c_ref", "alpha",
                     "sigma_beta_sq", "sigma_c_sq", "sigma_s_sq", "P_0", "d_0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value}")
        if self.T_cp < 0:
            raise ConfigError("T_cp must be non-negative")
        if self.N_a < self.N_r:
            raise ConfigError(f"N_a={self.N_a} must be >= N_r={self.N_r}")
        if self.N_d < self.N_s:
            raise ConfigError(f"N_d={self.N_d} must be >= N_s={self.N_s}")
        if self.N_v < self.L:
            raise ConfigError(f"N_v={self.N_v} must be >= L={self.L}")
        if not 1 <= self.K <= self.N_t:
            raise ConfigError(f"need 1 <= K <= N_t, got K={self.K}, N_t={self.N_t}")
        if not 0 < self.N_sel <= self.N_s:
            raise ConfigError(f"need 0 < N_sel <= N_s, got N_sel={self.N_sel}")
        if min(self.rho_1, self.rho_2, self.rho_3) <= 0:
            raise ConfigError("penalty parameters rho_1, rho_2, rho_3 must be > 0")
        if self.Gamma_0 < 0:
            raise ConfigError("Gamma_0 must be non-negative (linear)")
        if self.theta_b <= self.theta_a:
            raise ConfigError("theta_b must exceed theta_a")
        if self.G < 2:
            raise ConfigError("G must be >= 2")
        if self.d_0 < self.d_ref:
            raise ConfigError("d_0 must be >= d_ref")
        if self.n_paths < 0 or self.n_targets < 0 or self.v_max < 0:
            raise ConfigError("n_paths, n_targets, v_max must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        k = round(math.sqrt(self.qam_order))
        if self.qam_order < 4 or k * k != self.qam_order or k & (k - 1):
            raise ConfigError(f"unsupported QAM order {self.qam_order}")

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    def to_dict(self) -> dict[str, Any]:
        """Plain dict of init fields (linear units), used for hashing and manifests."""
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TargetScene:
    """Point targets: angle (rad), range (m), radial velocity (m/s), reflection coefficient."""

    theta: np.ndarray
    d: np.ndarray
    v: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        arrays = [np.atleast_1d(np.asarray(a)) for a in (self.theta, self.d, self.v)]
        beta = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        for name, arr in zip(("theta", "d", "v"), arrays):
            object.__setattr__(self, name, arr.astype(float))
        object.__setattr__(self, "beta", beta)
        sizes = {a.size for a in (*arrays, beta)}
        if len(sizes) != 1:
            raise ValueError("scene arrays must share one length")
        if np.any(self.d <= 0):
            raise ValueError("target ranges must be positive")

    @property
    def Q(self) -> int:
        return int(self.theta.size)

    @classmethod
    def empty(cls) -> "TargetScene":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, complex))


def steering_vector(omega: float, n: int) -> np.ndarray:
    """Uniform linear array response ``[exp(j*m*omega)]`` for ``m = 0..n-1``."""
    if n < 1:
        raise ValueError(f"steering vector needs n >= 1, got {n}")
    return np.exp(1j * omega * np.arange(n))


def steering_matrix(omegas: np.ndarray, n: int) -> np.ndarray:
    """Columns are steering vectors for each entry of ``omegas`` (shape ``n x len``)."""
    if n < 1:
        raise ValueError(f"steering vector needs n >= 1, got {n}")
    return np.exp(1j * np.outer(np.arange(n), np.atleast_1d(omegas)))


def path_loss(d, cfg: SystemConfig):
    """Distance-dependent power gain ``c_ref * (d / d_ref) ** -alpha``."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise ValueError("path loss is undefined for non-positive distance")
    out = cfg.c_ref * (d_arr / cfg.d_ref) ** (-cfg.alpha)
    return float(out) if out.ndim == 0 else out


def digital_frequencies(theta, d, v, cfg: SystemConfig):
    """Return ``(omega_t, omega_r, omega_d, omega_v)`` for angle, range and velocity.

    Works elementwise on arrays.
    """
    c = SPEED_OF_LIGHT
    s = np.sin(theta)
    omega_t = 2 * np.pi * cfg.d_t * s * cfg.f_c / c
    omega_r = -2 * np.pi * cfg.d_r * s * cfg.f_c / c
    omega_d = -2 * np.pi * cfg.delta_f * 2 * np.asarray(d) / c
    omega_v = 4 * np.pi * cfg.T * np.asarray(v) * cfg.f_c / c
    return omega_t, omega_r, omega_d, omega_v


def omega_t(theta, cfg: SystemConfig):
    return 2 * np.pi * cfg.d_t * np.sin(theta) * cfg.f_c / SPEED_OF_LIGHT


def sensing_grid(cfg: SystemConfig) -> np.ndarray:
    """Angles ``theta_g = theta_a + (g-1)(theta_b-theta_a)/(G-1)``, g = 1..G."""
    return cfg.theta_a + np.arange(cfg.G) * (cfg.theta_b - cfg.theta_a) / (cfg.G - 1)


def unambiguous_range(cfg: SystemConfig) -> float:
    return SPEED_OF_LIGHT / (2 * cfg.delta_f)


def unambiguous_velocity(cfg: SystemConfig) -> float:
    """Largest |v| whose Doppler phase per slot stays within (-pi, pi)."""
    return SPEED_OF_LIGHT / (4 * cfg.T * cfg.f_c)


# --------------------------------------------------------------------------
# profiles and config files

# "reference" keeps the full-size defaults; "desk" shrinks arrays and subcarriers so sweeps run in minutes
REFERENCE_PROFILE: dict[str, Any] = {}

DESK_PROFILE: dict[str, Any] = {
    "N_t": 8, "N_r": 8, "K": 2, "N_s": 16, "L": 16, "G": 4, "N_sel": 4,
    "rho_1": 50.0, "rho_2": 50.0, "rho_3": 5.0,
}

PROFILES = {"reference": REFERENCE_PROFILE, "desk": DESK_PROFILE}


def profile_config(name: str = "desk", **overrides: Any) -> SystemConfig:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return SystemConfig(**{**base, **overrides})


# file key -> (field name, converter to linear SI)
_identity = float
_SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "ofdm": {
        "f_c_hz": ("f_c", float),
        "delta_f_hz": ("delta_f", float),
        "num_subcarriers": ("N_s", int),
        "t_cp_s": ("T_cp", float),
        "num_symbols": ("L", int),
        "qam_order": ("qam_order", int),
    },
    "array": {
        "num_tx": ("N_t", int),
        "num_rx": ("N_r", int),
        "d_t_wavelengths": ("d_t", "wavelengths"),
        "d_r_wavelengths": ("d_r", "wavelengths"),
        "d_t_m": ("d_t", float),
        "d_r_m": ("d_r", float),
    },
    "propagation": {
        "d_ref_m": ("d_ref", float),
        "c_ref_db": ("c_ref", db_to_linear),
        "alpha": ("alpha", float),
        "sigma_beta_sq_db": ("sigma_beta_sq", db_to_linear),
        "sigma_c_sq_dbm": ("sigma_c_sq", dbm_to_watt),
        "sigma_s_sq_dbm": ("sigma_s_sq", dbm_to_watt),
        "num_paths": ("n_paths", int),
    },
    "processing": {
        "n_a": ("N_a", int),
        "n_d": ("N_d", int),
        "n_v": ("N_v", int),
    },
    "sensing": {
        "theta_a_deg": ("theta_a", math.radians),
        "theta_b_deg": ("theta_b", math.radians),
        "d_0_m": ("d_0", float),
        "grid_size": ("G", int),
        "num_selected": ("N_sel", int),
        "gamma_0_db": ("Gamma_0", db_to_linear),
    },
    "beamforming": {
        "num_users": ("K", int),
        "p_0_w": ("P_0", float),
        "rho_1": ("rho_1", float),
        "rho_2": ("rho_2", float),
        "rho_3": ("rho_3", float),
    },
    "scenario": {
        "num_targets": ("n_targets", int),
        "v_max_mps": ("v_max", float),
        "seed": ("seed", int),
    },
}


def parse_config(data: Mapping[str, Any], base: SystemConfig | None = None) -> SystemConfig:
    """Build a config from nested ``section -> key -> value`` data.

    Keys carry their unit in the suffix; unknown sections or keys are errors.
    Missing keys inherit from ``base`` (desk profile when omitted).
    """
    if base is None:
        base = profile_config("desk")
    data = dict(data or {})
    profile = data.pop("profile", None)
    if profile is not None:
        base = profile_config(profile)
    changes: dict[str, Any] = {}
    wavelength_keys: dict[str, float] = {}
    for section, entries in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(entries, Mapping):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, raw in entries.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            name, conv = _SCHEMA[section][key]
            if conv == "wavelengths":
                wavelength_keys[name] = float(raw)
                continue
            try:
                value = conv(float(raw)) if conv is not int else int(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
            if conv is int and float(raw) != int(raw):
                raise ConfigError(f"{section}.{key} must be an integer")
            changes[name] = value
    f_c = changes.get("f_c", base.f_c)
    for name, frac in wavelength_keys.items():
        changes[name] = frac * SPEED_OF_LIGHT / f_c
    try:
        return base.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ConfigError("config file must contain a mapping at top level")
    return parse_config(data, base)


def config_to_document(cfg: SystemConfig) -> dict[str, Any]:
    """Inverse of :func:`parse_config`: nested data with unit-suffixed keys."""
    return {
        "ofdm": {
            "f_c_hz": cfg.f_c, "delta_f_hz": cfg.delta_f, "num_subcarriers": cfg.N_s,
            "t_cp_s": cfg.T_cp, "num_symbols": cfg.L, "qam_order": cfg.qam_order,
        },
        "array": {"num_tx": cfg.N_t, "num_rx": cfg.N_r, "d_t_m": cfg.d_t, "d_r_m": cfg.d_r},
        "propagation": {
            "d_ref_m": cfg.d_ref, "c_ref_db": linear_to_db(cfg.c_ref), "alpha": cfg.alpha,
            "sigma_beta_sq_db": linear_to_db(cfg.sigma_beta_sq),
            "sigma_c_sq_dbm": watt_to_dbm(cfg.sigma_c_sq),
            "sigma_s_sq_dbm": watt_to_dbm(cfg.sigma_s_sq), "num_paths": cfg.n_paths,
        },
        "processing": {"n_a": cfg.N_a, "n_d": cfg.N_d, "n_v": cfg.N_v},
        "sensing": {
            "theta_a_deg": math.degrees(cfg.theta_a), "theta_b_deg": math.degrees(cfg.theta_b),
            "d_0_m": cfg.d_0, "grid_size": cfg.G, "num_selected": cfg.N_sel,
            "gamma_0_db": linear_to_db(cfg.Gamma_0) if cfg.Gamma_0 > 0 else -math.inf,
        },
        "beamforming": {
            "num_users": cfg.K, "p_0_w": cfg.P_0,
            "rho_1": cfg.rho_1, "rho_2": cfg.rho_2, "rho_3": cfg.rho_3,
        },
        "scenario": {"num_targets": cfg.n_targets, "v_max_mps": cfg.v_max, "seed": cfg.seed},
    }


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_document(cfg), fh, sort_keys=False)

"""Simulation and optimization toolkit for MIMO-OFDM integrated sensing and communication.

Modules:

* :mod:`.config` - system constants, unit conversion, steering vectors, path loss
* :mod:`.waveform` - symbols, precoding, channels, echo synthesis, sum-rate
* :mod:`.sensing` - DFT-based angle/range/velocity estimation and scoring
* :mod:`.sparse` - subcarrier selection and basis-pursuit delay recovery
* :mod:`.beamforming` - sum-rate beamforming under a sensing-SNR constraint
* :mod:`.harness` - seeded trials and parameter sweeps
"""

from .config import SystemConfig, TargetScene, load_config, profile_config

__all__ = ["SystemConfig", "TargetScene", "load_config", "profile_config"]
__version__ = "0.1.0"

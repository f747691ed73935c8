"""Binary tensor container with a small JSON header, used for fixtures.

A container is an ``.npz`` archive holding named arrays plus a ``header``
entry: a JSON document with the shape and dtype of every array, the seed
that produced them and a hash of the generating configuration.
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any

import numpy as np

from .config import SystemConfig
from .sensing import ProcessedCube
from .waveform import ChannelSet

FORMAT = "sparse-isac-tensor/1"


def save_tensors(path: str | Path, arrays: dict[str, np.ndarray], seed: int | None = None,
                 cfg: SystemConfig | None = None, **extra: Any) -> None:
    header = {
        "format": FORMAT,
        "seed": seed,
        "config_hash": cfg.digest() if cfg is not None else None,
        "arrays": {k: {"shape": list(np.shape(v)), "dtype": str(np.asarray(v).dtype)} for k, v in arrays.items()},
        **extra,
    }
    if "header" in arrays:
        raise ValueError("'header' is a reserved name")
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != FORMAT:
            raise ValueError(f"unrecognized tensor container format {header.get('format')!r}")
        arrays = {k: data[k] for k in header["arrays"]}
    for name, meta in header["arrays"].items():
        if list(arrays[name].shape) != meta["shape"] or str(arrays[name].dtype) != meta["dtype"]:
            raise ValueError(f"array {name!r} does not match its header")
    return arrays, header


def save_echo(path, cube: np.ndarray, seed: int | None, cfg: SystemConfig) -> None:
    save_tensors(path, {"echo": cube}, seed, cfg, kind="echo")


def load_echo(path) -> tuple[np.ndarray, dict[str, Any]]:
    arrays, header = load_tensors(path)
    return arrays["echo"], header


def save_channel(path, channel: ChannelSet, seed: int | None, cfg: SystemConfig) -> None:
    arrays = {f.name: np.asarray(getattr(channel, f.name)) for f in fields(channel)}
    save_tensors(path, arrays, seed, cfg, kind="channel")


def load_channel(path) -> tuple[ChannelSet, dict[str, Any]]:
    arrays, header = load_tensors(path)
    arrays["redraws"] = int(arrays["redraws"])
    return ChannelSet(**arrays), header


def save_processed(path, cube: ProcessedCube, seed: int | None, cfg: SystemConfig) -> None:
    arrays = {"data": cube.data, "offsets": np.asarray(cube.offsets)}
    if cube.flags is not None:
        arrays["flags"] = cube.flags
    save_tensors(path, arrays, seed, cfg, kind="processed")


def load_processed(path) -> tuple[ProcessedCube, dict[str, Any]]:
    arrays, header = load_tensors(path)
    cube = ProcessedCube(arrays["data"], tuple(int(o) for o in arrays["offsets"]), arrays.get("flags"))
    return cube, header

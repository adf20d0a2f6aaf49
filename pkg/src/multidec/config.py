"""TOML configuration files for ``multidec simulate``.

Keys are the :class:`~multidec.harness.SimConfig` fields, either at the top
level or inside a ``[simulate]`` table::

    channel = "awgn_bpsk"
    grid = [5.5]
    scheme = "mbm"
    ell = 2
    rate = 11
    codebook = "algorithm_b"
    tau = 1000
"""
from __future__ import annotations

from typing import Any, Iterable

import tomli

from .harness import ConfigError, SimConfig


def load_toml(path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "simulate" in data:
        section = data["simulate"]
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: [simulate] must be a table")
        return dict(section)
    return data


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` with the value read as a TOML literal, falling back to a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key, value


def build_config(path=None, overrides: Iterable[str] = (), **extra) -> SimConfig:
    data = load_toml(path) if path else {}
    for item in overrides:
        k, v = parse_override(item)
        data[k] = v
    data.update({k: v for k, v in extra.items() if v is not None})
    return SimConfig.from_mapping(data)

#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
mixlayer – Solver-Konfiguration.

All numerical knobs live in one frozen dataclass. Values can come from the
defaults below, a simple key=value file (--config), the MIXLAYER_OUT
environment variable and finally explicit command-line flags.
"""

import logging
import math
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Optional

from mixlayer_types import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "MIXLAYER_OUT"


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by shooting, integration and output."""

    # left cutoff tau = -T (both table captions use T=7)
    T: float = 7.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    method: str = "DOP853"
    max_step: float = math.inf
    pole_threshold: float = 1e6
    target_tol: float = 1e-10
    sample_step: float = 0.01

    # series truncation orders
    lyapunov_order: int = 12
    sim_order: int = 12
    farfield_order: int = 8
    chi_order: int = 8
    theta_order: int = 8
    sim_tail_tol: float = 1e-3

    # far field: b*xi >= farfield_xi_min at the end of the profile
    farfield_xi_min: float = 40.0
    farfield_fit_order: int = 4
    tau_max: Optional[float] = None

    phase_delta: float = 1e-3
    local_radius_factor: float = 0.3

    workers: int = 1
    output_dir: str = "out"
    output_format: str = "csv"

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 0 < value <= 1e-2:
                raise ConfigError(f"{name} must lie in (0, 1e-2]")
        if self.pole_threshold < 1e3:
            raise ConfigError("pole_threshold must be at least 1e3")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output_format must be 'csv' or 'json'")
        if self.tau_max is not None and not self.tau_max > 0:
            raise ConfigError("tau_max must be positive")

    def with_overrides(self, **overrides: Any) -> "SolverConfig":
        """Copy with the non-None overrides applied."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return replace(self, **clean)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, raw: str, template: Any) -> Any:
    raw = raw.strip()
    if name == "tau_max":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if isinstance(template, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Parse key=value lines into typed overrides for SolverConfig."""
    defaults = SolverConfig()
    known = {f.name for f in fields(SolverConfig)}
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got '{line}'")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown config key '{key}'")
        try:
            values[key] = _coerce(key, raw, getattr(defaults, key))
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {e}") from e
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a key=value config file."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    values = parse_config_text(text, source=path)
    logger.debug("Loaded %d config value(s) from %s", len(values), path)
    return values


def build_config(config_path: Optional[str] = None, **cli_overrides: Any) -> SolverConfig:
    """
    Resolve the effective configuration.

    Precedence: defaults < config file < environment < explicit flags.
    """
    cfg = SolverConfig()
    if config_path:
        cfg = cfg.with_overrides(**load_config_file(config_path))
    env_out = os.environ.get(OUTPUT_ENV_VAR)
    if env_out:
        cfg = cfg.with_overrides(output_dir=env_out)
    return cfg.with_overrides(**cli_overrides)

"""Simulation configuration and its flat ``key = value`` file grammar.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Every key has a matching CLI flag (``tau_coh`` <-> ``--tau-coh``); values
from the command line override the file.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..alignment import feasible
from ..errors import ConfigError, InfeasibleError
from ..schemes import Scheme

__all__ = ["TopologySpec", "SimConfig", "parse_config_text", "load_config", "dump_config"]

_TOPO_RE = re.compile(r"^\s*(line|grid|random)\s*(?:\(\s*([^)]*)\))?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class TopologySpec:
    """``line``, ``grid(rows, cols)`` or ``random(n_tx)``."""

    kind: str
    rows: int | None = None
    cols: int | None = None
    n_tx: int | None = None

    @classmethod
    def parse(cls, text: str) -> "TopologySpec":
        m = _TOPO_RE.match(str(text))
        if not m:
            raise ConfigError(f"unknown topology {text!r}; use line, grid(r,c) or random(n_tx)")
        kind = m.group(1).lower()
        args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
        try:
            nums = [int(a) for a in args]
        except ValueError:
            raise ConfigError(f"topology arguments must be integers: {text!r}") from None
        if kind == "line":
            if nums:
                raise ConfigError("line topology takes no arguments")
            return cls("line")
        if kind == "grid":
            if len(nums) != 2:
                raise ConfigError("grid topology needs grid(rows, cols)")
            return cls("grid", rows=nums[0], cols=nums[1])
        if len(nums) != 1:
            raise ConfigError("random topology needs random(n_tx)")
        return cls("random", n_tx=nums[0])

    def __str__(self) -> str:
        if self.kind == "grid":
            return f"grid({self.rows},{self.cols})"
        if self.kind == "random":
            return f"random({self.n_tx})"
        return "line"


def _default_sweep() -> tuple[float, ...]:
    return tuple(float(p) for p in range(0, 31, 2))


@dataclass
class SimConfig:
    topology: TopologySpec = field(default_factory=lambda: TopologySpec("grid", 2, 2))
    K: int = 4
    N: int = 5
    d: int = 2
    gamma: float = 3.2
    tau_coh: int = 100
    p_noise_dbm: float = -95.0
    p_t_sweep: tuple[float, ...] = field(default_factory=_default_sweep)
    realizations: int = 100
    realization_offset: int = 0
    schemes: tuple[str, ...] = ("IA", "SU_MIMO", "TDMA")
    master_seed: int = 0
    cell_side: float = 5.0
    area_side: float | None = None
    reference_loss_db: float = 30.0
    workers: int = 1
    validation: bool = False
    validation_blocks: int = 200
    validation_realizations: int = 1
    validation_csi: str = "training"

    def __post_init__(self):
        if isinstance(self.topology, str):
            self.topology = TopologySpec.parse(self.topology)
        self.p_t_sweep = tuple(float(p) for p in self.p_t_sweep)
        self.schemes = tuple(sorted({Scheme(s).value for s in self.schemes}))
        self.validate()

    def validate(self) -> None:
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.realization_offset < 0:
            raise ConfigError("realization_offset must be >= 0")
        if not self.p_t_sweep:
            raise ConfigError("p_t_sweep must not be empty")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        if min(self.K, self.N, self.d) < 1:
            raise ConfigError("K, N and d must be positive")
        if self.d > self.N:
            raise ConfigError("d cannot exceed N")
        if self.tau_coh < 1:
            raise ConfigError("tau_coh must be >= 1")
        if not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if not self.cell_side > 0:
            raise ConfigError("cell_side must be > 0")
        if self.area_side is not None and not self.area_side > 0:
            raise ConfigError("area_side must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.validation_blocks < 1 or self.validation_realizations < 1:
            raise ConfigError("validation needs at least one block and one realization")
        if self.validation_csi not in ("training", "perfect"):
            raise ConfigError("validation_csi must be 'training' or 'perfect'")
        topo = self.topology
        if topo.kind == "grid" and topo.rows * topo.cols != self.K:
            raise ConfigError(f"grid({topo.rows},{topo.cols}) holds {topo.rows * topo.cols} pairs, K={self.K}")
        if topo.kind == "random" and topo.n_tx < self.K:
            raise ConfigError(f"random({topo.n_tx}) needs n_tx >= K={self.K}")
        if self.K < 2:
            raise ConfigError("the network needs K >= 2 pairs")
        if "IA" in self.schemes and not feasible(self.K, self.N, self.d):
            raise InfeasibleError(
                f"IA infeasible for K={self.K}, N={self.N}, d={self.d}: 2N < d(K+1)"
            )

    @property
    def side(self) -> float:
        """Side of the random-deployment square (same area as the grid of cells)."""
        if self.area_side is not None:
            return self.area_side
        return self.cell_side * float(np.sqrt(self.K))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f for f in fields(SimConfig)}
_ALIASES = {"seed": "master_seed"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_sweep(text: str) -> tuple[float, ...]:
    t = text.strip()
    if ":" in t:
        parts = [float(p) for p in t.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"sweep range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(max(n, 0)))
    return tuple(float(p) for p in t.replace(";", ",").split(",") if p.strip())


def parse_value(key: str, text: str):
    """Convert the textual value of ``key`` to its field type."""
    key = _ALIASES.get(key, key)
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    text = str(text).strip()
    try:
        if key == "topology":
            return TopologySpec.parse(text)
        if key == "p_t_sweep":
            return _parse_sweep(text)
        if key == "schemes":
            return tuple(s.strip().upper().replace("-", "_") for s in text.split(",") if s.strip())
        if key == "validation":
            return _parse_bool(text)
        if key == "validation_csi":
            return text.lower()
        if key == "area_side":
            return None if text.lower() in ("", "none", "auto") else float(text)
        if key in ("gamma", "p_noise_dbm", "cell_side", "reference_loss_db"):
            return float(text)
        return int(text)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def parse_config_text(text: str) -> dict:
    """Parse the ``key = value`` grammar into typed field values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        values[key] = parse_value(key, val)
    return values


def load_config(path=None, overrides: dict | None = None) -> SimConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    values.update(overrides or {})
    try:
        return SimConfig(**values)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    if value is None:
        return "auto"
    return str(value)


# execution settings that cannot change any number in the output
_RUNTIME_ONLY = frozenset({"workers"})


def dump_config(cfg: SimConfig, include_runtime: bool = False) -> str:
    """Round-trippable ``key = value`` text, one line per field in field order.

    ``workers`` is left out by default so serial and parallel runs of the
    same configuration produce identical metadata.
    """
    return "".join(
        f"{f.name} = {_format(getattr(cfg, f.name))}\n"
        for f in fields(SimConfig)
        if include_runtime or f.name not in _RUNTIME_ONLY
    )

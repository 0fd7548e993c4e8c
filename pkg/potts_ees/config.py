"""
實驗設定：ExperimentConfig 與環境變數輔助函式。

設定來源（後者覆蓋前者）：
    1. 程式內預設值
    2. --config 指定的 TOML 檔（最上層鍵值，或 [<subcommand>] 區段；區段優先）
    3. .env 或系統環境變數（POTTS_EES_THREADS、POTTS_EES_OUT、POTTS_EES_SEED）
    4. 命令列參數

TOML 範例：
    n_values = [24, 48, 96]
    betas = [2.9]
    seeds = [1, 2, 3]

    [escape]
    max_sweeps = 500000
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import toml

from .errors import ConfigError
from .kernels import JUMP_RULES

RECORD_CHOICES = ("m0", "live", "both")
CENTER_CHOICES = ("a0", "a1")


# --- Env helpers -------------------------------------------------------------
def _env_value(name: str, default: Optional[str] = None) -> Optional[str]:
    """Get an env var and trim surrounding quotes/whitespace; return default if missing."""
    v = os.getenv(name)
    if v is None:
        return default
    v = v.strip().strip('"').strip("'")
    return v if v != "" else default


def _env_bool(name: str, default: bool = False) -> bool:
    v = _env_value(name)
    if v is None:
        return default
    return v.lower() in {"1", "true", "yes", "on", "y", "t"}


@dataclass
class ExperimentConfig:
    n_values: List[int] = field(default_factory=lambda: [24, 48, 96])
    q: int = 3
    betas: List[float] = field(default_factory=lambda: [2.0, 2.9])
    d: float = 1.0
    epsilon: float = 0.30
    delta: float = 0.15
    sweeps: int = 10_000
    stride: int = 10
    seeds: List[int] = field(default_factory=lambda: list(range(20)))
    seed: int = 0
    max_sweeps: int = 200_000
    record: str = "m0"
    jump_rule: str = "tempered"
    center: str = "a0"
    grid: int = 200
    dense_limit: int = 5000
    out: Path = Path("results")
    threads: int = 1

    def __post_init__(self) -> None:
        self.out = Path(self.out)

    def validate(self) -> "ExperimentConfig":
        if not self.n_values or not self.betas or not self.seeds:
            raise ConfigError("n_values, betas and seeds must be nonempty")
        if any(int(n) != n or n < 1 for n in self.n_values):
            raise ConfigError(f"n_values must be positive integers, got {self.n_values}")
        if any(b < 0 for b in self.betas):
            raise ConfigError(f"betas must be >= 0, got {self.betas}")
        if self.q < 2:
            raise ConfigError(f"q must be >= 2, got {self.q}")
        if not self.epsilon > self.delta > 0:
            raise ConfigError(f"need epsilon > delta > 0, got epsilon={self.epsilon}, delta={self.delta}")
        if self.d <= 0:
            raise ConfigError(f"d must be positive, got {self.d}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        if self.sweeps < 1 or self.stride < 1 or self.max_sweeps < 1:
            raise ConfigError("sweeps, stride and max_sweeps must be >= 1")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.grid < 1 or self.dense_limit < 1:
            raise ConfigError("grid and dense_limit must be >= 1")
        if self.record not in RECORD_CHOICES:
            raise ConfigError(f"record must be one of {RECORD_CHOICES}, got {self.record!r}")
        if self.jump_rule not in JUMP_RULES:
            raise ConfigError(f"jump_rule must be one of {JUMP_RULES}, got {self.jump_rule!r}")
        if self.center not in CENTER_CHOICES:
            raise ConfigError(f"center must be one of {CENTER_CHOICES}, got {self.center!r}")
        return self

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], section: Optional[str] = None) -> "ExperimentConfig":
        """Build from a mapping; keys of the `section` table override top-level keys."""
        known = {f.name for f in dataclasses.fields(cls)}
        values: Dict[str, Any] = {k: v for k, v in d.items() if not isinstance(v, Mapping)}
        if section and isinstance(d.get(section), Mapping):
            values.update(d[section])
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, fname: Path, section: Optional[str] = None) -> "ExperimentConfig":
        try:
            data = toml.load(fname)
        except (OSError, toml.TomlDecodeError) as exc:
            raise ConfigError(f"cannot read config {fname}: {exc}") from exc
        return cls.from_dict(data, section)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with every non-None override applied."""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out["out"] = str(self.out)
        return out

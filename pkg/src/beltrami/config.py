"""Experiment configuration: ``key=value`` files, command-line overrides and a-set syntax."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .structure import parse_complex, split_params

__all__ = ["ExperimentConfig", "load_config_file", "parse_a_set", "parse_complex_list", "parse_bool"]


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


def parse_complex_list(text: str) -> list[complex]:
    """``"1, 2+i; -0.5j"`` (commas or semicolons) as complex numbers."""
    items = [s for s in re.split(r"[;,]", text.strip().strip("[]")) if s.strip()]
    if not items:
        raise ConfigError(f"empty list {text!r}")
    return [parse_complex(s) for s in items]


def _interval(text: str):
    vals = [float(v) for v in text.strip().strip("[]").split(",")]
    if len(vals) != 2:
        raise ConfigError(f"expected [lo,hi], got {text!r}")
    return vals


def parse_a_set(text: str) -> list[complex]:
    """Parameter sets: ``circle:r=1,n=16[,c=0]``, ``grid:re=[-2,2],im=[-2,2],n=9`` or a list."""
    kind, sep, rest = text.strip().partition(":")
    kind = kind.lower()
    if sep and kind in ("circle", "grid"):
        p = split_params(rest)
        try:
            if kind == "circle":
                r = float(p.pop("r", "1"))
                n = int(p.pop("n", "16"))
                c = parse_complex(p.pop("c", "0"))
                pts = list(c + r * np.exp(2j * np.pi * np.arange(n) / n))
            else:
                re_lo, re_hi = _interval(p.pop("re", "[-1,1]"))
                im_lo, im_hi = _interval(p.pop("im", "[-1,1]"))
                n = int(p.pop("n", "5"))
                xs = np.linspace(re_lo, re_hi, n)
                ys = np.linspace(im_lo, im_hi, n)
                pts = [complex(x, y) for y in ys for x in xs]
        except ValueError as exc:
            raise ConfigError(f"bad a-set {text!r}: {exc}") from exc
        if p:
            raise ConfigError(f"{text!r}: unknown parameters {sorted(p)}")
        if n < 1:
            raise ConfigError(f"{text!r}: n must be positive")
        return [complex(x) for x in pts]
    return parse_complex_list(text)


@dataclass
class ExperimentConfig:
    """Every setting of a run.  The resolved instance is echoed next to its outputs."""

    H: str = "zero"
    n: int = 128
    L: float = 4.0
    rho: float = 2.0
    tol: float = 1e-12
    newton_tol: float = 1e-10
    max_iter: int = 1000
    threads: int = 1
    deterministic: bool = False
    seed: int = 0
    out: str = ""
    w: str = "1"
    a: str = "1"
    e: str = "1,i"
    t: float = 0.0
    z: str = ""
    w_probes: str = ""
    chart_n: int = 32
    full: bool = False
    heatmap: int = 0

    _CONVERTERS = {int: int, float: float, bool: parse_bool, str: str}

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def set(self, key: str, value, where: str = "") -> None:
        key = key.strip().replace("-", "_")
        if key not in self.field_names():
            raise ConfigError(f"{where}unknown key {key!r}")
        ftype = type(getattr(type(self)(), key))
        try:
            setattr(self, key, value if isinstance(value, ftype) else self._CONVERTERS[ftype](value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}bad value for {key!r}: {value!r}") from exc

    def effective_threads(self) -> int:
        return 1 if self.deterministic else max(1, self.threads)

    def as_dict(self):
        return dataclasses.asdict(self)

    def echo(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(self.as_dict().items()))

    def write_echo(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        p = d / "config.txt"
        p.write_text(self.echo())
        return p


def load_config_file(path, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` comments, blank lines ignored) into ``cfg``."""
    cfg = cfg or ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        cfg.set(k, v.strip(), where=f"{path}:{lineno}: ")
    return cfg

"""Flat key-value run configuration shared by ``verify`` and ``bench``.

One ``key = value`` per line; ``#`` starts a comment. Recognised keys::

    L, d, heads          sequence length, head dimension, head count
    mu                   one value (shared by every head), a comma list
                         (one per head) or ``auto:<L_extra>``
    tau                  one value or a comma list
    n_copies, causal, width (f32|f64), seed, trials
    tol_equivalence, tol_attention, tol_stacking, tol_grid,
    tol_grad_fd, tol_grad_paths, alibi_tight_factor
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .encoding import HypeHeadParams, recommend_mu_schedule


class ConfigError(ValueError):
    """The configuration file or an override is malformed."""


DEFAULT_TOLERANCES = {
    "f64": {"tol_equivalence": 1e-12, "tol_attention": 1e-12},
    "f32": {"tol_equivalence": 1e-4, "tol_attention": 1e-3},
}

MAX_BENCH_L = {"f32": 8192, "f64": 4096}


@dataclass
class RunConfig:
    L: int = 128
    d: int = 16
    heads: int = 4
    mu: str = "auto:1024"
    tau: str = "1"
    n_copies: int = 1
    causal: bool = False
    width: str = "f64"
    seed: int = 0
    trials: int = 5
    tol_equivalence: float | None = None
    tol_attention: float | None = None
    tol_stacking: float = 1e-12
    tol_grid: float = 1e-12
    tol_grad_fd: float = 1e-5
    tol_grad_paths: float = 1e-10
    alibi_tight_factor: float = 1.01
    head_params: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.width not in ("f32", "f64"):
            raise ConfigError(f"width must be f32 or f64, got {self.width!r}")
        for key in ("L", "d", "heads", "n_copies", "trials"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        for key, value in DEFAULT_TOLERANCES[self.width].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        self.head_params = self._parse_heads()

    def _parse_heads(self):
        mu = str(self.mu).strip()
        if mu.startswith("auto:"):
            try:
                L_extra = int(mu[5:])
            except ValueError:
                raise ConfigError(f"bad mu schedule {mu!r}; expected auto:<L_extra>") from None
            if L_extra < 1:
                raise ConfigError("auto:<L_extra> needs L_extra >= 1")
            mus = [p.mu for p in recommend_mu_schedule(self.heads, L_extra)]
        else:
            mus = _float_list(mu, "mu", self.heads)
        taus = _float_list(str(self.tau), "tau", self.heads)
        return [HypeHeadParams(m, t) for m, t in zip(mus, taus)]

    @property
    def shared_mask(self) -> bool:
        return len(set(self.head_params)) == 1

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["head_params"] = [{"mu": p.mu, "tau": p.tau} for p in self.head_params]
        return out


def _float_list(text, key, n_heads):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{key} must be a number or comma list, got {text!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{key} values must be finite")
    if len(values) == 1:
        return values * n_heads
    if len(values) != n_heads:
        raise ConfigError(f"{key} lists {len(values)} values for {n_heads} heads")
    return values


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "head_params"}


def _coerce(key, raw):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return lowered in ("true", "1", "yes")
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str, **overrides) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> RunConfig:
    if path is None:
        return parse_config("", **overrides)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)

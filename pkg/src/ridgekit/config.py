"""Pipeline tunables with a canonical key=value serialization."""
from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, fields

from .exceptions import ConfigError


@dataclass(frozen=True)
class Config:
    # imgio / ridgefield
    target_mean: float = 0.5
    target_var: float = 0.01
    b: int = 16
    g_thresh: float = 0.05
    smooth_window: int = 3
    S: int = 4
    trim: int = 1
    f_min: float = 1.0 / 25.0
    f_max: float = 1.0 / 3.0
    # enhance
    ridge_polarity: str = "dark"
    K_theta: int = 16
    sigma_x: float = 4.0
    sigma_y: float = 4.0
    h: int = 11
    passes: int = 1
    # minutiae
    kappa_max: float = math.pi / 6
    W: int = 17
    d_min: float = 8.0
    border: float = 8.0
    trace_len: int = 10
    # encode / match
    n: int = 9
    rho_tol: float = 8.0
    theta_tol: float = 0.2618
    phi_tol: float = 0.2618
    t: int = 5
    mode: str = "normalized"
    rule: str = "at_least"

    def __post_init__(self):
        checks = [
            (self.target_var > 0, "target_var must be > 0"),
            (self.b >= 4, "b must be >= 4"),
            (self.g_thresh >= 0, "g_thresh must be >= 0"),
            (self.smooth_window >= 1 and self.smooth_window % 2 == 1, "smooth_window must be odd"),
            (self.S >= 3 and 2 * self.trim < self.S and self.trim >= 0, "need S >= 3, 0 <= 2*trim < S"),
            (0 < self.f_min < self.f_max < 0.5, "need 0 < f_min < f_max < 0.5"),
            (self.ridge_polarity in ("dark", "bright"), "ridge_polarity must be dark|bright"),
            (self.K_theta >= 4, "K_theta must be >= 4"),
            (self.sigma_x > 0 and self.sigma_y > 0, "sigmas must be > 0"),
            (self.h >= 1, "h must be >= 1"),
            (self.passes >= 1, "passes must be >= 1"),
            (0 < self.kappa_max <= math.pi / 2, "kappa_max must be in (0, pi/2]"),
            (self.W >= 3 and self.W % 2 == 1, "W must be odd and >= 3"),
            (self.d_min >= 0 and self.border >= 0, "d_min and border must be >= 0"),
            (self.trace_len >= 1, "trace_len must be >= 1"),
            (self.n >= 1, "n must be >= 1"),
            (self.rho_tol > 0, "rho_tol must be > 0"),
            (0 < self.theta_tol < math.pi and 0 < self.phi_tol < math.pi, "angle tolerances must be in (0, pi)"),
            (self.t >= 1, "t must be >= 1"),
            (self.mode in ("normalized", "literal"), "mode must be normalized|literal"),
            (self.rule in ("at_least", "exact"), "rule must be at_least|exact"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def replace(self, **changes) -> Config:
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    def serialize(self) -> str:
        """Canonical text: sorted ``key=value`` lines, floats in repr form."""
        return "".join(f"{f.name}={getattr(self, f.name)!r}\n".replace("'", "") for f in sorted(fields(self), key=lambda f: f.name))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()[:16]

    @classmethod
    def parse(cls, text: str) -> Config:
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep:
                raise ConfigError(f"line {lineno}: expected key=value")
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = coerce(key, raw)
        return cls(**values)

    @classmethod
    def load(cls, path: str | os.PathLike) -> Config:
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def coerce(key: str, raw: str):
    default = getattr(Config(), key)
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw

"""Flat ``key = value`` run configuration with typed validation.

Lines are ``section.name = value``; ``#`` starts a comment.  Every key has a
declared type and default, unknown keys are rejected, and the resolved
configuration can be written back in the same format for provenance.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .grid import ConfigurationError
from .mollify import PROFILES
from .solver import IC_KINDS, MODELS

ENV_VAR = "KHMLAB_CONFIG"


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# key -> (type, default, check, hint)
SCHEMA: dict[str, tuple] = {
    "grid.n": (int, 32, lambda n: n >= 8 and n % 2 == 0, "even integer >= 8"),
    "kernel.profile": (str, "bump", lambda s: s in PROFILES, f"one of {sorted(PROFILES)}"),
    "kernel.epsilon": (float, 0.5, _positive, "> 0"),
    "quad.directions": (int, 256, lambda n: n >= 2 and n % 2 == 0, "even integer >= 2"),
    "quad.kind": (str, "fibonacci", lambda s: s in ("fibonacci", "gauss", "octahedron", "icosahedron"), "fibonacci, gauss, octahedron or icosahedron"),
    "quad.radial_nodes": (int, 32, lambda n: n >= 2, "integer >= 2"),
    "quad.grading": (float, 2.0, lambda x: x >= 1.0, ">= 1"),
    "audit.directions": (int, 8, lambda n: n >= 2 and n % 2 == 0, "even integer >= 2 (Gauss product order)"),
    "solver.model": (str, "emhd", lambda s: s in MODELS, f"one of {list(MODELS)}"),
    "solver.d_i": (float, 1.0, _nonneg, ">= 0"),
    "solver.nu": (float, 0.0, _nonneg, ">= 0"),
    "solver.eta": (float, 0.0, _nonneg, ">= 0"),
    "solver.nu_h": (float, 0.0, _nonneg, ">= 0"),
    "solver.dt": (float, 1e-3, _positive, "> 0"),
    "solver.t_end": (float, 1.0, _positive, "> 0"),
    "solver.snapshot_interval": (float, 0.25, _positive, "> 0"),
    "solver.ledger_interval": (float, 0.01, _positive, "> 0"),
    "ic.kind": (str, "random_lowk", lambda s: s in IC_KINDS, f"one of {list(IC_KINDS)}"),
    "ic.seed": (int, 1, _nonneg, ">= 0"),
    "ic.kmax": (float, 3.0, _positive, "> 0"),
    "ic.amplitude": (float, 1.0, _positive, "> 0"),
    "scan.lambda_min": (float, 0.1, _positive, "> 0"),
    "scan.lambda_max": (float, 1.2, _positive, "> 0"),
    "scan.count": (int, 12, lambda n: n >= 2, "integer >= 2"),
    "scan.window_start": (float, 0.0, _nonneg, ">= 0"),
    "scan.window_end": (float, 1e300, _nonneg, ">= 0"),
    "scan.ratio_low": (float, 0.5, _positive, "> 0"),
    "scan.ratio_high": (float, 2.0, _positive, "> 0"),
    "scan.min_decades": (float, 0.5, _nonneg, ">= 0"),
    "scan.include_hl": (bool, True, lambda x: True, "true or false"),
    "identities.directions": (int, 512, lambda n: n >= 6 and n % 2 == 0, "even integer >= 6"),
    "identities.samples": (int, 10000, _positive, "> 0"),
    "identities.kmax": (float, 4.0, _positive, "> 0"),
    "identities.seed": (int, 0, _nonneg, ">= 0"),
    "output.dir": (str, "khmlab_out", lambda s: bool(s), "non-empty path"),
    "tolerances.constants": (float, 1e-8, _positive, "> 0"),
    "tolerances.projection": (float, 1e-6, _positive, "> 0"),
    "tolerances.lemma21": (float, 1e-12, _positive, "> 0"),
    "tolerances.lemma22": (float, 5e-3, _positive, "> 0"),
    "tolerances.hall_rewrites": (float, 1e-10, _positive, "> 0"),
    "tolerances.pressure": (float, 5e-3, _positive, "> 0"),
    "tolerances.audit": (float, 1e-2, _positive, "> 0"),
    "tolerances.energy_drift": (float, 1e-6, _positive, "> 0"),
    "tolerances.hall_drift": (float, 1e-5, _positive, "> 0"),
    "tolerances.route_agreement": (float, 0.2, _positive, "> 0"),
}


_TRUE, _FALSE = {"true", "yes", "on", "1"}, {"false", "no", "off", "0"}


def _boolean(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    word = str(raw).strip().lower()
    if word not in _TRUE | _FALSE:
        raise ValueError(word)
    return word in _TRUE


def _parse(key: str, raw) -> object:
    if key not in SCHEMA:
        raise ConfigurationError(f"unknown key {key!r}")
    typ, _, check, hint = SCHEMA[key]
    try:
        if typ is bool:
            val = _boolean(raw)
        elif typ is int:
            val = int(raw) if not isinstance(raw, str) else int(raw.strip())
        elif typ is float:
            val = float(raw)
        else:
            val = str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None
    if not check(val):
        raise ConfigurationError(f"{key}: value {val!r} must be {hint}")
    return val


@dataclass
class Config:
    values: dict = field(default_factory=lambda: {k: v[1] for k, v in SCHEMA.items()})

    def __getitem__(self, key: str):
        if key not in self.values:
            raise ConfigurationError(f"unknown key {key!r}")
        return self.values[key]

    def updated(self, pairs: dict) -> "Config":
        vals = dict(self.values)
        errors = []
        for k, v in pairs.items():
            try:
                vals[k] = _parse(k, v)
            except ConfigurationError as exc:
                errors.append(str(exc))
        if errors:
            raise ConfigurationError("; ".join(errors))
        cfg = Config(vals)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values
        if v["scan.lambda_min"] >= v["scan.lambda_max"]:
            raise ConfigurationError("scan.lambda_min must be below scan.lambda_max")
        if v["scan.ratio_low"] >= v["scan.ratio_high"]:
            raise ConfigurationError("scan.ratio_low must be below scan.ratio_high")
        if v["scan.window_start"] > v["scan.window_end"]:
            raise ConfigurationError("scan.window_start must not exceed scan.window_end")

    def dumps(self) -> str:
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def parse_text(text: str) -> dict:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in pairs:
            raise ConfigurationError(f"line {lineno}: duplicate key {k!r}")
        pairs[k] = v
    return pairs


def parse_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigurationError(f"--set expects key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def load_config(path: str | None = None, overrides: list[str] | tuple = ()) -> Config:
    """Defaults, then the file (``path``, or $KHMLAB_CONFIG), then overrides.

    ``path == "default"`` means built-in defaults only.
    """
    if path is None:
        path = os.environ.get(ENV_VAR) or "default"
    pairs = {}
    if path != "default":
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        pairs.update(parse_text(p.read_text()))
    pairs.update(dict(parse_assignment(s) for s in overrides))
    return Config().updated(pairs)

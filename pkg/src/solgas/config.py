"""Flat ``section.key = value`` run configuration.

Lines starting with ``#`` are comments. Complex values use the ``RE+IMi``
literal form; lists are comma separated. Every key is checked against the
schema of the command that reads it, so a typo fails loudly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .domains import DiskDomain, Domain, EllipseDomain, QuadratureDomain
from .errors import ConfigError, InvariantViolation
from .sampling import SamplerConfig
from .types import DensitySpec, EvaluationPoint, parse_complex


def _int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"{text!r} is not finite")
    return v


def _int_list(text: str) -> tuple:
    return tuple(_int(p) for p in text.split(",") if p.strip())


def _complex_list(text: str) -> tuple:
    return tuple(parse_complex(p) for p in text.split(",") if p.strip())


def _str(text: str) -> str:
    return text.strip()


_DOMAIN_KEYS = {
    "domain.kind": _str,
    "domain.center": parse_complex,
    "domain.radius": _float,
    "domain.d0": parse_complex,
    "domain.d1": parse_complex,
    "domain.rho": _float,
    "domain.m": _int,
    "domain.alpha1": _float,
    "domain.alpha2": _float,
}
_DENSITY_KEYS = {
    "density.p": _int,
    "density.coeffs": _complex_list,
    "density.expansion_center": parse_complex,
    "density.conj_center": parse_complex,
}
_SAMPLER_KEYS = {
    "sampler.mcmc_burn_in": _int,
    "sampler.mcmc_steps_per_sample": _int,
    "sampler.proposal_scale": _float,
}
_OUTPUT_KEYS = {"output.csv": _str, "output.json": _str}
_COMMON = {"run.seed": _int, "run.method": _str, **_DOMAIN_KEYS, **_DENSITY_KEYS, **_OUTPUT_KEYS}

SCHEMAS = {
    "shield": {**_COMMON, "run.ns": _int_list, "run.sampler": _str, "run.x_min": _float,
               "run.x_max": _float, "run.nx": _int, "run.threshold": _float},
    "drift": {**_COMMON, "run.ns": _int_list, "run.sampler": _str, "run.x_min": _float,
              "run.x_max": _float, "run.spacing": _float},
    "fluctuate": {**_COMMON, **_SAMPLER_KEYS, "run.ns": _int_list, "run.sampler": _str,
                  "run.trials": _int, "run.x": _float, "run.t": _float},
    "elliptic": {**_COMMON, "run.n": _int, "run.x_min": _float, "run.x_max": _float,
                 "run.spacing": _float, "run.decay_min": _float, "run.decay_max": _float},
}

DEFAULTS = {
    "shield": {"run.ns": (100, 200, 500), "run.sampler": "auto", "run.x_min": 0.0,
               "run.x_max": 3.0, "run.nx": 101, "run.threshold": 0.05},
    "drift": {"run.ns": (100, 200, 400, 800), "run.sampler": "auto", "run.x_min": -15.0,
              "run.x_max": 3.0, "run.spacing": 0.01},
    "fluctuate": {"run.ns": (50, 100, 200, 400), "run.sampler": "ginibre", "run.trials": 200,
                  "run.x": 0.0, "run.t": 0.0},
    "elliptic": {"domain.kind": "ellipse", "domain.alpha1": 0.5, "domain.alpha2": 1.5,
                 "domain.rho": 0.6, "run.n": 400, "run.x_min": -15.0, "run.x_max": -5.0,
                 "run.spacing": 0.01, "run.decay_min": 5.0, "run.decay_max": 10.0},
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Raw ``key -> value string`` map; later lines override earlier ones."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if "." not in key or not key.replace(".", "").replace("_", "").isalnum():
            raise ConfigError(f"{source}:{lineno}: malformed key {key!r}")
        out[key] = value
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, DEFAULTS[self.command].get(key, default))

    @property
    def seed(self) -> int:
        return self.get("run.seed", 0)

    @property
    def method(self) -> str:
        return self.get("run.method", "reduced")

    def domain(self) -> Domain:
        kind = self.get("domain.kind", "disk")
        try:
            if kind == "disk":
                return DiskDomain(self.get("domain.center", 1j), self.get("domain.radius", 0.1))
            if kind == "quadrature":
                return QuadratureDomain(self._need("domain.d0"), self.get("domain.d1", 0j),
                                        self._need("domain.rho"), self.get("domain.m", 1))
            if kind == "ellipse":
                return EllipseDomain(self._need("domain.alpha1"), self._need("domain.alpha2"),
                                     self._need("domain.rho"))
        except InvariantViolation as exc:
            raise ConfigError(f"invalid domain: {exc}") from exc
        raise ConfigError(f"domain.kind must be disk, quadrature or ellipse, not {kind!r}")

    def density(self, domain: Domain) -> DensitySpec:
        """Explicit density, or the natural one for the domain.

        Disks default to the constant ``pi / rho^2`` (one-soliton with ``c = pi``),
        m-fold domains to ``m conj(z - d0)^(m-1)`` and the ellipse to ``1``.
        """
        keys = [k for k in self.values if k.startswith("density.")]
        try:
            if keys:
                return DensitySpec(self.get("density.p", 0), self._need("density.coeffs"),
                                   self.get("density.expansion_center", 0j),
                                   self.get("density.conj_center", 0j))
            if isinstance(domain, DiskDomain):
                return DensitySpec.constant(math.pi / domain.radius**2)
            if isinstance(domain, QuadratureDomain):
                m = domain.m
                return DensitySpec(m - 1, (float(m),), conj_center=domain.d0 if m > 1 else 0j)
            return DensitySpec.constant(1.0)
        except InvariantViolation as exc:
            raise ConfigError(f"invalid density: {exc}") from exc

    def sampler_config(self) -> SamplerConfig:
        base = SamplerConfig(seed=self.seed)
        try:
            return SamplerConfig(
                seed=self.seed,
                mcmc_burn_in=self.get("sampler.mcmc_burn_in", base.mcmc_burn_in),
                mcmc_steps_per_sample=self.get("sampler.mcmc_steps_per_sample",
                                               base.mcmc_steps_per_sample),
                proposal_scale=self.get("sampler.proposal_scale", base.proposal_scale),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def evaluation_point(self) -> EvaluationPoint:
        return EvaluationPoint(self.get("run.x", 0.0), self.get("run.t", 0.0))

    def _need(self, key):
        v = self.get(key)
        if v is None:
            raise ConfigError(f"missing required key {key}")
        return v


def build_config(command: str, raw: dict) -> RunConfig:
    """Type-check ``raw`` against the command's schema and its numeric constraints."""
    schema = SCHEMAS[command]
    values = {}
    for key, text in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for {command}")
        try:
            values[key] = schema[key](text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    cfg = RunConfig(command, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    dom = cfg.domain()
    cfg.density(dom)
    if cfg.method not in ("full", "reduced"):
        raise ConfigError("run.method must be full or reduced")
    ns = cfg.get("run.ns")
    if ns is not None:
        if not ns or any(n < 1 for n in ns):
            raise ConfigError("run.ns must be a nonempty list of positive integers")
        if cfg.command == "drift" and len(ns) < 3:
            raise ConfigError("run.ns needs at least three sizes for the drift fit")
    trials = cfg.get("run.trials")
    if trials is not None and trials < 30:
        raise ConfigError("run.trials must be at least 30")
    sampler = cfg.get("run.sampler")
    allowed = {"shield": ("auto", "fekete", "stratified", "uniform"),
               "drift": ("auto", "fekete", "stratified", "uniform"),
               "fluctuate": ("ginibre", "uniform")}.get(cfg.command)
    if sampler is not None and allowed and sampler not in allowed:
        raise ConfigError(f"run.sampler must be one of {allowed}")
    if cfg.command == "fluctuate":
        cfg.sampler_config()
    lo, hi = cfg.get("run.x_min"), cfg.get("run.x_max")
    if lo is not None and hi is not None and not lo < hi:
        raise ConfigError("run.x_min must be below run.x_max")
    for key in ("run.spacing", "run.threshold"):
        v = cfg.get(key)
        if v is not None and not v > 0:
            raise ConfigError(f"{key} must be positive")
    if cfg.command == "shield" and cfg.get("run.nx") < 2:
        raise ConfigError("run.nx must be at least 2")
    if cfg.command == "elliptic":
        if not isinstance(dom, EllipseDomain):
            raise ConfigError("elliptic needs domain.kind = ellipse")
        if cfg.get("run.n") < 2:
            raise ConfigError("run.n must be at least 2")
    for key in ("output.csv", "output.json"):
        if cfg.get(key):
            check_writable(cfg.get(key))


def check_writable(path) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write to {path}")


def load_config(command: str, path=None, overrides=None) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.update(parse_config_text(text, str(path)))
    raw.update(overrides or {})
    return build_config(command, raw)

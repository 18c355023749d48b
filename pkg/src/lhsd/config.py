"""Experiment configuration files.

The format is flat ``key = value`` text with dotted section paths::

    # ten identical assets
    assets.count = 10
    assets.theta = -0.2859
    copula_plus.family = fgm
    option.strikes = 80, 90, 100

Blank lines and ``#`` comments are ignored. Per-asset fields take either a
single value shared by all assets or a comma list with one value per asset.
:func:`load_config` checks every field and reports all problems at once.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .copula import CopulaModel, Family
from .core import EtaPolicy
from .errors import ConfigError
from .pricing import OptionKind, OptionSpec
from .vg import BasketModel, DriftConvention, ModelError, VgAsset

__all__ = ["ExperimentConfig", "load_config", "parse_config", "bundled_config_path", "BUNDLED_CONFIGS"]

BUNDLED_CONFIGS = ("table1", "table2_asian", "table3_lookback")

_KNOWN_KEYS = {
    "assets.count", "assets.theta", "assets.sigma", "assets.c", "assets.s0",
    "copula_plus.family", "copula_plus.alpha", "copula_plus.dim",
    "copula_minus.family", "copula_minus.alpha", "copula_minus.dim",
    "option.kind", "option.strikes", "option.r", "option.T",
    "option.monitoring_count", "option.monitoring_spacing",
    "simulation.n", "simulation.m_reps", "simulation.eta_policy",
    "simulation.master_seed", "simulation.drift_convention",
    "output.path", "output.format",
}  # fmt: skip

_FIELD_LABELS = {"assets.c": "gamma volatility c", "assets.sigma": "volatility sigma", "assets.s0": "initial price s0"}

# copula_minus falls back to copula_plus field by field
_DEFAULTS = {
    "assets.s0": "100",
    "simulation.eta_policy": "half",
    "simulation.master_seed": "0",
    "simulation.drift_convention": "risk_neutral",
    "output.path": "-",
    "output.format": "csv",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: model, options, simulation and output settings."""

    assets: tuple
    copula_plus: CopulaModel
    copula_minus: CopulaModel
    option_kind: OptionKind
    strikes: tuple
    rate: float
    maturity: float
    monitoring_count: int
    monitoring_spacing: float
    n: int
    m_reps: int
    eta_policy: EtaPolicy
    master_seed: int
    drift_convention: DriftConvention
    output_path: str
    output_format: str
    digest: str = ""

    @property
    def dim(self) -> int:
        return len(self.assets)

    def basket(self) -> BasketModel:
        times = tuple(self.monitoring_spacing * (k + 1) for k in range(self.monitoring_count))
        return BasketModel(self.assets, self.copula_plus, self.copula_minus, times)

    def option_specs(self) -> list[OptionSpec]:
        return [OptionSpec(self.option_kind, k, self.rate, self.maturity) for k in self.strikes]


def _parse_lines(text: str, errors: list) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            errors.append(f"{key}: unknown field")
        elif key in values:
            errors.append(f"{key}: given more than once")
        else:
            values[key] = value
    return values


class _Reader:
    # Collects conversion errors instead of raising on the first one.

    def __init__(self, values: dict, errors: list):
        self.values = values
        self.errors = errors

    def raw(self, key):
        if key in self.values:
            return self.values[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        self.errors.append(f"{key}: missing field")
        return None

    def convert(self, key, fn, text=None):
        text = self.raw(key) if text is None else text
        if text is None:
            return None
        try:
            return fn(text)
        except (TypeError, ValueError) as exc:
            self.errors.append(f"{key}: {exc}")
            return None

    def number(self, key, *, positive=False, nonneg=False):
        val = self.convert(key, float)
        if val is None:
            return None
        if not math.isfinite(val):
            self.errors.append(f"{key}: must be finite, got {val}")
        elif positive and not val > 0:
            self.errors.append(f"{key}: must be positive, got {val}")
        elif nonneg and val < 0:
            self.errors.append(f"{key}: must be nonnegative, got {val}")
        else:
            return val
        return None

    def integer(self, key, *, minimum=None):
        val = self.convert(key, _to_int)
        if val is not None and minimum is not None and val < minimum:
            self.errors.append(f"{key}: must be >= {minimum}, got {val}")
            return None
        return val

    def per_asset(self, key, count, *, positive=False):
        text = self.raw(key)
        if text is None:
            return None
        parts = [p.strip() for p in text.split(",")]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            self.errors.append(f"{key}: not a number or comma list of numbers: {text!r}")
            return None
        if count is not None and len(vals) == 1:
            vals = vals * count
        if count is not None and len(vals) != count:
            self.errors.append(f"{key}: {len(vals)} values given for {count} assets")
            return None
        bad = [v for v in vals if not math.isfinite(v) or (positive and not v > 0)]
        if bad:
            req = "positive and finite" if positive else "finite"
            label = _FIELD_LABELS.get(key, key)
            self.errors.append(f"{key}: {label} must be {req}, got {bad[0]}")
            return None
        return vals


def _to_int(text: str) -> int:
    val = float(text)
    if not val.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


def _copula(r: _Reader, section: str, dim, fallback=None):
    fam_text = r.values.get(f"{section}.family")
    alpha_text = r.values.get(f"{section}.alpha")
    if fallback is not None:
        fam_text = fallback[0] if fam_text is None else fam_text
        alpha_text = fallback[1] if alpha_text is None else alpha_text
    if fam_text is None:
        r.errors.append(f"{section}.family: missing field")
        return None, (fam_text, alpha_text)
    family = r.convert(f"{section}.family", Family.parse, fam_text)
    if family is None:
        return None, (fam_text, alpha_text)
    if alpha_text is None:
        if family is not Family.INDEPENDENCE:
            r.errors.append(f"{section}.alpha: missing field")
            return None, (fam_text, alpha_text)
        alpha_text = "0"
    alpha = r.convert(f"{section}.alpha", float, alpha_text)
    if alpha is None:
        return None, (fam_text, alpha_text)
    if not -1.0 <= alpha <= 1.0:
        r.errors.append(f"{section}.alpha: must lie in [-1, 1], got {alpha}")
        return None, (fam_text, alpha_text)
    if f"{section}.dim" in r.values:
        given = r.integer(f"{section}.dim", minimum=1)
        if given is not None and dim is not None and given != dim:
            r.errors.append(f"{section}.dim: {given} does not match assets.count = {dim}")
    if dim is None:
        return None, (fam_text, alpha_text)
    try:
        model = CopulaModel(family, alpha, dim)
        if not model.can_sample:
            r.errors.append(f"{section}.alpha: {family.value} with alpha = {alpha} has an unbounded density and cannot be sampled")
            return None, (fam_text, alpha_text)
        return model, (fam_text, alpha_text)
    except ValueError as exc:
        r.errors.append(f"{section}: {exc}")
        return None, (fam_text, alpha_text)


def parse_config(text: str) -> ExperimentConfig:
    """Validate configuration text; raises :class:`ConfigError` listing every violation."""
    errors: list[str] = []
    values = _parse_lines(text, errors)
    r = _Reader(values, errors)

    count = r.integer("assets.count", minimum=1)
    theta = r.per_asset("assets.theta", count)
    sigma = r.per_asset("assets.sigma", count, positive=True)
    gamma_c = r.per_asset("assets.c", count, positive=True)
    s0 = r.per_asset("assets.s0", count, positive=True)
    assets = None
    if None not in (count, theta, sigma, gamma_c, s0):
        assets = []
        for j in range(count):
            try:
                assets.append(VgAsset(theta[j], sigma[j], gamma_c[j], s0[j]))
            except ModelError as exc:
                errors.append(f"assets[{j}]: {exc}")
        assets = tuple(assets) if len(assets) == count else None

    cplus, plus_text = _copula(r, "copula_plus", count)
    has_minus = "copula_minus.family" in values or "copula_minus.alpha" in values
    cminus = cplus if not has_minus else _copula(r, "copula_minus", count, fallback=plus_text)[0]

    kind = r.convert("option.kind", OptionKind.parse)
    strikes_text = r.raw("option.strikes")
    strikes = None
    if strikes_text is not None:
        try:
            strikes = tuple(float(s) for s in strikes_text.split(",") if s.strip())
            if any(not (math.isfinite(k) and k > 0) for k in strikes):
                errors.append("option.strikes: strikes must be positive and finite")
                strikes = None
        except ValueError:
            errors.append(f"option.strikes: not a comma list of numbers: {strikes_text!r}")
    rate = r.number("option.r")
    maturity = r.number("option.T", positive=True)
    m_count = r.integer("option.monitoring_count", minimum=1)
    spacing = r.number("option.monitoring_spacing", positive=True)
    if None not in (maturity, m_count, spacing) and not math.isclose(m_count * spacing, maturity, rel_tol=1e-9):
        errors.append(
            f"option.monitoring_spacing: spacing {spacing} x count {m_count} = {m_count * spacing} differs from option.T = {maturity}"
        )

    n = r.integer("simulation.n", minimum=1)
    m_reps = r.integer("simulation.m_reps", minimum=1)
    eta = r.convert("simulation.eta_policy", EtaPolicy.parse)
    seed = r.integer("simulation.master_seed", minimum=0)
    drift = r.convert("simulation.drift_convention", DriftConvention.parse)
    out_path = r.raw("output.path")
    out_format = r.raw("output.format")
    if out_format is not None and out_format.lower() != "csv":
        errors.append(f"output.format: only 'csv' is supported, got {out_format!r}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        assets=assets,
        copula_plus=cplus,
        copula_minus=cminus,
        option_kind=kind,
        strikes=strikes,
        rate=rate,
        maturity=maturity,
        monitoring_count=m_count,
        monitoring_spacing=spacing,
        n=n,
        m_reps=m_reps,
        eta_policy=eta,
        master_seed=seed,
        drift_convention=drift,
        output_path=out_path,
        output_format=out_format.lower(),
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


def bundled_config_path(name: str) -> Path:
    """Path of a bundled config such as ``"table1"``."""
    stem = name[:-4] if name.endswith(".cfg") else name
    if stem not in BUNDLED_CONFIGS:
        raise ConfigError([f"config: no bundled config named {name!r}; choose from {', '.join(BUNDLED_CONFIGS)}"])
    return Path(str(resources.files("lhsd") / "configs" / f"{stem}.cfg"))


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file.

    ``path`` may also name a bundled config (``table1``, ``table2_asian``,
    ``table3_lookback``) when no file of that name exists.
    """
    p = Path(path)
    if not p.is_file():
        if str(path).removesuffix(".cfg") in BUNDLED_CONFIGS:
            p = bundled_config_path(str(path))
        else:
            raise ConfigError([f"config: file not found: {path}"])
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([f"config: cannot read {p}: {exc}"]) from None
    return parse_config(text)

"""Network parameters, config loading and the small enums shared across modules.

Powers are configured in dBm and held in milliwatts. Tier indices are
0-based in the Python API; config files and the CLI number tiers from 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import tomli
import tomli_w


class ConfigError(ValueError):
    """Raised when a configuration violates a parameter invariant."""


class SchedulingPolicy(enum.Enum):
    RANDOM = "random"
    FIFO = "fifo"
    ROUND_ROBIN = "rr"

    @classmethod
    def parse(cls, value: "str | SchedulingPolicy") -> "SchedulingPolicy":
        if isinstance(value, cls):
            return value
        aliases = {"round-robin": "rr", "roundrobin": "rr", "round_robin": "rr"}
        key = aliases.get(str(value).lower(), str(value).lower())
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown scheduling policy {value!r}") from None


class InterfererModel(enum.Enum):
    ORIGINAL = "original"
    DOMINANT = "dominant"
    MODIFIED = "modified"


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class TierSpec:
    power: float  # mW
    density: float  # BSs per m^2
    bias: float = 1.0

    def __post_init__(self):
        for name in ("power", "density", "bias"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"tier {name} must be a finite positive number, got {v!r}")

    @classmethod
    def from_dbm(cls, power_dbm: float, density: float, bias: float = 1.0) -> "TierSpec":
        return cls(dbm_to_mw(power_dbm), density, bias)


@dataclass(frozen=True)
class NetworkParams:
    """Static description of a K-tier network and its traffic marks."""

    tiers: tuple[TierSpec, ...]
    alpha: float
    theta: float
    p: float
    lambda_u: float
    xi_min: float
    xi_max: float
    beta_min: float
    beta_max: float
    ref_loss: float = 1.0
    delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if len(self.tiers) < 1:
            raise ConfigError("at least one tier is required")
        for t in self.tiers:
            if not isinstance(t, TierSpec):
                raise ConfigError(f"tiers must be TierSpec instances, got {type(t).__name__}")
        if not self.alpha > 2:
            raise ConfigError(f"alpha must be > 2 for the interference to converge, got {self.alpha}")
        if not self.theta > 0:
            raise ConfigError(f"theta must be > 0, got {self.theta}")
        if not 0 <= self.p <= 1:
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if not self.lambda_u >= 0:
            raise ConfigError(f"lambda_u must be >= 0, got {self.lambda_u}")
        if not 0 <= self.xi_min <= self.xi_max <= 1:
            raise ConfigError(
                f"need 0 <= xi_min <= xi_max <= 1, got [{self.xi_min}, {self.xi_max}]")
        if not 1 <= self.beta_min <= self.beta_max:
            raise ConfigError(
                f"need 1 <= beta_min <= beta_max, got [{self.beta_min}, {self.beta_max}]")
        if not self.ref_loss > 0:
            raise ConfigError(f"ref_loss must be > 0, got {self.ref_loss}")
        object.__setattr__(self, "delta", 2.0 / self.alpha)

    @property
    def K(self) -> int:
        return len(self.tiers)

    @property
    def xi_mean(self) -> float:
        return 0.5 * (self.xi_min + self.xi_max)

    def with_tier(self, k: int, **changes) -> "NetworkParams":
        tiers = list(self.tiers)
        tiers[k] = replace(tiers[k], **changes)
        return self.evolve(tiers=tuple(tiers))

    def evolve(self, **changes) -> "NetworkParams":
        kwargs = {f.name: getattr(self, f.name) for f in fields(self) if f.init}
        kwargs.update(changes)
        return NetworkParams(**kwargs)


@dataclass(frozen=True)
class MarkedUser:
    position: tuple[float, float]
    xi: float  # packet arrival probability per slot
    beta: float  # mean-delay requirement (slots)

    def check(self, params: NetworkParams) -> "MarkedUser":
        if not params.xi_min <= self.xi <= params.xi_max:
            raise ConfigError(f"user rate {self.xi} outside [{params.xi_min}, {params.xi_max}]")
        if not params.beta_min <= self.beta <= params.beta_max:
            raise ConfigError(f"user requirement {self.beta} outside [{params.beta_min}, {params.beta_max}]")
        return self


@dataclass(frozen=True)
class SimConfig:
    slots: int = 20000
    warmup: int = 2000
    realizations: int = 8
    seed: int = 1
    window_side: Optional[float] = None  # None: sized from the sparsest tier
    stability_queue_cap: Optional[int] = None  # None: per-user default, see simulator

    def __post_init__(self):
        if not (self.slots > self.warmup >= 0):
            raise ConfigError(f"need slots > warmup >= 0, got slots={self.slots}, warmup={self.warmup}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.stability_queue_cap is not None and self.stability_queue_cap < 1:
            raise ConfigError("stability_queue_cap must be >= 1")
        if self.window_side is not None and not self.window_side > 0:
            raise ConfigError("window_side must be > 0")


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grids for emitted curves."""

    t_min: float = 1.0
    t_max: float = 40.0
    t_step: float = 1.0
    u_points: int = 41

    def __post_init__(self):
        if not (1 <= self.t_min < self.t_max) or self.t_step <= 0:
            raise ConfigError("need 1 <= t_min < t_max and t_step > 0")
        if self.u_points < 2:
            raise ConfigError("u_points must be >= 2")

    def t_grid(self):
        import numpy as np
        n = int(round((self.t_max - self.t_min) / self.t_step)) + 1
        return self.t_min + self.t_step * np.arange(n)

    def u_grid(self):
        import numpy as np
        return np.linspace(0.0, 1.0, self.u_points)[1:]


CELL_LAWS = ("occupied", "size_biased")


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkParams
    simulation: SimConfig = field(default_factory=SimConfig)
    quadrature: Any = None  # specfun.QuadratureSpec; filled lazily to avoid an import cycle
    grid: GridSpec = field(default_factory=GridSpec)
    cell_law: str = "occupied"  # see analytic.CellLaw

    def __post_init__(self):
        if self.cell_law not in CELL_LAWS:
            raise ConfigError(f"cell_law must be one of {', '.join(CELL_LAWS)}, got {self.cell_law!r}")
        if self.quadrature is None:
            from .specfun import QuadratureSpec
            object.__setattr__(self, "quadrature", QuadratureSpec())


_NETWORK_KEYS = {"alpha", "theta", "p", "ref_loss"}
_TRAFFIC_KEYS = {"lambda_u", "xi_min", "xi_max", "beta_min", "beta_max"}


def _check_keys(section: str, data: Mapping[str, Any], allowed: set[str]):
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")


def _parse_tier(name: str, data: Mapping[str, Any]) -> TierSpec:
    _check_keys(f"tier.{name}", data, {"power_dbm", "power_mw", "density", "bias"})
    if ("power_dbm" in data) == ("power_mw" in data):
        raise ConfigError(f"[tier.{name}] needs exactly one of power_dbm / power_mw")
    if "density" not in data:
        raise ConfigError(f"[tier.{name}] is missing 'density'")
    power = dbm_to_mw(float(data["power_dbm"])) if "power_dbm" in data else float(data["power_mw"])
    return TierSpec(power, float(data["density"]), float(data.get("bias", 1.0)))


def params_from_dict(raw: Mapping[str, Any]) -> NetworkParams:
    """Build validated NetworkParams from the [network]/[tier.N]/[traffic] tables."""
    net = dict(raw.get("network", {}))
    traffic = dict(raw.get("traffic", {}))
    _check_keys("network", net, _NETWORK_KEYS)
    _check_keys("traffic", traffic, _TRAFFIC_KEYS)
    tier_tables = raw.get("tier", {})
    if not tier_tables:
        raise ConfigError("config defines no [tier.N] sections")
    try:
        order = sorted(tier_tables, key=int)
    except ValueError:
        raise ConfigError("tier sections must be numbered: [tier.1], [tier.2], ...") from None
    if [int(k) for k in order] != list(range(1, len(order) + 1)):
        raise ConfigError("tier sections must be numbered consecutively from 1")
    tiers = tuple(_parse_tier(k, tier_tables[k]) for k in order)
    for key in ("alpha", "theta", "p"):
        if key not in net:
            raise ConfigError(f"[network] is missing '{key}'")
    for key in _TRAFFIC_KEYS:
        if key not in traffic:
            raise ConfigError(f"[traffic] is missing '{key}'")
    return NetworkParams(
        tiers=tiers,
        alpha=float(net["alpha"]),
        theta=float(net["theta"]),
        p=float(net["p"]),
        ref_loss=float(net.get("ref_loss", 1.0)),
        **{k: float(traffic[k]) for k in _TRAFFIC_KEYS},
    )


def validate(raw: Mapping[str, Any]) -> NetworkParams:
    return params_from_dict(raw)


def config_from_dict(raw: Mapping[str, Any]) -> ExperimentConfig:
    from .specfun import QuadratureSpec

    known = {"network", "tier", "traffic", "simulation", "quadrature", "grid", "analytic"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    params = params_from_dict(raw)
    sim_raw = dict(raw.get("simulation", {}))
    _check_keys("simulation", sim_raw, {f.name for f in fields(SimConfig)})
    quad_raw = dict(raw.get("quadrature", {}))
    _check_keys("quadrature", quad_raw, {f.name for f in fields(QuadratureSpec)})
    grid_raw = dict(raw.get("grid", {}))
    _check_keys("grid", grid_raw, {f.name for f in fields(GridSpec)})
    analytic_raw = dict(raw.get("analytic", {}))
    _check_keys("analytic", analytic_raw, {"cell_law"})
    try:
        return ExperimentConfig(
            network=params,
            simulation=SimConfig(**sim_raw),
            quadrature=QuadratureSpec(**quad_raw),
            grid=GridSpec(**grid_raw),
            cell_law=str(analytic_raw.get("cell_law", "occupied")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def params_to_dict(params: NetworkParams) -> dict[str, Any]:
    # power_mw keeps the round trip exact; dBm -> mW -> dBm is not bit-stable
    return {
        "network": {"alpha": params.alpha, "theta": params.theta, "p": params.p,
                    "ref_loss": params.ref_loss},
        "tier": {str(i + 1): {"power_mw": t.power, "density": t.density, "bias": t.bias}
                 for i, t in enumerate(params.tiers)},
        "traffic": {k: getattr(params, k) for k in ("lambda_u", "xi_min", "xi_max",
                                                    "beta_min", "beta_max")},
    }


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    out = params_to_dict(cfg.network)
    sim = {f.name: getattr(cfg.simulation, f.name) for f in fields(SimConfig)}
    out["simulation"] = {k: v for k, v in sim.items() if v is not None}
    out["quadrature"] = {f.name: getattr(cfg.quadrature, f.name) for f in fields(cfg.quadrature)}
    out["grid"] = {f.name: getattr(cfg.grid, f.name) for f in fields(GridSpec)}
    out["analytic"] = {"cell_law": cfg.cell_law}
    return out


def dumps(obj: "NetworkParams | ExperimentConfig") -> str:
    data = params_to_dict(obj) if isinstance(obj, NetworkParams) else config_to_dict(obj)
    return tomli_w.dumps(data)


def loads(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return config_from_dict(raw)


PRESET_DIR = Path(__file__).with_name("presets")


def resolve_config_path(name_or_path: "str | Path") -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    preset = PRESET_DIR / f"{path.stem}.toml"
    if preset.exists():
        return preset
    raise ConfigError(f"no config file or preset named {str(name_or_path)!r}")


def load_config(name_or_path: "str | Path") -> ExperimentConfig:
    return loads(resolve_config_path(name_or_path).read_text())


def list_presets() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.toml"))

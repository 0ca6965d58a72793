"""Scenario files: one YAML document per experiment.

Schema (version 1)::

    schema: 1
    id: fig11                  # scenario id, also the default output folder name
    kind: rate                 # pattern | trajectory | accuracy | rate | two_stage
    description: free text
    system:                    # any SystemConfig field except sigma2
      N: 256
      M: 128
      K_d: 16
      f_c: 100.0e+9
      B: 10.0e+9
      Q: 10
    users:                     # list; K is its length
      - {alpha_max: 0.1}       # random: theta0 ~ U(-1, 1), alpha ~ U(0, alpha_max)
      - {theta0: -0.4, alpha: 0.1, deltas: [0.005, ...]}   # explicit track
    sweep:                     # exactly one axis
      axis: T                  # T | snr_db | frames
      values: [2, 3, 4]
    snr_db: 30                 # fixed SNR unless it is the sweep axis
    T: 2                       # fixed overhead unless it is the sweep axis
    trials: 200
    precoder: mmse             # mmse | zf
    tracker: zoom              # zoom | typical | two_stage
    schemes: [optimal, perfect, zoom, typical, bound]
    user_array: {N_r: 32, K_d_r: 4, alpha_r: 0.1}      # two_stage only
    pattern: {step: 1.0e-4}    # pattern only: angular grid step of the gain scan
    seed: 0
    outputs: out/fig11
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .syscfg import ConfigError, SystemConfig
from .tracking import UserArray

SCHEMA_VERSION = 1
KINDS = ("pattern", "trajectory", "accuracy", "rate", "two_stage")
AXES = ("T", "snr_db", "frames")
TRACKERS = ("zoom", "typical", "two_stage")
PRECODERS = ("mmse", "zf")
SCHEMES = ("optimal", "perfect", "zoom", "typical", "hybrid", "bound")
PRESETS = ("fig6", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15", "fig16")


class ScenarioError(ConfigError):
    """A scenario file failed to parse or validate."""


@dataclass(frozen=True)
class UserSpec:
    theta0: float | None = None
    alpha: float | None = None
    alpha_max: float | None = None
    deltas: tuple = ()

    @property
    def explicit(self) -> bool:
        return self.theta0 is not None


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    kind: str
    system: SystemConfig
    users: tuple
    sweep: SweepSpec
    snr_db: float | None = None
    T: int | None = None
    trials: int = 1
    precoder: str = "mmse"
    tracker: str = "zoom"
    schemes: tuple = ()
    user_array: UserArray | None = None
    alpha_r: float = 0.1
    pattern: dict = field(default_factory=dict)
    seed: int = 0
    outputs: str | None = None
    description: str = ""

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def alpha_max(self) -> float:
        vals = [u.alpha_max if u.alpha_max is not None else u.alpha for u in self.users]
        return max(v for v in vals if v is not None)

    def replace(self, **changes) -> "ScenarioSpec":
        from dataclasses import replace

        return replace(self, **changes)


def _require(cond, where: str, msg: str):
    if not cond:
        raise ScenarioError(f"{where}: {msg}")


def _number(raw, where, kind=float):
    try:
        if kind is int and (isinstance(raw, bool) or float(raw) != int(raw)):
            raise ValueError
        return kind(raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected {kind.__name__}, got {raw!r}") from None


def _user(raw, i) -> UserSpec:
    where = f"users[{i}]"
    _require(isinstance(raw, dict), where, "expected a mapping")
    unknown = set(raw) - {"theta0", "alpha", "alpha_max", "deltas"}
    _require(not unknown, where, f"unknown keys {sorted(unknown)}")
    if "theta0" in raw:
        theta0 = _number(raw["theta0"], f"{where}.theta0")
        _require(-1 <= theta0 <= 1, f"{where}.theta0", "must lie in [-1, 1]")
        _require("alpha" in raw, where, "explicit users need alpha")
        deltas = raw.get("deltas", [])
        deltas = deltas if isinstance(deltas, list) else [deltas]
        alpha = _number(raw["alpha"], f"{where}.alpha")
        _require(alpha > 0, f"{where}.alpha", "must be positive")
        return UserSpec(theta0=theta0, alpha=alpha,
                        deltas=tuple(_number(d, f"{where}.deltas") for d in deltas))
    _require("alpha_max" in raw, where, "random users need alpha_max (or give theta0 and alpha)")
    amax = _number(raw["alpha_max"], f"{where}.alpha_max")
    _require(0 < amax <= 1, f"{where}.alpha_max", "must lie in (0, 1]")
    return UserSpec(alpha_max=amax)


def parse_scenario(doc, source: str = "<scenario>") -> ScenarioSpec:
    """Validate a parsed YAML document and build the spec."""
    _require(isinstance(doc, dict), source, "top level must be a mapping")
    known = {f.name for f in fields(ScenarioSpec)} | {"schema"}
    unknown = set(doc) - known
    _require(not unknown, source, f"unknown keys {sorted(unknown)}")
    _require(doc.get("schema", SCHEMA_VERSION) == SCHEMA_VERSION, "schema",
             f"unsupported version {doc.get('schema')!r}, expected {SCHEMA_VERSION}")
    for key in ("id", "kind", "users", "sweep"):
        _require(key in doc, source, f"missing required key {key!r}")
    kind = doc["kind"]
    _require(kind in KINDS, "kind", f"must be one of {KINDS}, got {kind!r}")

    users_raw = doc["users"]
    _require(isinstance(users_raw, list) and users_raw, "users", "must be a non-empty list")
    users = tuple(_user(u, i) for i, u in enumerate(users_raw))
    _require(len({u.explicit for u in users}) == 1, "users", "mix of explicit and random users")

    system_raw = dict(doc.get("system") or {})
    _require("sigma2" not in system_raw, "system.sigma2", "set snr_db instead")
    allowed = {f.name for f in fields(SystemConfig)} - {"sigma2", "seed"}
    unknown = set(system_raw) - allowed
    _require(not unknown, "system", f"unknown keys {sorted(unknown)}")
    if "K" in system_raw:
        _require(system_raw["K"] == len(users), "system.K", f"must equal the number of users ({len(users)})")
    system_raw["K"] = len(users)
    seed = _number(doc.get("seed", 0), "seed", int)
    try:
        system = SystemConfig(**system_raw, seed=seed)
    except (TypeError, ConfigError) as exc:
        raise ScenarioError(f"system: {exc}") from None

    sweep_raw = doc["sweep"]
    _require(isinstance(sweep_raw, dict) and set(sweep_raw) == {"axis", "values"}, "sweep",
             "needs exactly the keys axis and values")
    axis = sweep_raw["axis"]
    _require(axis in AXES, "sweep.axis", f"must be one of {AXES}, got {axis!r}")
    vals = sweep_raw["values"]
    _require(isinstance(vals, list) and vals, "sweep.values", "must be a non-empty list")
    conv = float if axis == "snr_db" else int
    values = tuple(_number(v, "sweep.values", conv) for v in vals)
    if axis != "snr_db":
        _require(all(v >= 1 for v in values), "sweep.values", "must be >= 1")

    snr_db = doc.get("snr_db")
    if axis == "snr_db":
        _require(snr_db is None, "snr_db", "is the sweep axis; remove the fixed value")
    elif kind != "pattern":
        _require(snr_db is not None, "snr_db", "required unless it is the sweep axis")
        snr_db = _number(snr_db, "snr_db")
    T = doc.get("T")
    if axis == "T":
        _require(T is None, "T", "is the sweep axis; remove the fixed value")
    elif kind not in ("pattern",):
        _require(T is not None, "T", "required unless it is the sweep axis")
        T = _number(T, "T", int)
        _require(T >= 1, "T", "must be >= 1")

    trials = _number(doc.get("trials", 1), "trials", int)
    _require(trials >= 1, "trials", "must be >= 1")
    precoder = doc.get("precoder", "mmse")
    _require(precoder in PRECODERS, "precoder", f"must be one of {PRECODERS}")
    tracker = doc.get("tracker", "two_stage" if kind == "two_stage" else "zoom")
    _require(tracker in TRACKERS, "tracker", f"must be one of {TRACKERS}")
    schemes = tuple(doc.get("schemes", ()))
    bad = [s for s in schemes if s not in SCHEMES]
    _require(not bad, "schemes", f"unknown {bad}; choose from {SCHEMES}")
    if kind in ("rate", "two_stage"):
        _require(schemes, "schemes", f"required for kind {kind!r}")
    if kind == "two_stage":
        _require("bound" not in schemes, "schemes", "bound is single-antenna only")

    if kind == "trajectory":
        _require(users[0].explicit, "users", "trajectory scenarios need explicit users")
        _require(axis == "frames", "sweep.axis", "trajectory scenarios sweep frames")
        for i, u in enumerate(users):
            _require(len(u.deltas) >= max(values), f"users[{i}].deltas",
                     f"needs at least {max(values)} entries")
    elif kind != "pattern":
        _require(axis != "frames", "sweep.axis", "frames is only valid for trajectory scenarios")

    user_array, alpha_r = None, 0.1
    if kind == "two_stage":
        ua = dict(doc.get("user_array") or {})
        alpha_r = _number(ua.pop("alpha_r", 0.1), "user_array.alpha_r")
        try:
            user_array = UserArray(**ua)
            user_array.as_config(system)
        except (TypeError, ConfigError) as exc:
            raise ScenarioError(f"user_array: {exc}") from None

    pattern = dict(doc.get("pattern") or {})
    if kind == "pattern":
        _require(users[0].explicit and len(users) == 1, "users", "pattern scenarios take one explicit user")
        _require(set(pattern) <= {"step"}, "pattern", "only 'step' is configurable")
        pattern = {k: _number(v, f"pattern.{k}") for k, v in pattern.items()}

    return ScenarioSpec(
        id=str(doc["id"]), kind=kind, system=system, users=users, sweep=SweepSpec(axis, values),
        snr_db=snr_db, T=T, trials=trials, precoder=precoder, tracker=tracker, schemes=schemes,
        user_array=user_array, alpha_r=alpha_r, pattern=pattern, seed=seed,
        outputs=doc.get("outputs"), description=str(doc.get("description", "")),
    )


def load_scenario(path) -> ScenarioSpec:
    """Read and validate a scenario file; errors carry the file name and line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return loads_scenario(text, str(path))


def loads_scenario(text: str, source: str = "<scenario>") -> ScenarioSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ScenarioError(f"{where}: {getattr(exc, 'problem', None) or exc}") from None
    try:
        return parse_scenario(doc, source)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("beamzoom.presets").joinpath(f"{name}.yaml").read_text()


def load_preset(name: str) -> ScenarioSpec:
    return loads_scenario(preset_text(name), f"preset {name}")

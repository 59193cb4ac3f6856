"""Experiment configuration: flat dotted YAML keys mapped onto dataclasses."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .domains import DOMAINS, make_domain
from .sim.collab import CollabConfig
from .sim.teleop import TeleopConfig

ALGORITHMS = ("dsas", "sas", "cma-mae", "map-elites", "random")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    domain: str
    algorithm: str
    budget: int = 10_000
    seed: int = 0
    n_exploit: int = 100
    batch: int = 36
    k_sel: int = 100
    alpha: float = 0.1
    min_f: float = 0.0
    sigma0: float | None = None          # domain default when None
    sigma_me: float | list | None = None  # domain default when None
    reg_weight: float = 100.0
    epochs: int = 100
    train_batch: int = 64
    lr: float = 1e-4
    occ_widths: tuple = (8, 4)
    down_widths: tuple = (4, 8)
    checkpoints: bool = True
    sim: dict = field(default_factory=dict)

    def make_domain(self):
        """Domain with ``sim.*`` overrides applied to the relevant simulator config."""
        teleop, collab = TeleopConfig(), CollabConfig()
        t_names = {f.name for f in fields(TeleopConfig)}
        c_names = {f.name for f in fields(CollabConfig)}
        t_over = {k: v for k, v in self.sim.items() if k in t_names}
        c_over = {k: v for k, v in self.sim.items() if k in c_names}
        return make_domain(self.domain, replace(teleop, **t_over), replace(collab, **c_over))

    def to_flat(self) -> dict:
        d = asdict(self)
        sim = d.pop("sim")
        out = {KEY_OF[k]: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
        out.update({f"sim.{k}": v for k, v in sorted(sim.items())})
        return out


# Flat key -> dataclass field.
FIELD_OF = {
    "domain": "domain", "algorithm": "algorithm", "budget": "budget", "seed": "seed",
    "search.n_exploit": "n_exploit", "search.batch": "batch", "search.k_sel": "k_sel",
    "search.alpha": "alpha", "search.min_f": "min_f", "search.sigma0": "sigma0",
    "search.sigma_me": "sigma_me", "repair.weight": "reg_weight", "model.epochs": "epochs",
    "model.batch": "train_batch", "model.lr": "lr", "model.occ_widths": "occ_widths",
    "model.down_widths": "down_widths", "output.checkpoints": "checkpoints",
}
KEY_OF = {v: k for k, v in FIELD_OF.items()}
SIM_KEYS = sorted(({f.name for f in fields(TeleopConfig)} | {f.name for f in fields(CollabConfig)})
                  - {"regions", "workspace"})


def from_flat(data: dict) -> ExperimentConfig:
    """Build and validate a config from a flat ``{dotted key: value}`` mapping."""
    problems = []
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping of dotted keys"])
    for key in ("domain", "algorithm"):
        if key not in data:
            problems.append(f"missing required key '{key}'")
    kwargs, sim = {}, {}
    for key, value in data.items():
        if key in FIELD_OF:
            kwargs[FIELD_OF[key]] = value
        elif key.startswith("sim."):
            name = key[4:]
            if name not in SIM_KEYS:
                problems.append(f"unknown key '{key}'")
            sim[name] = value
        else:
            problems.append(f"unknown key '{key}'")
    if problems:
        raise ConfigError(problems)
    for name in ("occ_widths", "down_widths"):
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    for name in ("grid_bounds", "occupancy_bounds", "start", "robot_home", "human_start",
                 "grid_origin", "grid_shape", "replan_center"):
        if name in sim:
            sim[name] = tuple(sim[name])
    cfg = ExperimentConfig(sim=sim, **kwargs)
    validate(cfg)
    return cfg


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_sim_value(name: str, value):
    """Type check one ``sim.*`` override against the simulator default."""
    defaults = [getattr(c(), name) for c in (TeleopConfig, CollabConfig) if hasattr(c(), name)]
    if not defaults:
        return f"unknown key 'sim.{name}'"
    default = defaults[0]
    key = f"sim.{name}"
    if default is None:
        ok = value is None or _is_number(value)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = _is_number(value)
    else:
        ok = (isinstance(value, (tuple, list)) and len(value) == len(default)
              and all(_is_number(v) for v in value))
    if not ok:
        return f"{key} has the wrong type or shape (default {default!r})"
    return None


def validate(cfg: ExperimentConfig) -> None:
    problems = []
    if cfg.domain not in DOMAINS:
        problems.append(f"domain must be one of {', '.join(DOMAINS)} (got {cfg.domain!r})")
    if cfg.algorithm not in ALGORITHMS:
        problems.append(f"algorithm must be one of {', '.join(ALGORITHMS)} (got {cfg.algorithm!r})")
    for name in ("budget", "batch", "epochs", "train_batch"):
        v = getattr(cfg, name)
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            problems.append(f"{KEY_OF[name]} must be a positive integer")
    for name in ("n_exploit", "k_sel", "seed"):
        v = getattr(cfg, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            problems.append(f"{KEY_OF[name]} must be a nonnegative integer")
    if not 0.0 <= cfg.alpha <= 1.0:
        problems.append("search.alpha must lie in [0, 1]")
    if cfg.reg_weight < 0:
        problems.append("repair.weight must be nonnegative")
    if cfg.sigma0 is not None and cfg.sigma0 <= 0:
        problems.append("search.sigma0 must be positive")
    if cfg.lr <= 0:
        problems.append("model.lr must be positive")
    if len(cfg.occ_widths) != 2 or len(cfg.down_widths) != 2:
        problems.append("model widths take two integers each")
    for name, value in sorted(cfg.sim.items()):
        problem = _check_sim_value(name, value)
        if problem:
            problems.append(problem)
    if not problems:
        try:
            cfg.make_domain()
        except (TypeError, ValueError) as exc:
            problems.append(f"invalid sim override: {exc}")
    if problems:
        raise ConfigError(problems)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"malformed YAML: {exc}"]) from None
    return from_flat(data)

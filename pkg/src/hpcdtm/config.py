"""YAML configuration: plant parameters, scenario defaults, controller gains and battery axes."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .controllers import EbaGains, FcaGains, FuzzyLut, VbaGains
from .harness.run import PlantConfig
from .harness.scenario import ScenarioSpec
from .power import CorePowerParams
from .thermal import CoolingVariant, MaterialProps

GAIN_TYPES = {"VBA": VbaGains, "EBA": EbaGains, "FCA": FcaGains}
_PLANT_SCALARS = ("chip_seed", "power_spread", "thermal_spread", "vrm_delay", "init_jitter")


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, where="") -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def _pick(cls, values: dict, where: str):
    names = {f.name for f in fields(cls)}
    extra = set(values) - names
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return values


def default_tree() -> dict:
    text = resources.files("hpcdtm").joinpath("data/default.yaml").read_text()
    return yaml.safe_load(text)


@dataclass
class Config:
    tree: dict
    plant: PlantConfig
    scenario: dict = field(default_factory=dict)
    battery: dict = field(default_factory=dict)

    def scenario_spec(self, **overrides) -> ScenarioSpec:
        kw = dict(self.scenario)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        for k in ("budget_fractions", "init_band", "f_multi"):
            kw[k] = tuple(float(x) for x in kw[k])
        return ScenarioSpec(**kw)

    def dump(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=False)


def _plant_from(tree: dict) -> PlantConfig:
    p = tree.get("plant", {})
    unknown = set(p) - set(_PLANT_SCALARS) - {"power", "materials", "cooling"}
    if unknown:
        raise ConfigError(f"plant: unknown keys {sorted(unknown)}")
    power = CorePowerParams(**_pick(CorePowerParams, p.get("power") or {}, "plant.power"))
    mats = MaterialProps(**_pick(MaterialProps, p.get("materials") or {}, "plant.materials"))
    cooling = {}
    for kind, over in (p.get("cooling") or {}).items():
        base = CoolingVariant.named(kind)
        cooling[kind.upper()] = replace(base, **_pick(CoolingVariant, over, f"plant.cooling.{kind}"))

    gains, luts = {}, {}
    for name, vals in (tree.get("controllers") or {}).items():
        name = name.upper()
        if name not in GAIN_TYPES:
            raise ConfigError(f"controllers: unknown algorithm {name!r}")
        vals = dict(vals or {})
        if "lut" in vals:
            luts[name] = FuzzyLut(values=np.asarray(vals.pop("lut"), dtype=int))
        gains[name] = GAIN_TYPES[name](**_pick(GAIN_TYPES[name], vals, f"controllers.{name}"))
    kw = {k: p[k] for k in _PLANT_SCALARS if k in p}
    return PlantConfig(materials=mats, power=power, cooling=cooling, controller_gains=gains,
                       controller_luts=luts, **kw)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Default tree, merged with ``path`` (YAML) and then with ``overrides``."""
    tree = default_tree()
    if path is not None:
        path = Path(path)
        try:
            user = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        extra = set(user) - set(tree)
        if extra:
            raise ConfigError(f"{path}: unknown sections {sorted(extra)}")
        tree = _merge(tree, user)
    tree = _merge(tree, overrides or {})
    scen = _pick(ScenarioSpec, tree.get("scenario") or {}, "scenario")
    return Config(tree=tree, plant=_plant_from(tree), scenario=dict(scen),
                  battery=dict(tree.get("battery") or {}))

"""Scenario configuration files.

A config is a YAML document with a few top-level keys and one section named
after the scenario. Everything is validated up front, so a run never starts
on a config that would fail halfway through.
"""
from typing import Any, Callable, Dict, List, Mapping, Optional
from dataclasses import dataclass, field
from pathlib import Path
import copy

import yaml

from .measures import Alphabet, Opinion, ReferencePath, from_spec
from .merging import CurveMethod
from .util import ConfigInvalid, ExpertestError, NumberMode, check_enumerable

SCENARIOS = ("merge", "example1", "bdtest", "partition", "manipulate", "game")
TOP_LEVEL_KEYS = ("scenario", "mode", "seed", "alphabet", "opinions", "out")
MANIPULATION_TESTS = ("tail", "empty")
GAME_METHODS = ("lp", "mwu")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "merge": {
        "p": "P",
        "q": "Q",
        "t_max": 20,
        "lookahead": 4,
        "threshold": 0.1,
        "method": "exact",
        "n_paths": 1000,
        "abs_depth": 8,
        "candidates": [],
    },
    "example1": {"N": 16, "K": 8, "reference": "(0)"},
    "bdtest": {"epsilon": 0.05, "reference": "(01)", "max_depth": 200, "corpus": None},
    "partition": {"epsilons": [0.25, 0.1, 0.01], "max_depth": 30, "corpus": None},
    "manipulate": {
        "test": "tail",
        "horizon": 8,
        "epsilon": 0.2,
        "delta": 0.05,
        "max_iters": 300,
        "tol": 1e-6,
        "initial": "uniform",
    },
    "game": {
        "payoffs": None,
        "matrix_file": None,
        "method": "lp",
        "tol": 1e-9,
        "max_iters": 100000,
    },
}


@dataclass
class ScenarioConfig:
    scenario: str
    params: Dict[str, Any]
    mode: NumberMode = NumberMode.rational
    seed: Optional[int] = None
    alphabet: int = 2
    opinions: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    out: Optional[str] = None
    base_dir: Optional[str] = field(default=None, compare=False)

    @property
    def alphabet_obj(self) -> Alphabet:
        return Alphabet(self.alphabet)

    def opinion(self, name: str) -> Opinion:
        spec = {"label": name, **self.opinions[name]}
        return from_spec(spec, self.alphabet_obj, self.mode)

    def corpus(self, names: Optional[List[str]] = None) -> List[Opinion]:
        return [self.opinion(name) for name in (names or list(self.opinions))]

    def resolve(self, path: str) -> Path:
        resolved = Path(path)
        if not resolved.is_absolute() and self.base_dir:
            resolved = Path(self.base_dir) / resolved
        return resolved

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "scenario": self.scenario,
            "mode": self.mode.value,
            "seed": self.seed,
            "alphabet": self.alphabet,
            "opinions": copy.deepcopy(self.opinions),
            self.scenario: copy.deepcopy(self.params),
        }
        if self.out is not None:
            data["out"] = self.out
        return data


def serialize_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


def load_config(
    path: Path,
    overrides: Optional[Mapping[str, Any]] = None,
    scenario: Optional[str] = None,
) -> ScenarioConfig:
    try:
        text = path.read_text(encoding="utf8")
    except OSError as e:
        raise ConfigInvalid("config", f"can't read {path}: {e}")
    return parse_config(text, overrides, scenario=scenario, base_dir=str(path.parent))


def parse_config(
    text: str,
    overrides: Optional[Mapping[str, Any]] = None,
    scenario: Optional[str] = None,
    base_dir: Optional[str] = None,
) -> ScenarioConfig:
    """Parse and fully validate a scenario config. Overrides (e.g. from CLI
    flags) replace top-level keys before validation, and None values are
    ignored. The scenario argument fills in a missing 'scenario' key and must
    match it otherwise.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigInvalid("config", f"not valid YAML: {e}")
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigInvalid("config", "expected a mapping at the top level")
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    if scenario is not None:
        if doc.setdefault("scenario", scenario) != scenario:
            raise ConfigInvalid(
                "scenario", f"config is for '{doc['scenario']}', not '{scenario}'"
            )
    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigInvalid("scenario", f"expected one of {', '.join(SCENARIOS)}, got {scenario!r}")
    for key in doc:
        if key not in TOP_LEVEL_KEYS and key != scenario:
            raise ConfigInvalid(str(key), "unknown key")
    mode_value = doc.get("mode", NumberMode.rational.value)
    try:
        mode = NumberMode(mode_value)
    except ValueError:
        raise ConfigInvalid("mode", f"expected 'rational' or 'float', got {mode_value!r}")
    seed = doc.get("seed")
    if seed is not None:
        _int("seed", seed, 0)
    alphabet = _int("alphabet", doc.get("alphabet", 2), 2)
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigInvalid("out", "expected a directory path")
    opinions = doc.get("opinions") or {}
    if not isinstance(opinions, dict):
        raise ConfigInvalid("opinions", "expected a mapping from names to opinion specs")
    section = doc.get(scenario) or {}
    if not isinstance(section, dict):
        raise ConfigInvalid(scenario, "expected a mapping of parameters")
    params = copy.deepcopy(DEFAULTS[scenario])
    for key, value in section.items():
        if key not in params:
            raise ConfigInvalid(f"{scenario}.{key}", "unknown key")
        params[key] = value
    config = ScenarioConfig(
        scenario=scenario,
        params=params,
        mode=mode,
        seed=seed,
        alphabet=alphabet,
        opinions={str(k): v for k, v in opinions.items()},
        out=out,
        base_dir=base_dir,
    )
    labels: Dict[str, str] = {}
    for name in config.opinions:
        try:
            label = config.opinion(name).label
        except (ValueError, KeyError, TypeError, ExpertestError) as e:
            raise ConfigInvalid(f"opinions.{name}", str(e))
        if label in labels:
            raise ConfigInvalid(f"opinions.{name}", f"label '{label}' is already used by '{labels[label]}'")
        labels[label] = name
    VALIDATORS[scenario](config)
    return config


def _int(name: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigInvalid(name, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _number(
    name: str, value: Any, low: float, high: float, closed_low: bool = False
) -> float:
    """Check low < value <= high (or low <= value with closed_low)."""
    try:
        number = NumberMode.float.coerce(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ConfigInvalid(name, f"expected a number, got {value!r}")
    above = number >= low if closed_low else number > low
    if not above or number > high:
        bracket = "[" if closed_low else "("
        raise ConfigInvalid(name, f"expected a number in {bracket}{low}, {high}], got {value!r}")
    return number


def _choice(name: str, value: Any, choices: Any) -> None:
    if value not in choices:
        raise ConfigInvalid(name, f"expected one of {', '.join(choices)}, got {value!r}")


def _names(name: str, value: Any, config: ScenarioConfig) -> None:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigInvalid(name, "expected a list of opinion names")
    for item in value:
        _opinion_name(name, item, config)
    repeated = sorted({item for item in value if value.count(item) > 1})
    if repeated:
        raise ConfigInvalid(name, f"opinion names listed more than once: {', '.join(repeated)}")


def _opinion_name(name: str, value: Any, config: ScenarioConfig) -> None:
    if value not in config.opinions:
        available = ", ".join(config.opinions) or "none defined"
        raise ConfigInvalid(name, f"no opinion named {value!r} (available: {available})")


def _reference(name: str, value: Any, config: ScenarioConfig) -> None:
    try:
        ReferencePath.parse(str(value), config.alphabet_obj)
    except ValueError as e:
        raise ConfigInvalid(name, str(e))


def _corpus(name: str, value: Any, config: ScenarioConfig) -> None:
    if value is not None:
        _names(name, value, config)
    if not value and not config.opinions:
        raise ConfigInvalid("opinions", "this scenario needs at least one opinion")


def _validate_merge(config: ScenarioConfig) -> None:
    p = config.params
    _opinion_name("merge.p", p["p"], config)
    _opinion_name("merge.q", p["q"], config)
    _int("merge.t_max", p["t_max"], 0)
    _int("merge.lookahead", p["lookahead"], 1)
    _number("merge.threshold", p["threshold"], 0, 1, closed_low=True)
    _choice("merge.method", p["method"], [m.value for m in CurveMethod])
    _int("merge.n_paths", p["n_paths"], 1)
    _int("merge.abs_depth", p["abs_depth"], 1)
    _names("merge.candidates", p["candidates"], config)
    if p["method"] == CurveMethod.monte_carlo.value and config.seed is None:
        raise ConfigInvalid("seed", "Monte Carlo curves need a seed")


def _validate_example1(config: ScenarioConfig) -> None:
    p = config.params
    _int("example1.N", p["N"], 1)
    _int("example1.K", p["K"], 1)
    _reference("example1.reference", p["reference"], config)
    if config.alphabet != 2:
        raise ConfigInvalid("alphabet", "the example1 scenario is binary")


def _validate_bdtest(config: ScenarioConfig) -> None:
    p = config.params
    _number("bdtest.epsilon", p["epsilon"], 0, 1)
    _reference("bdtest.reference", p["reference"], config)
    _int("bdtest.max_depth", p["max_depth"], 1)
    _corpus("bdtest.corpus", p["corpus"], config)


def _validate_partition(config: ScenarioConfig) -> None:
    p = config.params
    if not isinstance(p["epsilons"], list) or not p["epsilons"]:
        raise ConfigInvalid("partition.epsilons", "expected a nonempty list")
    for i, value in enumerate(p["epsilons"]):
        _number(f"partition.epsilons[{i}]", value, 0, 1)
    _int("partition.max_depth", p["max_depth"], 1)
    _corpus("partition.corpus", p["corpus"], config)


def _validate_manipulate(config: ScenarioConfig) -> None:
    p = config.params
    _choice("manipulate.test", p["test"], MANIPULATION_TESTS)
    horizon = _int("manipulate.horizon", p["horizon"], 1)
    try:
        check_enumerable(config.alphabet, horizon)
    except ExpertestError as e:
        raise ConfigInvalid("manipulate.horizon", e.message)
    epsilon = _number("manipulate.epsilon", p["epsilon"], 0, 1)
    if epsilon >= 1:
        raise ConfigInvalid("manipulate.epsilon", "expected a number below 1")
    _number("manipulate.delta", p["delta"], 0, 1 - epsilon)
    _int("manipulate.max_iters", p["max_iters"], 1)
    _number("manipulate.tol", p["tol"], 0, 1)
    if p["initial"] != "uniform":
        _names("manipulate.initial", p["initial"], config)


def _validate_game(config: ScenarioConfig) -> None:
    p = config.params
    if (p["payoffs"] is None) == (p["matrix_file"] is None):
        raise ConfigInvalid("game", "set exactly one of 'payoffs' and 'matrix_file'")
    if p["payoffs"] is not None:
        rows = p["payoffs"]
        if (
            not isinstance(rows, list)
            or not rows
            or not all(isinstance(row, list) and len(row) == len(rows[0]) for row in rows)
            or not rows[0]
        ):
            raise ConfigInvalid("game.payoffs", "expected a nonempty rectangular list of rows")
        for i, row in enumerate(rows):
            for value in row:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigInvalid(f"game.payoffs[{i}]", f"expected numbers, got {value!r}")
    elif not config.resolve(str(p["matrix_file"])).is_file():
        raise ConfigInvalid("game.matrix_file", f"no such file: {p['matrix_file']}")
    _choice("game.method", p["method"], GAME_METHODS)
    _number("game.tol", p["tol"], 0, float("inf"))
    _int("game.max_iters", p["max_iters"], 1)


VALIDATORS: Dict[str, Callable[[ScenarioConfig], None]] = {
    "merge": _validate_merge,
    "example1": _validate_example1,
    "bdtest": _validate_bdtest,
    "partition": _validate_partition,
    "manipulate": _validate_manipulate,
    "game": _validate_game,
}

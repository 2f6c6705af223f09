"""Experiment configuration: flat INI-style files with one section per concern.

A config round-trips losslessly through its file form, and `config_hash` is
stable under that round trip, so run records can prove which configuration
produced them.  Values that accept comma-separated lists (`spectral_radius`,
`density`, `leak_rate`, `ridge`, `input_scaling`, `noise`) define grid axes;
single-point commands reject multi-valued entries.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError

GRIDDABLE = ("spectral_radius", "density", "leak_rate", "ridge", "input_scaling", "noise")


@dataclass(frozen=True)
class TaskSection:
    name: str = "mgs"  # mgs | lorenz | sunspot | custom
    washout: int = 1000
    train: int = 3000
    validate: int = 0
    test: int = 2084
    horizon: int = 84  # free-run length inside the test region; 0 = one-step task
    data_seed: int = 1234
    data_path: str = ""  # sunspot / custom tasks
    # Mackey-Glass knobs
    tau: float = 17.0
    alpha: float = 0.2
    beta: float = 10.0
    gamma: float = 0.1
    integration_step: float = 0.1
    subsample: int = 10
    method: str = "euler"
    squash: bool = False
    # Lorenz knobs
    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    step: float = 0.01

    @property
    def total_len(self):
        return self.washout + self.train + self.validate + self.test


@dataclass(frozen=True)
class EsnSection:
    units: int = 1000
    density: tuple = (0.2,)
    spectral_radius: tuple = (0.8,)
    input_scaling: tuple = (1.0,)
    reservoir_scaling: float = 1.0
    leak_rate: tuple = (1.0,)
    noise: tuple = (1e-10,)
    ridge: tuple = (1e-9,)
    bias: float | None = 0.2
    wiring: str = "input"  # input | feedback
    feedback_scaling: float | None = None
    readout: str = "identity"
    activation: str = "tanh"
    clamp: bool = True
    clamp_margin: float = 0.1

    def single(self, name):
        vals = getattr(self, name)
        if len(vals) != 1:
            raise ConfigurationError(f"esn.{name} must be a single value here, got {vals}")
        return vals[0]

    def is_single_point(self):
        return all(len(getattr(self, n)) == 1 for n in GRIDDABLE)


@dataclass(frozen=True)
class GaSection:
    population: int = 20
    generations: int = 70
    tournament: int = 3
    crossover_prob: float = 0.5
    mutation_prob: float = 0.15
    mutation_sigma: float | None = None  # None = auto from generation 0
    sigma_scale: float = 0.1
    mutation_indpb: float = 1.0
    sigma_decay: float = 1.0
    coefficients: int = 500
    rescale: bool = True
    elitism: bool = False
    fitness_tasks: int = 12
    fitness_horizon: int = 300
    fitness_metric: str = "nrmse"
    fitness_mode: str = "free_run"
    penalty: float = 1e6
    stall_generations: int = 25
    stall_tolerance: float = 1e-6
    checkpoint_every: int = 10


@dataclass(frozen=True)
class RunSection:
    seed: int = 42
    repeats: int = 1
    out: str = "runs/run"
    plots: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskSection = field(default_factory=TaskSection)
    esn: EsnSection = field(default_factory=EsnSection)
    ga: GaSection = field(default_factory=GaSection)
    run: RunSection = field(default_factory=RunSection)


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _parse_scalar(text, target):
    text = text.strip()
    if target is bool:
        if text.lower() in ("true", "1", "yes", "on"):
            return True
        if text.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigurationError(f"cannot parse boolean from {text!r}")
    if target is int:
        return int(text)
    if target is float:
        return float(text)
    return text


_OPTIONAL_FLOATS = {"bias", "feedback_scaling", "mutation_sigma"}
_TUPLE_FIELDS = {"density", "spectral_radius", "input_scaling", "leak_rate", "noise", "ridge"}
_SECTION_TYPES = {"task": TaskSection, "esn": EsnSection, "ga": GaSection, "run": RunSection}


def _coerce(section_cls, key, text):
    defaults = section_cls()
    if not hasattr(defaults, key):
        raise ConfigurationError(f"unknown option {key!r} in section [{_section_name(section_cls)}]")
    if key in _TUPLE_FIELDS:
        return tuple(float(p) for p in text.split(","))
    if key in _OPTIONAL_FLOATS:
        return None if text.strip().lower() == "none" else float(text)
    current = getattr(defaults, key)
    if current is None:
        return text.strip()
    return _parse_scalar(text, type(current))


def _section_name(cls):
    return {v: k for k, v in _SECTION_TYPES.items()}[cls]


def to_ini(config):
    out = io.StringIO()
    for name in ("task", "esn", "ga", "run"):
        section = getattr(config, name)
        out.write(f"[{name}]\n")
        for key in sorted(vars(section)):
            out.write(f"{key} = {_fmt(getattr(section, key))}\n")
        out.write("\n")
    return out.getvalue()


def from_ini(text):
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse config: {exc}") from exc
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        kwargs = {}
        if parser.has_section(name):
            for key, value in parser.items(name):
                kwargs[key] = _coerce(cls, key, value)
        try:
            sections[name] = cls(**kwargs)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
    return ExperimentConfig(**sections)


def load_config(path):
    with open(path) as fh:
        return from_ini(fh.read())


def save_config(config, path):
    with open(path, "w") as fh:
        fh.write(to_ini(config))


def config_hash(config):
    return hashlib.sha256(to_ini(config).encode()).hexdigest()[:16]


def apply_overrides(config, overrides):
    """Apply `section.key=value` strings on top of a config."""
    patched = {name: dict(vars(getattr(config, name))) for name in _SECTION_TYPES}
    for item in overrides:
        try:
            dotted, value = item.split("=", 1)
            section, key = dotted.strip().split(".", 1)
        except ValueError as exc:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}") from exc
        if section not in _SECTION_TYPES:
            raise ConfigurationError(f"unknown config section {section!r}")
        patched[section][key] = _coerce(_SECTION_TYPES[section], key.strip(), value)
    try:
        return ExperimentConfig(**{name: cls(**patched[name]) for name, cls in _SECTION_TYPES.items()})
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def preset(name):
    """Paper-scale task presets; see the README for the provenance of each value."""
    if name == "mgs":
        return ExperimentConfig(
            task=TaskSection(name="mgs", washout=1000, train=3000, validate=2000, test=2084,
                             horizon=84),
            esn=EsnSection(units=1000, density=(0.2,), spectral_radius=(0.8,), noise=(1e-10,),
                           ridge=(1e-9,), bias=0.2, wiring="input", readout="identity"),
            ga=GaSection(coefficients=500, generations=70, fitness_tasks=12, fitness_horizon=300,
                         fitness_metric="nrmse", elitism=True, mutation_indpb=0.25, sigma_scale=0.3),
        )
    if name == "lorenz":
        return ExperimentConfig(
            task=TaskSection(name="lorenz", washout=1000, train=6000, validate=1000, test=1600,
                             horizon=600),
            esn=EsnSection(units=600, density=(0.2,), spectral_radius=(0.97,), noise=(1e-7,),
                           ridge=(1e-6,), bias=None, wiring="feedback", feedback_scaling=4.0,
                           readout="identity"),
            ga=GaSection(coefficients=150, generations=150, fitness_tasks=4, fitness_horizon=200,
                         fitness_metric="nrmse", elitism=True, mutation_indpb=0.25, sigma_scale=0.3),
        )
    if name == "sunspot":
        return ExperimentConfig(
            task=TaskSection(name="sunspot", washout=100, train=1600, validate=500, test=1076,
                             horizon=0),
            esn=EsnSection(units=200, density=(0.2,), spectral_radius=(0.9,), input_scaling=(0.1,),
                           noise=(0.0,), ridge=(1e-5,), bias=0.1, wiring="input",
                           leak_rate=(0.7,), readout="identity", clamp=False),
            ga=GaSection(coefficients=50, generations=150, fitness_tasks=1, fitness_horizon=0,
                         fitness_metric="nmse", fitness_mode="one_step", elitism=True,
                         mutation_indpb=0.25, sigma_scale=0.3),
        )
    raise ConfigurationError(f"unknown preset {name!r} (expected mgs, lorenz or sunspot)")

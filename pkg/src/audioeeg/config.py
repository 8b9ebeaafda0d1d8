"""Experiment configuration: flat key = value sections, lossless round-trip.

One master seed lives in [experiment] and is propagated into every
sub-config on load, so a config file plus nothing else pins a whole run.
The config hash is the SHA-256 of the canonical rendering; any field change
changes the hash.
"""

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, field, fields, replace

from .pipeline import PreprocessConfig, TrainConfig
from .retrieval import RetrievalConfig
from .synth import SynthSpec
from .validation import ValidationError, require


@dataclass
class ExperimentConfig:
    seed: int = 0
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        self.train = replace(self.train, seed=self.seed)
        self.retrieval = replace(self.retrieval, seed=self.seed)
        self.synth = replace(self.synth, seed=self.seed)


_SECTIONS = ("preprocess", "train", "retrieval", "synth")


def _render_value(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text, target_type, name):
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
        if target_type is tuple:
            return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ValidationError(f"config field {name}: cannot parse {text!r}")
    raise ValidationError(f"config field {name}: unsupported type {target_type}")


def render_config(cfg):
    """Canonical text form (sections and keys in fixed order)."""
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write(f"seed = {cfg.seed}\n\n")
    for section in _SECTIONS:
        sub = getattr(cfg, section)
        out.write(f"[{section}]\n")
        for f in fields(sub):
            if f.name == "seed":
                continue  # the master seed governs every stage
            out.write(f"{f.name} = {_render_value(getattr(sub, f.name))}\n")
        out.write("\n")
    return out.getvalue()


def save_config(cfg, path):
    from .dataio import atomic_write_text

    return atomic_write_text(path, render_config(cfg))


def load_config(path):
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    require(parser.has_section("experiment") and parser.has_option("experiment", "seed"),
            f"{path}: missing [experiment] seed")
    seed = int(parser.get("experiment", "seed"))
    kwargs = {"seed": seed}
    for section, cls in (("preprocess", PreprocessConfig), ("train", TrainConfig),
                         ("retrieval", RetrievalConfig), ("synth", SynthSpec)):
        values = {}
        if parser.has_section(section):
            known = {f.name: f for f in fields(cls)}
            for key, raw in parser.items(section):
                require(key in known, f"{path}: unknown key {key!r} in [{section}]")
                f = known[key]
                target = (tuple if isinstance(f.default, tuple) else f.type)
                values[key] = _parse_value(raw, target, f"{section}.{key}")
        kwargs[section] = cls(**values)
    return ExperimentConfig(**kwargs)


def config_hash(cfg):
    return hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()

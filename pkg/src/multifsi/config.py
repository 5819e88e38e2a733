"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Boxes are written as four
comma-separated numbers ``x0, x1, y0, y1``.  Unknown keys are rejected.
When a config file is supplied it must state ``material.mu`` and
``material.lambda_lame``; every other key has a default.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .fem import MaterialParams
from .geometry import Box, GeometryConfig

COMMANDS = ("resolvent", "evolve", "infsup", "verify")
REQUIRED_KEYS = ("material.mu", "material.lambda_lame")


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    material: MaterialParams = field(default_factory=MaterialParams)
    command: str = "verify"
    output_dir: Path = Path("multifsi_out")
    export_fields: bool = False
    seed: int = 0
    datum: str = "structure_bump"
    n_steps: int = 100
    snapshot_every: int = 0
    levels: tuple = (0, 1, 2)
    n_random: int = 3

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.n_steps < 0 or self.snapshot_every < 0 or self.n_random < 1:
            raise ConfigurationError("run.n_steps and run.snapshot_every must be >= 0, run.n_random >= 1")
        if not self.levels or min(self.levels) < 0:
            raise ConfigurationError("run.levels must list nonnegative refinement levels")

    def echo(self) -> list[str]:
        """Canonical ``key = value`` lines, parseable by :func:`parse_config`."""
        g, m = self.geometry, self.material

        def box(b):
            return ", ".join(repr(float(v)) for v in (b.x0, b.x1, b.y0, b.y1))

        return [
            f"geometry.outer_box = {box(g.outer_box)}",
            f"geometry.inner_box = {box(g.inner_box)}",
            f"geometry.refinement_level = {g.refinement_level}",
            f"geometry.base_h = {g.base_h!r}",
            *(f"material.{k} = {v!r}" for k, v in asdict(m).items()),
            f"run.export_fields = {str(self.export_fields).lower()}",
            f"run.seed = {self.seed}",
            f"run.datum = {self.datum}",
            f"run.n_steps = {self.n_steps}",
            f"run.snapshot_every = {self.snapshot_every}",
            f"run.levels = {', '.join(map(str, self.levels))}",
            f"run.n_random = {self.n_random}",
        ]


def _box(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError("expected four numbers x0, x1, y0, y1")
    return Box(*parts)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _levels(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


# key -> (target, converter)
_KEYS = {
    "geometry.outer_box": ("geometry", "outer_box", _box),
    "geometry.inner_box": ("geometry", "inner_box", _box),
    "geometry.refinement_level": ("geometry", "refinement_level", int),
    "geometry.base_h": ("geometry", "base_h", float),
    "material.mu": ("material", "mu", float),
    "material.lambda_lame": ("material", "lambda_lame", float),
    "material.lambda_res": ("material", "lambda_res", float),
    "material.dt": ("material", "dt", float),
    "run.output_dir": ("run", "output_dir", Path),
    "run.export_fields": ("run", "export_fields", _bool),
    "run.seed": ("run", "seed", int),
    "run.datum": ("run", "datum", str),
    "run.n_steps": ("run", "n_steps", int),
    "run.snapshot_every": ("run", "snapshot_every", int),
    "run.levels": ("run", "levels", _levels),
    "run.n_random": ("run", "n_random", int),
}


def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def build_config(pairs: dict[str, str], command: str = "verify", require: bool = True) -> RunConfig:
    if require:
        for key in REQUIRED_KEYS:
            if key not in pairs:
                raise ConfigurationError(f"missing required key {key!r}")
    parts = {"geometry": {}, "material": {}, "run": {}}
    for key, value in pairs.items():
        section, name, conv = _KEYS[key]
        try:
            parts[section][name] = conv(value)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(f"bad value for {key!r}: {exc}") from exc
    return RunConfig(GeometryConfig(**parts["geometry"]), MaterialParams(**parts["material"]),
                     command, **parts["run"])


def parse_config(text: str, command: str = "verify", source: str = "<config>") -> RunConfig:
    return build_config(parse_pairs(text, source), command)


def load_config(path, command: str = "verify") -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, command, str(path))

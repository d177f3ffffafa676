"""Engine configuration.

An INI file with one section per component. Every key is optional and
defaults to the published configuration, so an empty file is a valid
config. Example::

    [engine]
    window = 128
    stride = 64
    profile = ucf
    workers = 4

    [post]
    alpha = 0.05

    [backend.vlm]
    kind = http
    endpoint = http://localhost:8000
    model = qwen3-vl-4b

Post-processing defaults follow the selected profile unless ``[post]`` sets
them. Relative file paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .agent import LoopConfig
from .backends import BackendConfig
from .frames import MotionConfig
from .memory import MemoryConfig
from .postprocess import PROFILE_POST, PostConfig
from .prompts import PROFILE_IDS, get_profile, load_prompt


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class EngineConfig:
    window: int = 128
    stride: int = 64
    profile: str = "ucf"
    prompt_file: str = ""
    workers: int = 1
    output: str = "out"
    serialize_phases: bool = False
    motion: MotionConfig = field(default_factory=MotionConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    post: PostConfig = field(default_factory=PostConfig)
    vlm: BackendConfig = field(default_factory=BackendConfig)
    llm: BackendConfig = field(default_factory=BackendConfig)
    encoder: BackendConfig = field(default_factory=lambda: BackendConfig(kind="builtin"))

    def violations(self) -> list[str]:
        out = []
        if self.window < 1:
            out.append("engine.window: must be >= 1")
        if not 1 <= self.stride <= self.window:
            out.append("engine.stride: need 1 <= stride <= window")
        if self.workers < 1:
            out.append("engine.workers: must be >= 1")
        if self.profile not in PROFILE_IDS:
            out.append(f"engine.profile: unknown profile {self.profile!r}")
        out += self.motion.violations()
        out += self.loop.violations()
        out += self.memory.violations()
        out += self.post.violations()
        out += self.vlm.violations("backend.vlm")
        out += self.llm.violations("backend.llm")
        if self.encoder.kind not in ("builtin", "http"):
            out.append("backend.encoder.kind: must be 'builtin' or 'http'")
        elif self.encoder.kind == "http" and not self.encoder.endpoint:
            out.append("backend.encoder: http encoder requires endpoint")
        out += self._file_violations()
        return out

    def _file_violations(self) -> list[str]:
        out = []
        try:
            for name in ("vlm_initial", "vlm_focused", "question"):
                load_prompt(name)
            if self.profile in PROFILE_IDS:
                get_profile(self.profile, self.prompt_file or None)
        except OSError as exc:
            out.append(f"engine.prompt_file: prompt not readable ({exc})")
        for key, cfg in (("backend.vlm", self.vlm), ("backend.llm", self.llm)):
            if cfg.kind == "scripted" and cfg.scenario and not Path(cfg.scenario).is_file():
                out.append(f"{key}.scenario: file not found: {cfg.scenario}")
        return out


_SECTIONS = {
    "motion": MotionConfig,
    "loop": LoopConfig,
    "memory": MemoryConfig,
    "post": PostConfig,
    "backend.vlm": BackendConfig,
    "backend.llm": BackendConfig,
    "backend.encoder": BackendConfig,
}
_ENGINE_KEYS = ("window", "stride", "profile", "prompt_file", "workers", "output", "serialize_phases")
_PATH_KEYS = {"scenario", "prompt_file"}


def _convert(raw: str, like, key: str, base: Path):
    if isinstance(like, bool):
        value = raw.strip().lower()
        if value in ("1", "true", "yes", "on"):
            return True
        if value in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if key in _PATH_KEYS and raw:
        p = Path(raw).expanduser()
        return str(p if p.is_absolute() else base / p)
    return raw


def _build(cls, defaults, section, prefix: str, base: Path, errors: list[str]):
    values = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key not in names:
            errors.append(f"{prefix}.{key}: unknown key")
            continue
        try:
            values[key] = _convert(raw, getattr(defaults, key), key, base)
        except ValueError as exc:
            errors.append(f"{prefix}.{key}: {exc}")
    return dataclasses.replace(defaults, **values)


def read_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> tuple[EngineConfig, list[str]]:
    """Parse a config file and collect every problem instead of stopping at the first.

    ``overrides`` maps dotted keys (``"engine.profile"``,
    ``"backend.vlm.kind"``) to raw string values applied over the file.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    base = Path.cwd()
    errors: list[str] = []
    if path is not None:
        path = Path(path)
        base = path.resolve().parent
        try:
            parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
        except (OSError, configparser.Error) as exc:
            return EngineConfig(), [f"config: cannot read {path}: {exc}"]
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.rpartition(".")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))

    for name in parser.sections():
        if name != "engine" and name not in _SECTIONS:
            errors.append(f"{name}: unknown section")

    engine = EngineConfig()
    if parser.has_section("engine"):
        engine_values = {}
        for key, raw in parser.items("engine"):
            if key not in _ENGINE_KEYS:
                errors.append(f"engine.{key}: unknown key")
                continue
            try:
                engine_values[key] = _convert(raw, getattr(engine, key), key, base)
            except ValueError as exc:
                errors.append(f"engine.{key}: {exc}")
        engine = dataclasses.replace(engine, **engine_values)

    post_defaults = PROFILE_POST.get(engine.profile, PostConfig())
    parts = {}
    for name, cls in _SECTIONS.items():
        defaults = post_defaults if name == "post" else getattr(engine, name.rpartition(".")[2])
        section = dict(parser.items(name)) if parser.has_section(name) else {}
        parts[name.rpartition(".")[2]] = _build(cls, defaults, section, name, base, errors)
    engine = dataclasses.replace(engine, **parts)
    return engine, errors + engine.violations()


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> EngineConfig:
    cfg, problems = read_config(path, overrides)
    if problems:
        raise ConfigError(problems)
    return cfg


def parameter_table(cfg: EngineConfig) -> list[tuple[str, object]]:
    """Flattened ``(dotted key, value)`` rows of the effective configuration."""
    rows = [(f"engine.{k}", getattr(cfg, k)) for k in _ENGINE_KEYS]
    for name in _SECTIONS:
        part = getattr(cfg, name.rpartition(".")[2])
        rows += [(f"{name}.{f.name}", getattr(part, f.name)) for f in dataclasses.fields(part)]
    return rows

"""Experiment configuration (INI) and run manifests.

A config file has typed sections::

    [system]
    family = tanh
    kappa = 3
    D = 1
    rotation = golden          ; or comma-separated coordinates
    pinch = 0                  ; comma-separated coordinates, default origin

    [sampling]
    sampler = pseudorandom     ; grid | midpoint | pseudorandom
    n = 100000
    seed = 42
    depth = 1000

    [decay]
    N_list = 10:200:10         ; start:stop:step (inclusive) or a comma list
    threshold = >=0
    N_min = 10

    [certify]
    d = 1.01
    kappa_sweep =              ; comma list; empty means just [system] kappa
    horizon = 100000

    [verify]
    n_samples = 1000
    n_max = 200
    q = 1
    seed = 0

    [constants]                ; optional explicit constant set
    alpha = ...

    [output]
    dir = out

Floats are written with 17 significant digits so a config survives a
write/read cycle unchanged.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .bounds import ConditionConstants
from .ftle import THRESHOLDS
from .system import PinchedSystem, TanhFamily
from .torus import SAMPLERS, RotationVector, TorusPoint

FAMILIES = ("tanh",)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc


def parse_N_list(text: str) -> tuple[int, ...]:
    """``a:b:s`` (inclusive range) or ``n1, n2, ...``."""
    try:
        if ":" in text:
            start, stop, step = (int(s) for s in text.split(":"))
            return tuple(range(start, stop + 1, step))
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"decay.N_list: cannot parse {text!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "tanh"
    kappa: float = 3.0
    D: int = 1
    rotation: str | tuple[float, ...] = "golden"
    pinch: tuple[float, ...] | None = None
    sampler: str = "pseudorandom"
    n_samples: int = 100_000
    seed: int = 42
    depth: int = 1000
    N_list: tuple[int, ...] = tuple(range(10, 201, 10))
    threshold: str = ">=0"
    N_min: int = 10
    d: float = 1.01
    kappa_sweep: tuple[float, ...] = ()
    horizon: int = 100_000
    verify_samples: int = 1000
    verify_n_max: int = 200
    verify_q: int = 1
    verify_seed: int = 0
    constants: ConditionConstants | None = None
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(self.family in FAMILIES, "system.family", f"must be one of {FAMILIES}")
        need(math.isfinite(self.kappa) and self.kappa > 0, "system.kappa", "must be a positive number")
        need(self.D >= 1, "system.D", "must be >= 1")
        if self.rotation != "golden":
            need(isinstance(self.rotation, tuple) and len(self.rotation) == self.D,
                 "system.rotation", f"must be 'golden' or {self.D} coordinates")
        if self.pinch is not None:
            need(len(self.pinch) == self.D, "system.pinch", f"must have {self.D} coordinates")
        need(self.sampler in SAMPLERS, "sampling.sampler", f"must be one of {SAMPLERS}")
        need(self.n_samples >= 1, "sampling.n", "must be >= 1")
        need(self.depth >= 0, "sampling.depth", "must be >= 0")
        need(len(self.N_list) > 0 and self.N_list[0] >= 1 and all(b > a for a, b in zip(self.N_list, self.N_list[1:])),
             "decay.N_list", "must be strictly increasing positive integers")
        need(self.threshold in THRESHOLDS, "decay.threshold", f"must be one of {THRESHOLDS}")
        need(self.N_min >= 1, "decay.N_min", "must be >= 1")
        need(self.d > 1, "certify.d", "must exceed 1")
        need(all(k > 0 for k in self.kappa_sweep), "certify.kappa_sweep", "values must be positive")
        need(self.horizon >= 1, "certify.horizon", "must be >= 1")
        need(self.verify_samples >= 1 and self.verify_n_max >= 1 and self.verify_q >= 1,
             "verify", "n_samples, n_max and q must be >= 1")

    # -- construction --------------------------------------------------------

    def rotation_vector(self) -> RotationVector:
        if self.rotation == "golden":
            return RotationVector.golden(self.D)
        try:
            return RotationVector.from_coords(self.rotation)
        except ValueError as exc:
            raise ConfigError(f"system.rotation: {exc}") from exc

    def system(self, kappa: float | None = None) -> PinchedSystem:
        pinch = None if self.pinch is None else TorusPoint.from_coords(self.pinch)
        try:
            return PinchedSystem(TanhFamily(self.kappa if kappa is None else kappa, self.D), self.rotation_vector(), pinch)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"system: {exc}") from exc

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    # -- INI round trip ------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        rot = "golden" if self.rotation == "golden" else ", ".join(_fmt(x) for x in self.rotation)
        cp["system"] = {"family": self.family, "kappa": _fmt(self.kappa), "D": str(self.D), "rotation": rot}
        if self.pinch is not None:
            cp["system"]["pinch"] = ", ".join(_fmt(x) for x in self.pinch)
        cp["sampling"] = {"sampler": self.sampler, "n": str(self.n_samples), "seed": str(self.seed), "depth": str(self.depth)}
        cp["decay"] = {"N_list": ", ".join(str(n) for n in self.N_list), "threshold": self.threshold, "N_min": str(self.N_min)}
        cp["certify"] = {
            "d": _fmt(self.d),
            "kappa_sweep": ", ".join(_fmt(k) for k in self.kappa_sweep),
            "horizon": str(self.horizon),
        }
        cp["verify"] = {
            "n_samples": str(self.verify_samples), "n_max": str(self.verify_n_max),
            "q": str(self.verify_q), "seed": str(self.verify_seed),
        }
        if self.constants is not None:
            cp["constants"] = {
                k: (str(v) if isinstance(v, int) else _fmt(v))
                for k, v in self.constants.to_dict().items() if v is not None
            }
        cp["output"] = {"dir": self.out}
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in cp[name].items()]
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        known = {"system", "sampling", "decay", "certify", "verify", "constants", "output"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        kw: dict = {}

        def get(section, key, conv, dest):
            if cp.has_option(section, key):
                raw = cp.get(section, key).strip()
                try:
                    kw[dest] = conv(raw)
                except ConfigError:
                    raise
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc

        get("system", "family", str, "family")
        get("system", "kappa", float, "kappa")
        get("system", "D", int, "D")
        get("system", "rotation", lambda s: "golden" if s == "golden" else _floats(s, "system.rotation"), "rotation")
        get("system", "pinch", lambda s: _floats(s, "system.pinch"), "pinch")
        get("sampling", "sampler", str, "sampler")
        get("sampling", "n", int, "n_samples")
        get("sampling", "seed", int, "seed")
        get("sampling", "depth", int, "depth")
        get("decay", "N_list", parse_N_list, "N_list")
        get("decay", "threshold", str, "threshold")
        get("decay", "N_min", int, "N_min")
        get("certify", "d", float, "d")
        get("certify", "kappa_sweep", lambda s: _floats(s, "certify.kappa_sweep"), "kappa_sweep")
        get("certify", "horizon", int, "horizon")
        get("verify", "n_samples", int, "verify_samples")
        get("verify", "n_max", int, "verify_n_max")
        get("verify", "q", int, "verify_q")
        get("verify", "seed", int, "verify_seed")
        get("output", "dir", str, "out")
        if cp.has_section("constants"):
            names = {f.name: f.type for f in fields(ConditionConstants)}
            data = {}
            for k, v in cp["constants"].items():
                if k not in names:
                    raise ConfigError(f"constants.{k}: unknown constant")
                try:
                    data[k] = int(v) if k == "m" else float(v)
                except ValueError as exc:
                    raise ConfigError(f"constants.{k}: cannot parse {v!r}") from exc
            missing = set(names) - set(data) - {"kappa0"}
            if missing:
                raise ConfigError(f"constants: missing {sorted(missing)}")
            kw["constants"] = ConditionConstants(**data)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    version: str
    started: float = field(default_factory=time.time)
    wall_seconds: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)   # file name -> sha256
    config: str = ""

    def stage(self, name: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                manifest.timings[name] = time.perf_counter() - self.t0

        return _Timer()

    def record(self, path) -> None:
        path = Path(path)
        self.outputs[path.name] = file_digest(path)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, out_dir) -> Path:
        self.wall_seconds = time.time() - self.started
        path = Path(out_dir) / "manifest.json"
        path.write_text(self.to_json())
        return path

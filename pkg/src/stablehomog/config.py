"""Run configuration for the command line: serializable, hashable, mirrored by flags."""

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .model import CoefficientModel
from .presets import PRESETS, get_preset
from .storage import canonical_json, sha256_of

CACHE_ENV = "STABLEHOMOG_CACHE_DIR"


@dataclass
class RunConfig:
    """Everything a run needs besides the subcommand name.

    ``model`` is either a preset name or a path to a model definition
    file (JSON of the model's serialized form).  The hash of the
    canonical serialization identifies cached artifacts, so two configs
    with equal fields share cache entries regardless of field order.
    """

    model: str = "constant"
    out_dir: str = "out"
    seed: int = 0
    cache: bool = True
    cache_dir: str | None = None
    n_workers: int = 1

    epsilon: tuple = (0.5, 0.25, 0.125)
    t: float = 0.05
    x_n: int = 16
    n_paths: int = 4000
    dt: float = 1e-3
    small_jumps: str = "gaussian"   # or "discard"
    delta: float | None = None      # jump-size cutoff; None ties it to dt

    n_chains: int = 32
    n_steps: int = 20000
    burn: float | None = None   # steps if >= 1, fraction if < 1, None = auto
    bins: int = 64

    n: int = 128                    # collocation grid per axis
    sphere_n: int = 64
    mc_n: int = 20000
    kappa: float = 1.0
    tol: float = 1e-6

    def __post_init__(self):
        self.epsilon = tuple(float(e) for e in self.epsilon)
        if self.small_jumps not in ("gaussian", "discard"):
            raise ValueError("small_jumps must be 'gaussian' or 'discard'")
        if any(e <= 0 for e in self.epsilon):
            raise ValueError("scale separations must be positive")
        if self.n_paths <= 0 or self.x_n <= 0 or self.n <= 0:
            raise ValueError("budgets must be positive")

    def to_spec(self) -> dict:
        spec = dataclasses.asdict(self)
        spec["epsilon"] = list(self.epsilon)
        return spec

    @classmethod
    def from_spec(cls, spec: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(spec) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**spec)

    def config_hash(self) -> str:
        return sha256_of(canonical_json(self.to_spec()))[:16]

    def resolve_cache_dir(self) -> str:
        if self.cache_dir:
            return self.cache_dir
        env = os.environ.get(CACHE_ENV)
        if env:
            return env
        return os.path.join(self.out_dir, "cache")


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_spec(json.load(fh))


def load_model(name_or_path: str) -> CoefficientModel:
    """Resolve a preset name or parse a model definition file."""
    if name_or_path in PRESETS:
        return get_preset(name_or_path)
    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            return CoefficientModel.from_spec(json.load(fh))
    raise FileNotFoundError(
        f"{name_or_path!r} is neither a preset ({', '.join(sorted(PRESETS))}) "
        "nor a model file"
    )


def save_model(path, model: CoefficientModel):
    with open(path, "w") as fh:
        json.dump(model.to_spec(), fh, indent=2, sort_keys=True)
        fh.write("\n")

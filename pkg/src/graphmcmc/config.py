"""Experiment configuration: one YAML file, validated strictly.

Unknown keys anywhere are rejected so that shipped reproduction configs
cannot silently drift. Relative paths are resolved against the config
file's directory.
"""

from pathlib import Path
from typing import Annotated, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(Exception):
    """Raised for unreadable, malformed or inconsistent configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BananaSimulation(_Strict):
    n: int = Field(100, ge=1)
    theta_true: tuple[float, float] = (1.0, 0.0)
    seed: int | None = None


class LgmSimulation(_Strict):
    n: int = Field(100, ge=1)
    tau: float = Field(1.0, gt=0)
    h: float = Field(0.25, gt=0)
    r: float = Field(2.0, gt=0)
    seed: int | None = None


class GmmSpec(_Strict):
    weights: list[float]
    means: list[list[float]]
    covariances: list[list[list[float]]]


class GmmTargetConfig(GmmSpec):
    kind: Literal["gmm"]


class BananaTargetConfig(_Strict):
    kind: Literal["banana"]
    data: Path | None = None
    simulate: BananaSimulation | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.data is None) == (self.simulate is None):
            raise ValueError("banana target needs exactly one of 'data' or 'simulate'")
        return self


class LgmTargetConfig(_Strict):
    kind: Literal["lgm"]
    data: Path | None = None
    simulate: LgmSimulation | None = None
    jitter: float = Field(1e-8, gt=0)
    max_jitter: float = Field(1e-4, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.data is None) == (self.simulate is None):
            raise ValueError("lgm target needs exactly one of 'data' or 'simulate'")
        return self


class CustomTargetConfig(_Strict):
    kind: Literal["custom"]
    callable: str = Field(description="'module:function' mapping theta to a log density")
    dim: int = Field(ge=1)


TargetConfig = Annotated[
    GmmTargetConfig | BananaTargetConfig | LgmTargetConfig | CustomTargetConfig,
    Field(discriminator="kind"),
]


class MixtureSource(GmmSpec):
    m: int = Field(ge=2)
    seed: int | None = None


class SubsampleSource(_Strict):
    """Take ``m`` draws from a baseline chain after ``burn_in``, every ``stride``."""

    iterations: int = Field(ge=1)
    burn_in: int = Field(0, ge=0)
    stride: int = Field(1, ge=1)
    m: int = Field(ge=2)
    seed: int | None = None


class ApproxConfig(_Strict):
    csv: Path | None = None
    mixture: MixtureSource | None = None
    baseline_subsample: SubsampleSource | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("csv", "mixture", "baseline_subsample") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"exactly one approximate-sample source is required, got {given or 'none'}")
        return self


class TuneConfig(_Strict):
    kappa_grid: list[Annotated[float, Field(gt=0)]] = Field(min_length=1)
    r_grid: list[Annotated[int, Field(ge=0)]] = Field(min_length=1)


class WalkConfig(_Strict):
    support: Literal["graph", "complete"] = "graph"
    radius: int = Field(1, ge=1)
    exclusion: float = Field(0.0, ge=0)
    tolerance: float = Field(1e-6, gt=0)
    max_iterations: int = Field(2000, ge=1)
    use_in_run: bool = False


class GraphConfig(_Strict):
    metric: Literal["euclidean", "mahalanobis"] = "euclidean"
    kappa: float = Field(1.0, gt=0)
    r: int = Field(3, ge=0)
    algorithm: Literal["prim", "kruskal"] = "prim"
    truncation: float | None = Field(None, gt=0)
    radial_jacobian: bool = True
    tune: TuneConfig | None = None
    walk: WalkConfig | None = None


class BaselineConfig(_Strict):
    kind: Literal["rwm", "lgm_gibbs"] = "rwm"
    proposal: Literal["uniform_box", "gaussian"] = "gaussian"
    step_size: float = Field(1.0, gt=0)


class RunBlock(_Strict):
    w: float = Field(0.3, ge=0, lt=1)
    n_iterations: int = Field(10_000, ge=1)
    burn_in: int = Field(0, ge=0)
    thinning: int = Field(1, ge=1)
    record: list[int] | None = None
    theta0: list[float] | None = None
    compare_baseline: bool = True
    baseline: BaselineConfig = BaselineConfig()

    @model_validator(mode="after")
    def _burn(self):
        if self.burn_in >= self.n_iterations:
            raise ValueError("burn_in must be smaller than n_iterations")
        return self


class ScalingSetting(_Strict):
    n: int = Field(ge=1)
    m: int = Field(ge=2)


class ScalingConfig(_Strict):
    settings: list[ScalingSetting] = Field(min_length=1)
    replicates: int = Field(5, ge=1)
    tau: float = Field(1.0, gt=0)
    h: float = Field(0.25, gt=0)
    r_true: float = Field(2.0, gt=0)
    gibbs_iterations: int = Field(2000, ge=1)
    gibbs_burn_in: int = Field(400, ge=0)
    iterations: int = Field(2000, ge=1)
    w: float = Field(0.5, gt=0, lt=1)
    r: int = Field(3, ge=0)
    kappa: float = Field(1.0, gt=0)
    metric: Literal["euclidean", "mahalanobis"] = "mahalanobis"
    radial_jacobian: bool = True

    @model_validator(mode="after")
    def _enough_draws(self):
        kept = self.gibbs_iterations - self.gibbs_burn_in
        for s in self.settings:
            if s.m > kept:
                raise ValueError(f"m={s.m} exceeds the {kept} post-burn-in Gibbs draws")
        return self


class DiagnoseConfig(_Strict):
    samples: Path | None = None
    max_lag: int | None = Field(None, ge=1)


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = 0
    out: Path | None = None
    target: TargetConfig
    approx: ApproxConfig | None = None
    graph: GraphConfig = GraphConfig()
    run: RunBlock = RunBlock()
    scaling: ScalingConfig | None = None
    diagnose: DiagnoseConfig = DiagnoseConfig()

    @field_validator("name")
    @classmethod
    def _name(cls, v):
        if not v or "/" in v:
            raise ValueError("name must be a non-empty string without '/'")
        return v


def _resolve(cfg, base):
    def fix(p):
        return p if p is None or p.is_absolute() else (base / p).resolve()

    t = cfg.target
    if getattr(t, "data", None) is not None:
        t.data = fix(t.data)
        if not t.data.is_file():
            raise ConfigError(f"target data file not found: {t.data}")
    if cfg.approx is not None and cfg.approx.csv is not None:
        cfg.approx.csv = fix(cfg.approx.csv)
        if not cfg.approx.csv.is_file():
            raise ConfigError(f"approximate-sample file not found: {cfg.approx.csv}")
    cfg.out = fix(cfg.out)
    cfg.diagnose.samples = fix(cfg.diagnose.samples)
    return cfg


def parse_config(data, base_dir="."):
    """Validate a mapping; raises :class:`ConfigError` with pydantic's message."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return _resolve(cfg, Path(base_dir).resolve())


def load_config(path):
    path = Path(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(data, path.parent)

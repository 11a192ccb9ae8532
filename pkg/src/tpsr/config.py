"""Functions and classes for handling experiment configuration.

A configuration file is a dotenv file of flat `KEY=value` pairs. The
key prefix names the section (`ENV_`, `ARENA_`, `COLLECT_`,
`FEATURES_`, `LEARN_`, `PLAN_`, `REWARD_`, `EVAL_`) and the rest of the
key names a field of that section, so `PLAN_GAMMA=0.9` sets
`ExperimentConfig.plan.gamma`. The root seed is the key `SEED`.
"""

import inspect
import os
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import dotenv
import numpy as np

import tpsr
from tpsr.envs.arena import VisionArena
from tpsr.envs.environment import RewardSpec
from tpsr.errors import ConfigError
from tpsr.learning.spectral import LearnConfig
from tpsr.model.tpsr import PROBABILITY_FLOOR
from tpsr.planning.perseus import PlannerConfig

#: Independent random streams derived from the root seed.
COLLECT_STREAM, FEATURES_STREAM, PLAN_STREAM, EVAL_STREAM = range(4)

TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


def _find_directory(kind: str, what: str | None = None) -> Path:
    """
    Find a directory in the root of the tpsr installation.

    Parameters
    ----------
    kind : str
        The category of directory to find. Typically `data` or `out`.
    what : str, optional
        The name of the directory in `kind` to find. If not specified,
        then `kind` is treated as the name of the directory.

    Returns
    -------
    where : pathlib.Path
        Path object to the directory.
    """

    where = Path(inspect.getfile(tpsr)).parent.parent.parent / kind

    if what is not None:
        where /= what

    return where


def load_environment(path: None | str = None) -> dict[str, None | str]:
    """
    Load the configuration file as a dictionary.

    Parameters
    ----------
    path : str, optional
        Location of the configuration file to load. If not specified,
        try to load the configuration file from the root of the tpsr
        installation called `.env`.

    Returns
    -------
    config : collections.OrderedDict
        Mapping of the key-value pairs in the configuration file.
    """

    if path is None:
        path = os.path.join(TPSR_ROOT, ".env")

    return dotenv.dotenv_values(path)


@dataclass(frozen=True)
class EnvConfig:
    """
    Which environment to run.

    Parameters
    ----------
    kind : str
        `arena` for the camera robot or `pomdp` for a discrete POMDP.
    pomdp_path : str
        POMDP spec file used when `kind` is `pomdp`.
    """

    kind: str = "arena"
    pomdp_path: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("arena", "pomdp"):
            raise ConfigError(f"ENV_KIND must be 'arena' or 'pomdp', got {self.kind!r}")
        if self.kind == "pomdp" and not self.pomdp_path:
            raise ConfigError("ENV_POMDP_PATH is required when ENV_KIND is 'pomdp'")


@dataclass(frozen=True)
class CollectConfig:
    """
    Size of the training set and its split.

    `center_fraction` of the trajectories (the leading ones) supply the
    kernel centres; the remaining trajectories are used for estimation.
    """

    num_trajectories: int = 10000
    trajectory_len: int = 7
    center_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.num_trajectories < 1 or self.trajectory_len < 1:
            raise ConfigError("Trajectory count and length must be positive")
        if not 0 < self.center_fraction < 1:
            raise ConfigError(
                f"COLLECT_CENTER_FRACTION must lie in (0, 1), got {self.center_fraction}"
            )

    def split(self, count: int) -> int:
        """Number of leading trajectories used for the kernel centres."""
        return min(max(int(round(self.center_fraction * count)), 1), count - 1)


@dataclass(frozen=True)
class FeaturesConfig:
    """
    Window lengths and encoders of the feature map.

    Parameters
    ----------
    kind : str
        `kernel` for Gaussian kernels, `indicator` for one-hot features
        of discrete symbols.
    past_len, future_len : int
        Pairs before the pivot step and pairs of a test.
    indicative_kernels, characteristic_kernels, observation_kernels : int
        Number of kernel centres of each encoder.
    bandwidth : float
        Kernel bandwidth; 0 selects the median heuristic.
    pca_components : int
        Principal components kept by the whitening; 0 keeps all.
    """

    kind: str = "kernel"
    past_len: int = 3
    future_len: int = 3
    indicative_kernels: int = 2000
    characteristic_kernels: int = 2000
    observation_kernels: int = 500
    bandwidth: float = 0.0
    pca_components: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("kernel", "indicator"):
            raise ConfigError(f"FEATURES_KIND must be 'kernel' or 'indicator', got {self.kind!r}")
        if self.past_len < 0 or self.future_len < 1:
            raise ConfigError("FEATURES_PAST_LEN must be >= 0 and FEATURES_FUTURE_LEN >= 1")
        counts = (self.indicative_kernels, self.characteristic_kernels, self.observation_kernels)
        if min(counts) < 1:
            raise ConfigError(f"Kernel counts must be positive, got {counts}")
        if self.bandwidth < 0 or self.pca_components < 0:
            raise ConfigError("FEATURES_BANDWIDTH and FEATURES_PCA_COMPONENTS must be >= 0")

    @property
    def kernel_counts(self) -> tuple[int, int, int]:
        return self.indicative_kernels, self.characteristic_kernels, self.observation_kernels

    @property
    def window_len(self) -> int:
        return self.past_len + 1 + self.future_len


@dataclass(frozen=True)
class PlanSettings:
    """Planner settings; the belief points are embedded training histories."""

    gamma: float = 0.8
    horizon: int = 30
    belief_points: int = 1000
    perseus_subset: int | str = 1
    improvement_tol: float = 1e-6
    renormalize: bool = True
    probability_floor: float = PROBABILITY_FLOOR

    def __post_init__(self) -> None:
        if self.belief_points < 1:
            raise ConfigError(f"PLAN_BELIEF_POINTS must be positive, got {self.belief_points}")

    def planner_config(self, points: np.ndarray, seed: int) -> PlannerConfig:
        return PlannerConfig(
            gamma=self.gamma,
            horizon=self.horizon,
            belief_points=points,
            perseus_subset=self.perseus_subset,
            improvement_tol=self.improvement_tol,
            seed=seed,
            renormalize=self.renormalize,
            probability_floor=self.probability_floor,
        )


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation episodes, their step budget and the anti-stall switch."""

    episodes: int = 100
    max_steps: int = 100
    anti_stall: bool = False

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.max_steps < 0:
            raise ConfigError("EVAL_EPISODES must be positive and EVAL_MAX_STEPS nonnegative")


SECTIONS = {
    "ENV": ("env", EnvConfig),
    "ARENA": ("arena", VisionArena),
    "COLLECT": ("collect", CollectConfig),
    "FEATURES": ("features", FeaturesConfig),
    "LEARN": ("learn", LearnConfig),
    "PLAN": ("plan", PlanSettings),
    "REWARD": ("reward", RewardSpec),
    "EVAL": ("evaluation", EvalConfig),
}

PRESETS = {
    "paper": {},
    "desk": {
        "ARENA_RESOLUTION": "8",
        "COLLECT_NUM_TRAJECTORIES": "5000",
        "FEATURES_INDICATIVE_KERNELS": "800",
        "FEATURES_CHARACTERISTIC_KERNELS": "800",
        "FEATURES_OBSERVATION_KERNELS": "200",
    },
}


def _parse(key: str, value: str, kind) -> object:
    """Convert a text value to the type of its dataclass field."""

    text = value.strip()
    try:
        if kind is bool:
            if text.lower() in TRUE_VALUES:
                return True
            if text.lower() in FALSE_VALUES:
                return False
            raise ValueError(text)
        if kind in (int, float, str):
            return kind(text)
        if isinstance(kind, types.UnionType):
            options = typing.get_args(kind)
            if int in options and text.lstrip("-").isdigit():
                return int(text)
            if str in options:
                return text
    except ValueError:
        pass

    raise ConfigError(f"Cannot read {key}={value!r} as {getattr(kind, '__name__', kind)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Every setting of an experiment run.

    The defaults reproduce the full-scale robot experiment.
    """

    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    arena: VisionArena = field(default_factory=VisionArena)
    collect: CollectConfig = field(default_factory=CollectConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    plan: PlanSettings = field(default_factory=PlanSettings)
    reward: RewardSpec = field(default_factory=RewardSpec)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_mapping(cls, values: dict, scale: str = "paper") -> "ExperimentConfig":
        """
        Build a configuration from flat key-value pairs.

        Values override the `scale` preset, which overrides the defaults.
        Keys without a known section prefix are ignored.

        Raises
        ------
        ConfigError
            For an unknown scale, an unknown key with a known prefix or a
            value that cannot be parsed or fails validation.
        """

        if scale not in PRESETS:
            raise ConfigError(f"Unknown scale {scale!r}, expected one of {sorted(PRESETS)}")

        merged = {**PRESETS[scale], **{k: v for k, v in values.items() if v is not None}}
        updates: dict[str, dict] = {name: {} for name, _ in SECTIONS.values()}
        seed = cls.seed

        for key, value in merged.items():
            if key == "SEED":
                seed = _parse(key, value, int)
                continue
            prefix, _, name = key.partition("_")
            if prefix not in SECTIONS:
                continue
            section, section_cls = SECTIONS[prefix]
            hints = typing.get_type_hints(section_cls)
            attribute = name.lower()
            if attribute not in {f.name for f in fields(section_cls)}:
                raise ConfigError(f"Unknown configuration key {key}")
            updates[section][attribute] = _parse(key, value, hints[attribute])

        sections = {
            section: section_cls(**updates[section]) for section, section_cls in SECTIONS.values()
        }

        return cls(seed=seed, **sections)

    @classmethod
    def load(cls, path: str | None = None, scale: str = "paper") -> "ExperimentConfig":
        """
        Read a configuration file over the `scale` preset.

        Without a path the `.env` file at the root of the installation is
        read instead; when it does not exist only the preset applies.
        """

        values = load_environment(path)

        return cls.from_mapping(values, scale)

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)

    def stream_seed(self, stream: int) -> int:
        """A seed for one of the independent random streams."""

        state = np.random.SeedSequence((self.seed, stream)).generate_state(1, dtype=np.uint64)

        return int(state[0])

    def to_mapping(self) -> dict[str, str]:
        """Flat key-value pairs that rebuild this configuration."""

        values = {"SEED": str(self.seed)}
        for prefix, (section, _) in SECTIONS.items():
            for f in fields(getattr(self, section)):
                values[f"{prefix}_{f.name.upper()}"] = str(getattr(getattr(self, section), f.name))

        return values


TPSR_ROOT = _find_directory("")
DIR_OUT = _find_directory("out")

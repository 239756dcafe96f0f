"""
Configuration module.

RuntimeConfig validates process-level settings from environment variables.
TrainConfig and SweepConfig hold experiment hyperparameters and are loaded
from plain-text `key = value` files where unknown keys are hard errors.
"""
import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Type, Union

from filterbank import Mode
from utils.exceptions import ConfigError

TOOL_NAME = 'wavelet-curriculum'
TOOL_VERSION = '0.3.0'


@dataclass
class RuntimeConfig:
    """Type-safe configuration object with validated environment variables."""

    log_level: str = 'INFO'
    ablate_jobs: int = 1

    @classmethod
    def from_env(cls) -> 'RuntimeConfig':
        """
        Create RuntimeConfig instance from environment variables.

        Raises:
            ValueError: If environment variables are invalid.
        """
        log_level = os.environ.get('LOG_LEVEL', 'INFO').upper()

        # Validate log level
        valid_log_levels = {'DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'}
        if log_level not in valid_log_levels:
            raise ValueError(
                f'LOG_LEVEL must be one of {valid_log_levels}, got: {log_level}'
            )

        raw_jobs = os.environ.get('ABLATE_JOBS')
        if raw_jobs is None:
            ablate_jobs = os.cpu_count() or 1
        else:
            try:
                ablate_jobs = int(raw_jobs)
            except ValueError:
                raise ValueError(f'ABLATE_JOBS must be an integer, got: {raw_jobs}')
            if ablate_jobs < 1:
                raise ValueError(f'ABLATE_JOBS must be >= 1, got: {ablate_jobs}')

        return cls(log_level=log_level, ablate_jobs=ablate_jobs)


_config: Optional[RuntimeConfig] = None


def get_config() -> RuntimeConfig:
    """
    Get the global runtime configuration instance.

    Raises:
        ValueError: If environment variables are invalid.
    """
    global _config
    if _config is None:
        _config = RuntimeConfig.from_env()
    return _config


@dataclass
class TrainConfig:
    """Hyperparameters of one curriculum training run."""

    levels: int = 2
    mode: Mode = Mode.SCALE
    iterations: int = 3000
    lambda_pr: float = 0.05
    alpha_lr: float = 1e-4
    init_alpha: float = 0.0
    pr_only: bool = False
    pr_stride: int = 1
    lambda_ssim: float = 0.2
    n0: int = 100
    seed: int = 0
    splat: bool = True
    # Mean positional gradient in normalized device units (see accumulate_densify_stats).
    densify_grad_threshold: float = 1e-3
    densify_interval: int = 100
    densify_from: int = 300
    densify_until_frac: float = 0.7
    scale_split_threshold: float = 2.0
    opacity_floor: float = 0.005
    # Position lr is relative to the image diagonal and decays to lr_means_final_frac of it.
    lr_means: float = 2e-3
    lr_means_final_frac: float = 0.01
    lr_colors: float = 2.5e-3
    lr_opacity: float = 5e-2
    lr_scales: float = 5e-3
    lr_rotation: float = 5e-3
    log_every: int = 500

    def __post_init__(self) -> None:
        self.mode = Mode.parse(self.mode)
        checks = [
            ('levels', self.levels >= 0, 'must be >= 0'),
            ('iterations', self.iterations >= 1, 'must be >= 1'),
            ('lambda_pr', self.lambda_pr >= 0, 'must be >= 0'),
            ('alpha_lr', self.alpha_lr > 0, 'must be > 0'),
            ('pr_stride', self.pr_stride >= 1, 'must be >= 1'),
            ('lambda_ssim', 0.0 <= self.lambda_ssim <= 1.0, 'must lie in [0, 1]'),
            ('n0', self.n0 >= 1, 'must be >= 1'),
            ('densify_interval', self.densify_interval >= 1, 'must be >= 1'),
            ('densify_until_frac', 0.0 <= self.densify_until_frac <= 1.0, 'must lie in [0, 1]'),
            ('opacity_floor', 0.0 <= self.opacity_floor < 1.0, 'must lie in [0, 1)'),
            ('log_every', self.log_every >= 1, 'must be >= 1'),
        ]
        for key, ok, rule in checks:
            if not ok:
                raise ConfigError(f'{key} {rule}, got {getattr(self, key)!r}', key=key)

    @property
    def densify_until(self) -> int:
        return int(self.densify_until_frac * self.iterations)

    def as_dict(self) -> Dict[str, Any]:
        values = dataclasses.asdict(self)
        values['mode'] = self.mode.value
        return values


@dataclass
class SweepConfig:
    """Cartesian ablation sweep; levels 0 rows ignore the mode axis."""

    sweep_levels: List[int] = field(default_factory=lambda: [0, 1, 2])
    sweep_modes: List[Mode] = field(default_factory=lambda: [Mode.SCALE])
    sweep_seeds: List[int] = field(default_factory=lambda: [0, 1, 2])

    def __post_init__(self) -> None:
        self.sweep_modes = [Mode.parse(m) for m in self.sweep_modes]
        for key in ('sweep_levels', 'sweep_modes', 'sweep_seeds'):
            if not getattr(self, key):
                raise ConfigError(f'{key} must not be empty', key=key)
        if min(self.sweep_levels) < 0:
            raise ConfigError('sweep_levels must be >= 0', key='sweep_levels')

    def as_dict(self) -> Dict[str, Any]:
        return {
            'sweep_levels': list(self.sweep_levels),
            'sweep_modes': [m.value for m in self.sweep_modes],
            'sweep_seeds': list(self.sweep_seeds),
        }


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in {'1', 'true', 'yes', 'on'}:
        return True
    if lowered in {'0', 'false', 'no', 'off'}:
        return False
    raise ValueError(f'expected a boolean, got {raw!r}')


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(raw: str) -> list:
        return [item(part) for part in raw.split(',') if part.strip()]
    return parse


def _parsers(cls: Type) -> Dict[str, Callable[[str], Any]]:
    by_type = {int: int, float: float, bool: _parse_bool, Mode: Mode.parse}
    parsers = {}
    for f in dataclasses.fields(cls):
        if typing.get_origin(f.type) is list:
            parsers[f.name] = _parse_list(by_type[typing.get_args(f.type)[0]])
        else:
            parsers[f.name] = by_type[f.type]
    return parsers


def parse_config_text(text: str, sections: Iterable[Type] = (TrainConfig,)) -> Tuple[Any, ...]:
    """
    Parse `key = value` lines into one instance per dataclass in `sections`.

    Raises:
        ConfigError: On malformed lines, unknown or duplicate keys, and bad values.
    """
    sections = tuple(sections)
    parsers = {cls: _parsers(cls) for cls in sections}
    values: Dict[Type, Dict[str, Any]] = {cls: {} for cls in sections}
    seen: Dict[str, int] = {}

    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'line {number}: expected key = value, got {raw_line.strip()!r}', line=number)
        key, raw_value = (part.strip() for part in line.split('=', 1))
        owner = next((cls for cls in sections if key in parsers[cls]), None)
        if owner is None:
            known = sorted(k for cls in sections for k in parsers[cls])
            raise ConfigError(f'line {number}: unknown key {key!r} (known keys: {", ".join(known)})',
                              key=key, line=number)
        if key in seen:
            raise ConfigError(f'line {number}: duplicate key {key!r} (first set on line {seen[key]})',
                              key=key, line=number)
        seen[key] = number
        try:
            values[owner][key] = parsers[owner][key](raw_value)
        except ValueError as e:
            raise ConfigError(f'line {number}: bad value for {key!r}: {e}', key=key, line=number)

    return tuple(cls(**values[cls]) for cls in sections)


def load_config_file(path: Union[str, Path], sections: Iterable[Type] = (TrainConfig,)) -> Tuple[Any, ...]:
    """Read and parse a config file; see parse_config_text."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f'cannot read config file {path}: {e}')
    return parse_config_text(text, sections)


def with_overrides(config: TrainConfig, **overrides: Any) -> TrainConfig:
    """Replace fields whose override is not None (CLI flags win over the file)."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    return dataclasses.replace(config, **changes) if changes else config

import yaml
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from regressors.local_fit import ModelKind

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / 'config' / 'defaults.yaml'

DEFAULT_ETA_GRID = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
DEFAULT_SIGMA_MULTIPLIER_GRID = [0.25, 0.5, 1.0, 2.0, 5.0]

MODEL_NAMES = {
    'pu-krr': ModelKind.KRR,
    'pu-krr-poly': ModelKind.KRR_POLY,
}


@dataclass
class FitConfig:
    h: int = 100
    model_kind: ModelKind = ModelKind.KRR_POLY
    degree: int = 2
    eta: Optional[float] = None  # None: 1e-4 * mean |y| of each region
    sigma_multiplier: float = 1.0
    eta_grid: List[float] = field(default_factory=lambda: list(DEFAULT_ETA_GRID))
    sigma_multiplier_grid: List[float] = field(default_factory=lambda: list(DEFAULT_SIGMA_MULTIPLIER_GRID))
    svd_threshold: float = 1e-10
    w0: float = 1e-5
    seed: int = 0
    validation_fraction: float = 0.2
    fallback_degree: int = 2
    fallback_widening: float = 1.25  # 0: the fallback is the global polynomial alone
    n_jobs: int = 1
    tie_tolerance: float = 1e-6  # relative to the validation response spread

    def __post_init__(self):
        if isinstance(self.model_kind, str):
            self.model_kind = parse_model_kind(self.model_kind)
        errors = self.validate()
        if errors:
            raise ValueError("Invalid fit configuration: " + "; ".join(errors))

    def validate(self) -> List[str]:
        errors = []
        if self.h < 1:
            errors.append(f"h must be >= 1 (got {self.h})")
        if self.degree < 0:
            errors.append(f"degree must be >= 0 (got {self.degree})")
        if self.fallback_degree < 0:
            errors.append(f"fallback_degree must be >= 0 (got {self.fallback_degree})")
        if not (self.fallback_widening == 0 or self.fallback_widening >= 1):
            errors.append(f"fallback_widening must be 0 or >= 1 (got {self.fallback_widening})")
        if self.eta is not None and not self.eta > 0:
            errors.append(f"eta must be positive (got {self.eta})")
        if not self.sigma_multiplier > 0:
            errors.append(f"sigma_multiplier must be positive (got {self.sigma_multiplier})")
        if not self.eta_grid or any(not v > 0 for v in self.eta_grid):
            errors.append("eta_grid must be a nonempty list of positive values")
        if not self.sigma_multiplier_grid or any(not v > 0 for v in self.sigma_multiplier_grid):
            errors.append("sigma_multiplier_grid must be a nonempty list of positive values")
        if not self.w0 > 0:
            errors.append(f"w0 must be positive (got {self.w0})")
        if not 0 < self.svd_threshold < 1:
            errors.append(f"svd_threshold must lie in (0, 1) (got {self.svd_threshold})")
        if not 0 < self.validation_fraction < 1:
            errors.append(f"validation_fraction must lie in (0, 1) (got {self.validation_fraction})")
        if self.n_jobs < 1:
            errors.append(f"n_jobs must be >= 1 (got {self.n_jobs})")
        return errors

    @property
    def polynomial_degree(self) -> Optional[int]:
        return self.degree if self.model_kind == ModelKind.KRR_POLY else None

    def with_overrides(self, **overrides) -> 'FitConfig':
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['model_kind'] = model_name(self.model_kind)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FitConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown fit configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path] = DEFAULT_CONFIG_PATH) -> 'FitConfig':
        with open(path, 'r') as f:
            loaded = yaml.safe_load(f) or {}
        return cls.from_dict(loaded.get('fit', {}))


def parse_model_kind(name: str) -> ModelKind:
    key = name.lower().replace('_', '-')
    if key in MODEL_NAMES:
        return MODEL_NAMES[key]
    for kind in ModelKind:
        if kind.value == name.lower():
            return kind
    raise ValueError(f"Unknown model '{name}'; expected one of {', '.join(MODEL_NAMES)}")


def model_name(kind: ModelKind) -> str:
    for name, candidate in MODEL_NAMES.items():
        if candidate == kind:
            return name
    return kind.value

import json
import numpy as np
from pathlib import Path
from typing import Any, Dict, Optional, Union

from data_ingestion.models import PointCloud
from regressors.errors import DataError
from regressors.fit_config import FitConfig
from regressors.local_fit import LocalModel, ModelKind, MonomialBasis
from regressors.spatial_cover import Region, RegionCover
from regressors.stitch import StitchedModel
from output_generators.result_writer import atomic_write_text

FORMAT_NAME = 'pu-kernel-regression-model'
FORMAT_VERSION = '1.1'


class ModelSerializer:
    """Versioned JSON document for a fitted StitchedModel.

    Floats are written with Python's shortest round-trip repr, so a loaded
    model reproduces predictions bit for bit.
    """

    def to_dict(self, model: StitchedModel, cloud: PointCloud) -> Dict[str, Any]:
        return {
            'format': FORMAT_NAME,
            'format_version': FORMAT_VERSION,
            'dimension': model.dimension,
            'w0': model.w0,
            'config': model.config.to_dict(),
            'training_points': cloud.points.tolist(),
            'cover': {
                'r_min': model.cover.r_min,
                'r_max': model.cover.r_max,
                'regions': [self._region_to_dict(r) for r in model.cover.regions],
            },
            'local_models': [self._local_to_dict(m) for m in model.local_models],
            'fallback': self._local_to_dict(model.fallback),
        }

    def from_dict(self, data: Dict[str, Any]) -> StitchedModel:
        if data.get('format') != FORMAT_NAME:
            raise DataError(f"Not a model document (format={data.get('format')!r})")
        version = str(data.get('format_version', ''))
        if version.split('.')[0] != FORMAT_VERSION.split('.')[0]:
            raise DataError(f"Unsupported model format version {version}; expected {FORMAT_VERSION}")

        d = int(data['dimension'])
        points = np.array(data['training_points'], dtype=float).reshape(-1, d)
        regions = [self._region_from_dict(r, points) for r in data['cover']['regions']]
        cover = RegionCover(regions=regions, r_min=float(data['cover']['r_min']),
                            r_max=float(data['cover']['r_max']))
        local_models = [self._local_from_dict(m, points[region.member_indices], d)
                        for m, region in zip(data['local_models'], regions)]
        fallback = self._local_from_dict(data['fallback'], np.zeros((0, d)), d)
        config_data = dict(data['config'])
        # 1.0 documents predate the fallback blend
        config_data.setdefault('fallback_widening', 0.0)
        config = FitConfig.from_dict(config_data)
        return StitchedModel(cover, local_models, fallback, float(data['w0']), d, config)

    def save(self, model: StitchedModel, cloud: PointCloud, path: Union[str, Path]) -> Path:
        text = json.dumps(self.to_dict(model, cloud), indent=1)
        return atomic_write_text(path, text)

    def load(self, path: Union[str, Path]) -> StitchedModel:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"{path}: cannot read model ({e})")
        try:
            return self.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, DataError):
                raise
            raise DataError(f"{path}: malformed model document ({e})")

    @staticmethod
    def _region_to_dict(region: Region) -> Dict[str, Any]:
        return {
            'id': region.id,
            'center_index': region.center_index,
            'radius': region.radius,
            'level': region.level,
            'member_indices': region.member_indices.tolist(),
        }

    @staticmethod
    def _region_from_dict(data: Dict[str, Any], points: np.ndarray) -> Region:
        return Region(
            id=int(data['id']),
            center_index=int(data['center_index']),
            center=points[int(data['center_index'])].copy(),
            radius=float(data['radius']),
            level=int(data['level']),
            member_indices=np.array(data['member_indices'], dtype=int),
        )

    @staticmethod
    def _local_to_dict(model: LocalModel) -> Dict[str, Any]:
        data = {
            'kind': model.kind.value,
            'alpha': model.alpha.tolist(),
            'lambda': model.lam.tolist(),
            'sigma': model.sigma,
            'eta': model.eta,
            'basis': None,
        }
        if model.basis is not None:
            data['basis'] = {
                'degree': model.basis.degree,
                'exponents': model.basis.exponents.tolist(),
                'shift': model.basis.shift.tolist(),
                'scale': model.basis.scale,
            }
        return data

    @staticmethod
    def _local_from_dict(data: Dict[str, Any], training_points: np.ndarray, d: int) -> LocalModel:
        basis: Optional[MonomialBasis] = None
        if data.get('basis') is not None:
            b = data['basis']
            basis = MonomialBasis(
                dimension=d,
                degree=int(b['degree']),
                exponents=np.array(b['exponents'], dtype=int).reshape(-1, d),
                shift=np.array(b['shift'], dtype=float),
                scale=float(b['scale']),
            )
        return LocalModel(
            kind=ModelKind(data['kind']),
            training_points=training_points,
            alpha=np.array(data['alpha'], dtype=float),
            lam=np.array(data['lambda'], dtype=float),
            sigma=float(data['sigma']),
            eta=float(data['eta']),
            basis=basis,
        )

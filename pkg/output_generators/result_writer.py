import hashlib
import json
import os
import tempfile
import time
import numpy as np
import pandas as pd
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from data_ingestion.models import Dataset

FLOAT_FORMAT = '%.17g'


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write via a temporary file in the target directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_frame(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    return atomic_write_text(path, df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n'))


def atomic_write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + '\n')


def file_fingerprint(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    seed: Optional[int]
    fingerprints: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path: Union[str, Path]):
        self.fingerprints[str(path)] = file_fingerprint(path)

    def add_output(self, path: Union[str, Path]):
        self.outputs.append(str(path))
        self.fingerprints[str(path)] = file_fingerprint(path)

    def mark(self, stage: str):
        self.timings[stage] = round(time.perf_counter() - self._started, 6)

    def write(self, path: Union[str, Path]) -> Path:
        self.mark('total')
        data = asdict(self)
        data.pop('_started')
        return atomic_write_json(data, path)


class ResultWriter:
    def __init__(self, output_dir: Union[str, Path] = '.'):
        self.output_dir = Path(output_dir)

    def resolve(self, path: Union[str, Path]) -> Path:
        return self.output_dir / path

    def write_dataset(self, dataset: Dataset, path: Union[str, Path]) -> Path:
        cloud = dataset.cloud
        columns = {f'x{i + 1}': cloud.points[:, i] for i in range(cloud.d)}
        columns['y'] = cloud.responses
        return atomic_write_frame(pd.DataFrame(columns), self.resolve(path))

    def write_gradients(self, gradients: np.ndarray, path: Union[str, Path]) -> Path:
        columns = {f'dy_dx{i + 1}': gradients[:, i] for i in range(gradients.shape[1])}
        return atomic_write_frame(pd.DataFrame(columns), self.resolve(path))

    def write_predictions(self, predictions: np.ndarray, path: Union[str, Path]) -> Path:
        return atomic_write_frame(pd.DataFrame({'prediction': predictions}), self.resolve(path))

    def write_table(self, rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> Path:
        return atomic_write_frame(pd.DataFrame(list(rows)), self.resolve(path))

import numpy as np
import pandas as pd
from pathlib import Path
from typing import Optional, Tuple, Union

from data_ingestion.models import PointCloud
from regressors.errors import DataError


class PointCloudCSVParser:
    """Reads numeric CSV files: feature columns first, response last.

    A header row is detected by a non-numeric first row. Errors name the
    1-based line of the file they come from.
    """

    def __init__(self, float_format: str = '%.17g'):
        self.float_format = float_format

    def read_matrix(self, file_path: Union[str, Path]) -> Tuple[np.ndarray, Optional[list]]:
        try:
            df = pd.read_csv(file_path, header=None, dtype=str, keep_default_na=False,
                             skip_blank_lines=False, encoding='utf-8')
        except pd.errors.EmptyDataError:
            raise DataError(f"{file_path}: empty file")
        except pd.errors.ParserError as e:
            raise DataError(f"{file_path}: ragged row ({e})")
        except (OSError, UnicodeDecodeError) as e:
            raise DataError(f"{file_path}: cannot read ({e})")

        if df.empty:
            raise DataError(f"{file_path}: empty file")

        header = None
        first_line = 1
        if not self._is_numeric_row(df.iloc[0]):
            header = [str(c).strip() for c in df.iloc[0]]
            df = df.iloc[1:]
            first_line = 2
        if df.empty:
            raise DataError(f"{file_path}: no data rows")

        stripped = df.replace(r'^\s+|\s+$', '', regex=True)
        ragged = (df.isna().any(axis=1) | (stripped == '').all(axis=1)).to_numpy()
        numeric = stripped.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
        bad = ~np.isfinite(numeric) | ragged[:, None]
        if bad.any():
            row_pos, col = np.argwhere(bad)[0]
            line = first_line + int(row_pos)
            if ragged[row_pos]:
                raise DataError(f"{file_path}: line {line}: ragged or empty row")
            raise self._cell_error(stripped.iat[row_pos, col], file_path, line, int(col) + 1)
        # final values through float() so that 17-digit text round-trips exactly
        return stripped.to_numpy(dtype=float), header

    def parse_point_cloud(self, file_path: Union[str, Path]) -> PointCloud:
        values, _ = self.read_matrix(file_path)
        if values.shape[1] < 2:
            raise DataError(f"{file_path}: need at least 2 columns (features, response), got {values.shape[1]}")
        return PointCloud(values[:, :-1], values[:, -1])

    def parse_queries(self, file_path: Union[str, Path], d: int) -> np.ndarray:
        """Query matrix with d feature columns; a trailing response column is dropped."""
        values, _ = self.read_matrix(file_path)
        if values.shape[1] == d + 1:
            return values[:, :d]
        if values.shape[1] != d:
            raise DataError(f"{file_path}: dimension mismatch, expected d={d} feature columns, got {values.shape[1]}")
        return values

    @staticmethod
    def _is_numeric_row(row: pd.Series) -> bool:
        for cell in row.tolist():
            if pd.isna(cell):
                continue
            try:
                float(str(cell).strip())
            except ValueError:
                return False
        return True

    @staticmethod
    def _cell_error(text: str, file_path, line: int, column: int) -> DataError:
        try:
            non_finite = not np.isfinite(float(text))
        except ValueError:
            non_finite = False
        kind = 'non-finite' if non_finite else 'non-numeric'
        return DataError(f"{file_path}: line {line}, column {column}: {kind} value '{text}'")


def load_csv(path: Union[str, Path]) -> PointCloud:
    return PointCloudCSVParser().parse_point_cloud(path)

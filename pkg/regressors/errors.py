from typing import Optional


class DataError(ValueError):
    """Input data that cannot be used: bad shapes, non-finite values, unparseable files."""


class NumericalError(RuntimeError):
    def __init__(self, message: str, region_id: Optional[int] = None):
        if region_id is not None:
            message = f"region {region_id}: {message}"
        super().__init__(message)
        self.region_id = region_id

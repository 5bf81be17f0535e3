from typing import Any, Dict


class SfcorrError(Exception):
    """Base error. Carries a human-readable `detail` and a machine `code`."""

    code = "error"

    def __init__(self, detail: str, code: str = None):
        super().__init__(detail)
        self.detail = detail
        if code is not None:
            self.code = code

    def to_dict(self) -> Dict[str, Any]:
        return {"detail": self.detail, "code": self.code}


class DataError(SfcorrError):
    """Input could not be parsed or violates a data invariant."""

    code = "data_error"


class DimensionError(SfcorrError):
    """Shapes or subject identifiers do not line up."""

    code = "dimension_error"


class DegenerateError(SfcorrError):
    """A statistic or direction is undefined (zero variance, constant input)."""

    code = "degenerate"


class ConfigError(SfcorrError):
    """Invalid parameter value or missing path."""

    code = "config_error"

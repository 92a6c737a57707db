"""JSON serialization with fixed 17-significant-digit floats.

17 significant decimal digits round-trip IEEE doubles exactly, so
parse(serialize(x)) == x bit-for-bit, independent of locale.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def _normalize(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _floatstr(x: float) -> str:
    if math.isfinite(x):
        return format(x, ".17g")
    if math.isnan(x):
        return "NaN"
    return "Infinity" if x > 0 else "-Infinity"


class _Encoder(json.JSONEncoder):
    # json.dumps calls float.__repr__ directly, so fixed-precision output
    # requires rebuilding the iterencoder with a custom float formatter
    def iterencode(self, o, _one_shot: bool = False):
        markers = {} if self.check_circular else None
        indent = self.indent
        if indent is not None and not isinstance(indent, str):
            indent = " " * indent
        encoder = json.encoder._make_iterencode(
            markers,
            self.default,
            json.encoder.encode_basestring_ascii,
            indent,
            _floatstr,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            False,
        )
        return encoder(o, 0)


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize with every float rendered at 17 significant digits."""
    return json.dumps(_normalize(obj), indent=indent, cls=_Encoder)


def loads(text: str) -> Any:
    return json.loads(text)


def matrix_to_json(m: np.ndarray) -> dict:
    """Complex matrix as {"re": [[...]], "im": [[...]]}."""
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(d: dict) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)

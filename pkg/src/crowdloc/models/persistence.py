"""Self-describing model files.

A model file is JSON: format tag, version, estimator class and
constructor parameters, vocabulary fingerprint, and the fitted state with
numpy arrays stored as base64 of their raw little-endian bytes. A SHA-256
over the payload detects truncation and edits. Serialisation is
deterministic, so saving the same model twice gives identical bytes.
"""

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from ..exceptions import CorruptFile, VersionMismatch
from .base import CentroidRegressor
from .ensemble import EnsembleRegressor
from .gbm import GBMRegressor
from .knn import KNNRegressor
from .nn import NNRegressor

FORMAT = "crowdloc-model"
VERSION = 1
_KINDS = {cls.__name__: cls for cls in (CentroidRegressor, KNNRegressor, GBMRegressor, NNRegressor)}


def _encode_array(arr):
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    return {
        "dtype": dtype.str,
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype(dtype, copy=False).tobytes()).decode("ascii"),
    }


def _decode_array(d):
    raw = base64.b64decode(d["data"].encode("ascii"))
    return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).copy()


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def _params(model):
    return {k: _jsonable(v) for k, v in model.get_params(deep=False).items()}


def model_to_dict(model):
    if isinstance(model, EnsembleRegressor):
        return {
            "kind": "EnsembleRegressor",
            "components": [
                {"name": name, "weight": float(w), "model": model_to_dict(est)}
                for name, est, w in model.estimators_
            ],
        }
    kind = type(model).__name__
    if kind not in _KINDS:
        raise TypeError(f"cannot serialise {kind}")
    scalars, arrays = model._get_state()
    return {
        "kind": kind,
        "params": _params(model),
        "scalars": _jsonable(scalars),
        "arrays": {name: _encode_array(a) for name, a in sorted(arrays.items())},
    }


def _tupleize_params(cls, params):
    defaults = cls().get_params(deep=False)
    return {k: tuple(v) if isinstance(defaults.get(k), tuple) else v for k, v in params.items()}


def model_from_dict(d):
    if d["kind"] == "EnsembleRegressor":
        comps = [(c["name"], model_from_dict(c["model"]), c["weight"]) for c in d["components"]]
        return EnsembleRegressor.from_fitted(comps)
    cls = _KINDS.get(d["kind"])
    if cls is None:
        raise CorruptFile(f"unknown model kind {d['kind']!r}")
    model = cls(**_tupleize_params(cls, d["params"]))
    model._set_state(d["scalars"], {k: _decode_array(v) for k, v in d["arrays"].items()})
    return model


def dumps_model(model, vocabulary_fingerprint=""):
    payload = {"vocabulary_fingerprint": vocabulary_fingerprint, "model": model_to_dict(model)}
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads_model(text):
    """Inverse of :func:`dumps_model`; returns ``(model, vocabulary_fingerprint)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CorruptFile("not a crowdloc model file")
    if doc.get("version") != VERSION:
        raise VersionMismatch(f"model file version {doc.get('version')}, expected {VERSION}")
    payload = doc.get("payload")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != doc.get("sha256"):
        raise CorruptFile("model checksum mismatch")
    try:
        return model_from_dict(payload["model"]), payload["vocabulary_fingerprint"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"model payload unreadable: {exc}") from None


def save_model(model, path, vocabulary_fingerprint=""):
    Path(path).write_text(dumps_model(model, vocabulary_fingerprint), encoding="utf-8")


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))

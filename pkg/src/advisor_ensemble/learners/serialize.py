"""Versioned JSON serialization of fitted predictors.

Floats are written with ``repr`` precision, so scores round-trip exactly.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..errors import IntegrityError
from .base import ModelKind
from .forests import RandomForest, Rotation, RotationForest
from .gbt import GradientBoostedTrees
from .linear import ElasticLinear, ElasticLogistic
from .mlp import MLP, MLPParams
from .svm import SVMRBF
from .trees import CARTClassifier, Tree

FORMAT = "advisor-ensemble-model"
VERSION = 1

_TYPES = {cls.__name__: cls for cls in (
    ElasticLinear, ElasticLogistic, SVMRBF, GradientBoostedTrees, RotationForest, Rotation,
    RandomForest, MLP, MLPParams, CARTClassifier, Tree)}


def _encode(obj):
    if dataclasses.is_dataclass(obj):
        name = type(obj).__name__
        if name not in _TYPES:
            raise TypeError(f"cannot serialize {name}")
        return {"__type__": name,
                **{f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.ravel().tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, ModelKind):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.asarray(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        if "__type__" in obj:
            cls = _TYPES[obj["__type__"]]
            kwargs = {k: _decode(v) for k, v in obj.items() if k != "__type__"}
            if "kind" in kwargs:
                kwargs["kind"] = ModelKind(kwargs["kind"])
            return cls(**kwargs)
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps(model) -> str:
    return json.dumps({"format": FORMAT, "version": VERSION, "model": _encode(model)})


def loads(text: str):
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise IntegrityError("not a serialized model")
    if doc.get("version") != VERSION:
        raise IntegrityError(f"unsupported model format version {doc.get('version')}")
    return _decode(doc["model"])


def save_predictor(model, path) -> None:
    Path(path).write_text(dumps(model))


def load_predictor(path):
    return loads(Path(path).read_text())

"""Versioned JSON serialization for generated problem instances.

Document layout: {"format_version": 1, "family": ..., "seed": ...,
"params": {scalar fields}, "data": {dense arrays as nested lists}}.
Floats are written with full round-trip precision (Python's json module
uses repr), so write-then-read reproduces every field bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Any, Dict

import numpy as np

from .qcqp import QcqpInstance
from .mimo import MimoInstance
from .mlp import MlpInstance

__all__ = ["save_instance", "load_instance"]

FORMAT_VERSION = 1

_FAMILIES = {
    "qcqp": QcqpInstance,
    "mimo": MimoInstance,
    "mlp": MlpInstance,
}


def _family_of(inst: Any) -> str:
    for name, cls in _FAMILIES.items():
        if isinstance(inst, cls):
            return name
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def save_instance(inst: Any, path: str) -> None:
    """Write a QCQP / MIMO / MLP instance as a versioned JSON document."""
    family = _family_of(inst)
    params: Dict[str, Any] = {}
    data: Dict[str, Any] = {}
    for field in dataclasses.fields(inst):
        value = getattr(inst, field.name)
        if isinstance(value, np.ndarray):
            data[field.name] = {"shape": list(value.shape), "values": value.tolist()}
        elif field.name == "seed":
            continue
        elif isinstance(value, tuple):
            params[field.name] = list(value)
        else:
            params[field.name] = value
    doc = {
        "format_version": FORMAT_VERSION,
        "family": family,
        "seed": int(inst.seed),
        "params": params,
        "data": data,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_instance(path: str) -> Any:
    """Read an instance document written by save_instance."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    family = doc.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    cls = _FAMILIES[family]

    kwargs: Dict[str, Any] = {"seed": doc["seed"]}
    params, data = doc["params"], doc["data"]
    for field in dataclasses.fields(cls):
        if field.name == "seed":
            continue
        if field.name in data:
            entry = data[field.name]
            kwargs[field.name] = np.asarray(entry["values"], dtype=float).reshape(entry["shape"])
        elif field.name in params:
            value = params[field.name]
            kwargs[field.name] = tuple(value) if isinstance(value, list) else value
        else:
            raise ValueError(f"missing field {field.name!r} for family {family!r}")
    return cls(**kwargs)

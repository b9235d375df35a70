"""JSON round-tripping for problem instances.

Field names match the instance dataclasses; matrices are row-major nested
lists and ``omega`` is a list of ``[i, j]`` pairs with ``i <= j``. Python's
float repr is exact, so a round trip reproduces every bit.
"""

from __future__ import annotations

import json

import numpy as np

from .objectives import GlmInstance, McInstance, PcaInstance, TensorInstance

_FAMILY_OF = {GlmInstance: "glm", PcaInstance: "pca", McInstance: "mc", TensorInstance: "tensor"}
_CLASS_OF = {v: k for k, v in _FAMILY_OF.items()}

_FIELDS = {
    "glm": ("X", "y", "activation", "w_star", "B", "R", "gamma", "lambda_min_cov", "noise_bound", "seed"),
    "pca": ("M", "eigvals", "eigvecs", "seed"),
    "mc": ("z", "mu", "p", "omega", "epsilon", "seed"),
    "tensor": ("components", "seed"),
}


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def instance_to_dict(inst) -> dict:
    family = _FAMILY_OF[type(inst)]
    out = {"family": family}
    for name in _FIELDS[family]:
        out[name] = _plain(getattr(inst, name))
    return out


def instance_from_dict(doc: dict):
    family = doc.get("family")
    if family not in _CLASS_OF:
        raise ValueError(f"unknown or missing instance family {family!r}")
    missing = [k for k in _FIELDS[family] if k not in doc and k != "seed"]
    if missing:
        raise ValueError(f"{family} instance is missing fields {missing}")
    kwargs = {k: doc[k] for k in _FIELDS[family] if k in doc}
    if family == "mc":
        kwargs["omega"] = np.asarray(kwargs["omega"], dtype=np.int64).reshape(-1, 2)
    return _CLASS_OF[family](**kwargs)


def dumps_instance(inst, indent: int | None = None) -> str:
    return json.dumps(instance_to_dict(inst), indent=indent)


def loads_instance(text: str):
    return instance_from_dict(json.loads(text))

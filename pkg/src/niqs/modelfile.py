"""Reading and writing the JSON model format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import NiqsError
from .model import (DirectD, HamiltonianSchedule, InteractionModel, Segment, SpaceLayout,
                    UnitaryPair)

SCHEMA_VERSION = 1


class ModelFileError(NiqsError):
    """Parse or validation failure, anchored to a line of the source file."""

    def __init__(self, source: str, line: Optional[int], message: str):
        self.source, self.line = source, line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


def load_schema(name: str) -> dict:
    return json.loads(resources.files("niqs").joinpath("schemas", name).read_text())


@dataclass
class ModelSpec:
    """A parsed model file: the interaction model plus its probe and run settings."""

    model: InteractionModel
    psi_r: np.ndarray
    alpha: Optional[complex] = None
    object_state: Optional[np.ndarray] = None
    search: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    name: str = ""
    description: str = ""


def parse_complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


def parse_vector(v) -> np.ndarray:
    return np.array([parse_complex(x) for x in v], dtype=complex)


def parse_matrix(rows) -> np.ndarray:
    if len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows have different lengths")
    return np.array([[parse_complex(x) for x in r] for r in rows], dtype=complex)


def encode_number(x: float) -> float:
    """Round to 12 significant digits for reporting."""
    x = float(x)
    if x == 0 or not math.isfinite(x):
        return 0.0 if x == 0 else x
    return float(f"{x:.12g}") + 0.0


def encode_complex(z) -> list:
    z = complex(z)
    return [encode_number(z.real), encode_number(z.imag)]


def encode_vector(v) -> list:
    return [encode_complex(z) for z in np.asarray(v).ravel()]


def encode_matrix(a) -> list:
    return [encode_vector(row) for row in np.asarray(a)]


def _line_of(text: str, path) -> Optional[int]:
    """Best-effort line of the JSON node at ``path`` (keys and list indices)."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            hit = text.find(f'"{key}"', pos)
            if hit < 0:
                break
            pos = hit
    return text.count("\n", 0, pos) + 1


class _SectionError(Exception):
    def __init__(self, section, exc):
        self.section, self.exc = section, exc


def _section(name):
    """Tag errors raised while building one top-level section of the file."""
    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, typ, exc, tb):
            if exc is not None and isinstance(exc, (NiqsError, ValueError, TypeError)):
                raise _SectionError(name, exc)
            return False
    return _Guard()


def _build(data: dict) -> ModelSpec:
    with _section("layout"):
        lay = SpaceLayout(**data["layout"])
    with _section("dynamics"):
        dyn = data["dynamics"]
        kind = dyn["kind"]
        if kind == "direct_D":
            opt = {k: parse_matrix(dyn[k]) for k in ("H_S_free", "H_D_free") if k in dyn}
            dynamics = DirectD(parse_matrix(dyn["D"]), opt.get("H_S_free"), opt.get("H_D_free"),
                               float(dyn.get("t", 0.0)))
        elif kind == "unitary_pair":
            dynamics = UnitaryPair(parse_matrix(dyn["U_full"]), parse_matrix(dyn["H_S_free"]),
                                   parse_matrix(dyn["H_D_free"]), float(dyn["t"]))
        else:
            dynamics = HamiltonianSchedule(tuple(
                Segment(parse_matrix(s["H_S"]), parse_matrix(s["H_D"]), parse_matrix(s["H_I"]),
                        float(s["duration"])) for s in dyn["segments"]))
        model = InteractionModel(lay, dynamics, float(data.get("hbar", 1.0)), data.get("name", ""))
    with _section("probe"):
        probe = data.get("probe", {})
        psi_r = parse_vector(probe["psi_r"]) if "psi_r" in probe else np.ones(lay.m_r) / math.sqrt(lay.m_r)
        if len(psi_r) != lay.m_r or not math.isclose(np.linalg.norm(psi_r), 1.0, abs_tol=1e-10):
            raise ValueError(f"probe.psi_r must be a unit vector of length m_r = {lay.m_r}")
        obj = parse_vector(probe["object_state"]) if "object_state" in probe else None
        if obj is not None and (len(obj) != lay.n or np.linalg.norm(obj) == 0):
            raise ValueError(f"probe.object_state must be a nonzero vector of length n = {lay.n}")
        alpha = parse_complex(probe["alpha"]) if "alpha" in probe else None
        if alpha is not None and not 0 < abs(alpha) < 1:
            raise ValueError("probe.alpha must satisfy 0 < |alpha| < 1")
    return ModelSpec(model, psi_r, alpha, obj, dict(data.get("search", {})),
                     dict(data.get("grid", {})), data.get("name", ""), data.get("description", ""))


def loads(text: str, source: str = "<model>") -> ModelSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(source, exc.lineno, f"invalid JSON: {exc.msg} (column {exc.colno})") from None
    validator = jsonschema.Draft202012Validator(load_schema("model.schema.json"))
    errors = list(validator.iter_errors(data))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = list(err.absolute_path)
        loc = "/".join(str(p) for p in path) or "<root>"
        raise ModelFileError(source, _line_of(text, path), f"{loc}: {err.message}")
    try:
        return _build(data)
    except _SectionError as err:
        kind = f"{type(err.exc).__name__}: " if isinstance(err.exc, NiqsError) else ""
        raise ModelFileError(source, _line_of(text, [err.section]), f"{err.section}: {kind}{err.exc}") from None


def load(path) -> ModelSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(str(path), None, f"cannot read model file: {exc.strerror}") from None
    return loads(text, str(path))


def dump_model(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"

"""Input files, schemas and hashing.

Every document is YAML (JSON is accepted as a subset).  Graphs, measures,
codes and problems refer to each other either by a path relative to the
referring file or by an inline mapping.  All schemas reject unknown fields.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .codes import OneBlockCode, validate_code
from .errors import ValidationError
from .measures import MarkovMeasure
from .shift import Sft, build_sft

_SYMBOL = {"type": "string", "minLength": 1, "pattern": r"^\S+$"}

GRAPH_SCHEMA = {
    "type": "object",
    "properties": {
        "symbols": {"type": "array", "items": _SYMBOL, "minItems": 1},
        "edges": {"type": "array",
                  "items": {"type": "array", "items": _SYMBOL, "minItems": 2, "maxItems": 2}},
    },
    "required": ["symbols", "edges"],
    "additionalProperties": False,
}

_REF = {"oneOf": [{"type": "string"}, {"type": "object"}]}

MEASURE_SCHEMA = {
    "type": "object",
    "properties": {
        "sft": _REF,
        "edge_freq": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
    "required": ["sft", "edge_freq"],
    "additionalProperties": False,
}

CODE_SCHEMA = {
    "type": "object",
    "properties": {
        "source": _REF,
        "target": _REF,
        "map": {"type": "array",
                "items": {"type": "array", "items": _SYMBOL, "minItems": 2, "maxItems": 2}},
    },
    "required": ["source", "target", "map"],
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "code": _REF,
        "nu": _REF,
        "order": {"type": "integer", "minimum": 1},
    },
    "required": ["code", "nu", "order"],
    "additionalProperties": False,
}


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(config: dict) -> str:
    return sha256_bytes(canonical_json(config).encode())


def load_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path} is not valid YAML or JSON: {exc}", path=str(path)) from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must hold a mapping", path=str(path))
    return doc


def check_schema(doc, schema, what: str):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"{what}: {exc.message} at {where}", field=where) from exc


class Loader:
    """Resolves references and records the hash of every file it reads."""

    def __init__(self):
        self.hashes: dict = {}
        self._cache: dict = {}

    def _read(self, path: Path) -> dict:
        key = str(path.resolve())
        if key not in self._cache:
            self.hashes[str(path)] = sha256_file(path)
            self._cache[key] = load_document(path)
        return self._cache[key]

    def _resolve(self, ref, base: Path):
        if isinstance(ref, str):
            path = (base / ref) if not Path(ref).is_absolute() else Path(ref)
            return self._read(path), path.parent
        return ref, base

    def graph(self, ref, base=Path(".")) -> Sft:
        doc, _ = self._resolve(ref, Path(base))
        check_schema(doc, GRAPH_SCHEMA, "graph")
        return build_sft(doc["symbols"], [tuple(e) for e in doc["edges"]])

    def measure(self, ref, base=Path(".")) -> MarkovMeasure:
        doc, here = self._resolve(ref, Path(base))
        check_schema(doc, MEASURE_SCHEMA, "measure")
        sft = self.graph(doc["sft"], here)
        freq = np.asarray(doc["edge_freq"], dtype=float)
        if len(freq) != sft.n_edges:
            raise ValidationError(f"edge_freq has {len(freq)} entries for {sft.n_edges} edges "
                                  "(after pruning, in sorted edge order)")
        return MarkovMeasure(sft, freq)

    def code(self, ref, base=Path(".")) -> OneBlockCode:
        doc, here = self._resolve(ref, Path(base))
        check_schema(doc, CODE_SCHEMA, "code")
        source = self.graph(doc["source"], here)
        target = self.graph(doc["target"], here)
        mapping = {}
        for x, y in doc["map"]:
            if x in mapping:
                raise ValidationError(f"symbol {x!r} mapped twice")
            mapping[x] = y
        return validate_code(source, target, mapping)

    def problem(self, ref, base=Path(".")) -> tuple:
        doc, here = self._resolve(ref, Path(base))
        check_schema(doc, PROBLEM_SCHEMA, "problem")
        return self.code(doc["code"], here), self.measure(doc["nu"], here), int(doc["order"])


def graph_document(sft: Sft) -> dict:
    return {"symbols": [str(s) for s in sft.symbols], "edges": [[str(a), str(b)] for a, b in sft.edges]}


def measure_document(mu: MarkovMeasure, sft_ref=None) -> dict:
    return {"sft": sft_ref if sft_ref is not None else graph_document(mu.host),
            "edge_freq": [float(q) for q in mu.edge_freq]}


def dump_yaml(doc, path):
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


# -- paths ------------------------------------------------------------------------

PATH_HEADER = "# relent-path"


def write_path(path, sft: Sft, indices) -> None:
    """One header line, then the symbols of the path on a single line."""
    sym = [str(sft.symbols[i]) for i in indices]
    if any(" " in s or "\n" in s for s in sym):
        raise ValidationError("path symbols may not contain whitespace")
    graph_hash = sha256_bytes(canonical_json(graph_document(sft)).encode())
    Path(path).write_text(f"{PATH_HEADER} length={len(sym)} graph={graph_hash}\n" + " ".join(sym) + "\n")


def read_path(path, sft: Sft) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(PATH_HEADER):
        raise ValidationError(f"{path} lacks the path header")
    fields = dict(f.split("=", 1) for f in lines[0][len(PATH_HEADER):].split())
    graph_hash = sha256_bytes(canonical_json(graph_document(sft)).encode())
    if fields.get("graph") != graph_hash:
        raise ValidationError("path was written for a different graph")
    body = lines[1].split() if len(lines) > 1 else []
    if len(body) != int(fields.get("length", -1)):
        raise ValidationError("path length does not match its header")
    lookup = {str(s): i for i, s in enumerate(sft.symbols)}
    try:
        return np.array([lookup[s] for s in body], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"unknown symbol {exc.args[0]!r} in path") from exc


# -- CSV ------------------------------------------------------------------------------

def format_cell(value) -> str:
    """Twelve significant digits for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.11e}"
    return str(value)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")

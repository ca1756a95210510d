"""On-disk formats: lengths files, cluster/coefficient JSON, plan JSON.

Lengths files accept one integer per line or JSONL objects ``{"length": n}``;
JSONL objects may carry an optional ``"batch"`` key to delimit multiple
batches in one file. All emitted files are newline-terminated UTF-8.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .domain import ClusterSpec, CostCoefficients, Plan, SequenceBatch, ValidationError


def read_lengths(path, max_context: int | None = None) -> list[SequenceBatch]:
    """Parse a lengths file into one or more batches."""
    path = Path(path)
    batches: dict[object, list[int]] = {}
    order: list[object] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{lineno}: bad JSON ({exc})") from None
                if "length" not in obj:
                    raise ValidationError(f"{path}:{lineno}: JSONL object lacks a 'length' key")
                key = obj.get("batch", 0)
                length = int(obj["length"])
            else:
                try:
                    length = int(line)
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: expected an integer or JSONL object") from None
                key = 0
            if key not in batches:
                batches[key] = []
                order.append(key)
            batches[key].append(length)
    if not batches:
        raise ValidationError(f"{path}: no sequence lengths found")
    stem = path.stem
    out = []
    for key in order:
        batch_id = stem if len(order) == 1 else f"{stem}-{key}"
        out.append(SequenceBatch(batches[key], batch_id=batch_id, max_context=max_context))
    return out


def write_lengths(path, batches: Sequence[SequenceBatch]):
    with open(path, "w", encoding="utf-8") as fh:
        if len(batches) == 1:
            for s in batches[0].lengths:
                fh.write(json.dumps({"length": int(s)}) + "\n")
        else:
            for b, batch in enumerate(batches):
                for s in batch.lengths:
                    fh.write(json.dumps({"length": int(s), "batch": b}) + "\n")


def _read_json_object(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: bad JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return data


def read_cluster(path) -> ClusterSpec:
    return ClusterSpec.from_json_dict(_read_json_object(path))


def read_coeffs(path) -> CostCoefficients:
    return CostCoefficients.from_json_dict(_read_json_object(path))


def write_json(path, data: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def write_plan(path, plan: Plan):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(plan.to_json())


def read_plan_dict(path) -> dict:
    data = _read_json_object(path)
    if data.get("schema") != 1:
        raise ValidationError(f"{path}: unsupported plan schema {data.get('schema')!r}")
    return data

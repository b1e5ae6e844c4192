"""Labeled-example files: one JSON object per line, or a single JSON document."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .transforms import TransformLabeling


def dumps_example(lab: TransformLabeling) -> str:
    return json.dumps(lab.to_obj(), sort_keys=True)


def save_dataset(path, labelings: Iterable[TransformLabeling]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labelings:
            fh.write(dumps_example(lab))
            fh.write("\n")
            n += 1
    return n


def load_dataset(path) -> list[TransformLabeling]:
    """Read a ``.jsonl`` file of examples, or a ``.json`` file with one example or a list."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        out = []
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                out.append(TransformLabeling.from_obj(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{i}: {exc}") from exc
        return out
    doc = json.loads(text)
    docs = doc if isinstance(doc, list) else [doc]
    return [TransformLabeling.from_obj(d) for d in docs]


def load_many(paths: Iterable) -> list[TransformLabeling]:
    out = []
    for p in paths:
        out.extend(load_dataset(p))
    return out

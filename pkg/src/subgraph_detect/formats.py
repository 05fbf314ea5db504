"""Line-oriented file formats: JSON documents and JSON-lines record files.

Model: ``{"vocab_size", "bias", "weights"}``. Features: one ``{"t", "x", "y",
"word"}`` record per line. Ground truth: ``{"video", "label", "frame_start",
"frame_end", "boxes"}``. Detections: ``{"video", "label", "method", "rank",
"score", "frame_start", "frame_end", "boxes", "node_ids"}``. ``boxes`` is an
array of ``{"frame_start", "frame_end", "x0", "y0", "x1", "y1"}`` or null
for whole-frame extents. Errors name the file, line, and field at fault.
"""

from __future__ import annotations

import json
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from .detection_pipeline import Box, Detection
from .evaluation import GroundTruthInstance
from .model_scoring import WordModel

BOX_FIELDS = ("frame_start", "frame_end", "x0", "y0", "x1", "y1")


def write_json(path: str | Path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON ({exc})") from None
            if not isinstance(rec, dict):
                raise ValueError(f"{path}:{lineno}: expected an object")
            out.append((lineno, rec))
    return out


def _field(rec: Mapping, key: str, where: str, kind=int):
    if key not in rec:
        raise KeyError(f"{where}: missing field {key!r}")
    val = rec[key]
    if kind is int and not (isinstance(val, int) and not isinstance(val, bool)):
        raise ValueError(f"{where}: field {key!r} must be an integer, got {val!r}")
    if kind is float and not isinstance(val, (int, float)):
        raise ValueError(f"{where}: field {key!r} must be a number, got {val!r}")
    return val


# model ---------------------------------------------------------------------


def model_to_dict(model: WordModel) -> dict:
    return {"vocab_size": model.vocab_size, "bias": model.bias, "weights": model.weights.tolist()}


def model_from_dict(doc: Mapping, where: str = "model") -> WordModel:
    k = _field(doc, "vocab_size", where)
    bias = _field(doc, "bias", where, float)
    weights = _field(doc, "weights", where, list)
    if not isinstance(weights, list) or len(weights) != k:
        raise ValueError(f"{where}: 'weights' must be an array of length vocab_size={k}")
    return WordModel(np.array(weights, dtype=np.float64), bias)


def read_model(path: str | Path) -> WordModel:
    return model_from_dict(read_json(path), str(path))


def write_model(path: str | Path, model: WordModel) -> None:
    write_json(path, model_to_dict(model))


# features ------------------------------------------------------------------


def read_features(path: str | Path) -> np.ndarray:
    """Feature records as an ``(n, 4)`` int64 array of ``t, x, y, word``."""
    rows = []
    for lineno, rec in read_jsonl(path):
        where = f"{path}:{lineno}"
        row = [_field(rec, k, where) for k in ("t", "x", "y", "word")]
        if min(row) < 0:
            raise ValueError(f"{where}: feature fields must be >= 0")
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def write_features(path: str | Path, table: np.ndarray) -> None:
    write_jsonl(path, ({"t": int(t), "x": int(x), "y": int(y), "word": int(w)} for t, x, y, w in table))


# boxes, truths, detections -------------------------------------------------


def _boxes_to_list(boxes: Sequence[Box] | None):
    return None if boxes is None else [b.as_dict() for b in boxes]


def _boxes_from_list(val, where: str):
    if val is None:
        return None
    if not isinstance(val, list):
        raise ValueError(f"{where}: 'boxes' must be an array or null")
    return tuple(Box(*(_field(b, k, f"{where} box {i}") for k in BOX_FIELDS)) for i, b in enumerate(val))


def truth_record(gt: GroundTruthInstance) -> dict:
    return {
        "video": gt.video,
        "label": gt.label,
        "frame_start": gt.temporal_extent[0],
        "frame_end": gt.temporal_extent[1],
        "boxes": _boxes_to_list(gt.spatial_boxes),
    }


def write_truths(path: str | Path, truths: Iterable[GroundTruthInstance]) -> None:
    write_jsonl(path, (truth_record(g) for g in truths))


def read_truths(path: str | Path) -> dict[str, list[GroundTruthInstance]]:
    out: dict[str, list[GroundTruthInstance]] = defaultdict(list)
    for lineno, rec in read_jsonl(path):
        where = f"{path}:{lineno}"
        video = str(_field(rec, "video", where, str))
        gt = GroundTruthInstance(
            label=str(_field(rec, "label", where, str)),
            temporal_extent=(_field(rec, "frame_start", where), _field(rec, "frame_end", where)),
            spatial_boxes=_boxes_from_list(rec.get("boxes"), where),
            video=video,
        )
        out[video].append(gt)
    return dict(out)


def detection_record(det: Detection, video: str) -> dict:
    return {
        "video": video,
        "label": det.label,
        "method": det.method,
        "rank": det.rank,
        "score": det.score,
        "frame_start": det.temporal_extent[0],
        "frame_end": det.temporal_extent[1],
        "boxes": _boxes_to_list(det.boxes),
        "node_ids": list(det.node_ids),
    }


def write_detections(path: str | Path, per_video: Mapping[str, Sequence[Detection]]) -> None:
    write_jsonl(path, (detection_record(d, v) for v in per_video for d in per_video[v]))


def read_detections(path: str | Path) -> dict[str, list[Detection]]:
    """Detections grouped by video, each list in rank order."""
    out: dict[str, list[Detection]] = defaultdict(list)
    for lineno, rec in read_jsonl(path):
        where = f"{path}:{lineno}"
        node_ids = rec.get("node_ids") or [0]
        det = Detection(
            method=str(_field(rec, "method", where, str)),
            node_ids=tuple(int(i) for i in node_ids),
            score=float(_field(rec, "score", where, float)),
            temporal_extent=(_field(rec, "frame_start", where), _field(rec, "frame_end", where)),
            boxes=_boxes_from_list(rec.get("boxes"), where),
            rank=int(rec.get("rank", 0)),
            label=str(rec.get("label", "activity")),
        )
        if not det.temporal_extent[0] < det.temporal_extent[1]:
            raise ValueError(f"{where}: empty detection interval {det.temporal_extent}")
        out[str(_field(rec, "video", where, str))].append(det)
    return {v: sorted(ds, key=lambda d: d.rank) for v, ds in out.items()}

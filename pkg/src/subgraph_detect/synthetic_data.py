"""Reproducible synthetic feature streams with planted activities.

A scenario places three kinds of quantized features into a video volume:
background noise over whole frames, signal features inside planted
activities (optionally following a per-slab cell path), and distractor
features inside occlusion intervals. The matching word model gives signal
words a positive weight and noise/distractor words negative weights.

Determinism. How many features land in frame ``k`` of a source (counted
from the source's first frame) is fixed by error diffusion,
``floor((k + 1) * rate) - floor(k * rate)`` on the exact rational value of
``rate``, so node weights do not depend on the seed at all. Only feature
positions and word choices are random. They come from the PCG64 stream
seeded with ``seed`` (``numpy.random.PCG64(seed).random_raw``, whose
output is fixed by the published algorithm), mapped to ``[0, m)`` by
``raw % m``. Sources are drawn in order noise, planted activities,
occlusions; each feature consumes three draws: word, x, y.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .evaluation import GroundTruthInstance
from .detection_pipeline import Box
from .model_scoring import QuantizedFeature, WordModel
from .spacetime_graph import (
    GraphConfig,
    Linking,
    NodeStructure,
    SpaceTimeGraph,
    VideoExtent,
    build_graph,
    cell_rect,
)

PRESETS = ("fig5", "fig7-occlusion", "fig8-drift", "thumos-multi")


@dataclass(frozen=True)
class PlantedActivity:
    temporal_extent: tuple[int, int]
    spatial_path: tuple[tuple[int, int], ...] | None = None  # one cell per overlapped slab; None = whole frame
    signal_rate: float = 1.0  # features per frame
    signal_words: tuple[int, ...] = (0,)
    label: str = "activity"


@dataclass(frozen=True)
class Occlusion:
    temporal_extent: tuple[int, int]
    distractor_words: tuple[int, ...]
    rate: float = 1.0
    cell: tuple[int, int] | None = None  # None = whole frame


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    extent: VideoExtent
    vocab_size: int
    planted: tuple[PlantedActivity, ...] = ()
    noise_rate: float = 0.0
    noise_words: tuple[int, ...] = ()
    occlusions: tuple[Occlusion, ...] = ()
    seed: int = 0
    slab_frames: int = 10
    grid: tuple[int, int] = (3, 3)
    signal_weight: float = 1.0
    noise_weight: float = -1.0
    distractor_weight: float = -1.0
    word_weights: dict[int, float] = field(default_factory=dict)  # per-word overrides


@dataclass(frozen=True, eq=False)
class GeneratedScenario:
    spec: ScenarioSpec
    feature_table: np.ndarray  # (n, 4) int64 rows of t, x, y, word
    truths: tuple[GroundTruthInstance, ...]
    model: WordModel

    @cached_property
    def features(self) -> tuple[QuantizedFeature, ...]:
        return tuple(QuantizedFeature(*map(int, row)) for row in self.feature_table)

    def graph_config(self, cube: bool = False, jump_reach: int | None = None) -> GraphConfig:
        return GraphConfig(
            node_structure=NodeStructure.SPATIOTEMPORAL_CUBE if cube else NodeStructure.TEMPORAL_SLAB,
            slab_frames=self.spec.slab_frames,
            spatial_grid=self.spec.grid,
            linking=Linking.TEMPORAL_JUMP if jump_reach else Linking.ADJACENT,
            jump_reach=jump_reach or 2,
        )

    def graph(self, cube: bool = False, jump_reach: int | None = None) -> SpaceTimeGraph:
        return build_graph(self.feature_table, self.model, self.spec.extent, self.graph_config(cube, jump_reach))

    def truths_by_video(self) -> dict[str, list[GroundTruthInstance]]:
        return {self.spec.name: list(self.truths)}


def frame_counts(rate: float, num_frames: int) -> np.ndarray:
    """Features per frame for a constant rate, spread by error diffusion."""
    if rate < 0:
        raise ValueError(f"rates must be >= 0, got {rate}")
    r = Fraction(rate).limit_denominator(10**6)
    k = np.arange(num_frames + 1)
    cum = np.array([(int(i) * r.numerator) // r.denominator for i in k], dtype=np.int64)
    return np.diff(cum)


class _Draws:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        self._bits = np.random.PCG64(seed)

    def below(self, n: int, bounds: np.ndarray) -> np.ndarray:
        if n == 0:
            return np.empty(0, dtype=np.int64)
        raw = self._bits.random_raw(n)
        return (raw % bounds.astype(np.uint64)).astype(np.int64)


def _check_words(words, vocab: int, what: str) -> None:
    for w in words:
        if not 0 <= w < vocab:
            raise ValueError(f"{what} word {w} outside vocabulary of size {vocab}")


def _check_interval(ext, num_frames: int, what: str) -> None:
    s, e = ext
    if not 0 <= s < e <= num_frames:
        raise ValueError(f"{what} interval {tuple(ext)} must satisfy 0 <= start < end <= {num_frames}")


def _config(spec: ScenarioSpec) -> GraphConfig:
    return GraphConfig(NodeStructure.SPATIOTEMPORAL_CUBE, spec.slab_frames, spec.grid)


def _path_cells(spec: ScenarioSpec, act: PlantedActivity) -> list[tuple[int, int, tuple | None]]:
    """``(first_frame, end_frame, cell)`` per slab overlapped by the activity."""
    s, e = act.temporal_extent
    F = spec.slab_frames
    slabs = range(s // F, (e - 1) // F + 1)
    if act.spatial_path is not None and len(act.spatial_path) != len(slabs):
        raise ValueError(
            f"planted activity {tuple(act.temporal_extent)} overlaps {len(slabs)} slabs "
            f"but its spatial_path has {len(act.spatial_path)} cells"
        )
    out = []
    for i, slab in enumerate(slabs):
        cell = None if act.spatial_path is None else tuple(act.spatial_path[i])
        if cell is not None and not (0 <= cell[0] < spec.grid[0] and 0 <= cell[1] < spec.grid[1]):
            raise ValueError(f"path cell {cell} outside the {spec.grid[0]}x{spec.grid[1]} grid")
        out.append((max(s, slab * F), min(e, (slab + 1) * F), cell))
    return out


def validate(spec: ScenarioSpec) -> None:
    ext = spec.extent
    if spec.vocab_size < 1:
        raise ValueError("vocab_size must be >= 1")
    if spec.noise_rate < 0:
        raise ValueError("noise_rate must be >= 0")
    if spec.noise_rate > 0 and not spec.noise_words:
        raise ValueError("noise_words must be nonempty when noise_rate > 0")
    _check_words(spec.noise_words, spec.vocab_size, "noise")
    signal = set()
    for act in spec.planted:
        _check_interval(act.temporal_extent, ext.num_frames, "planted")
        if act.signal_rate < 0:
            raise ValueError("signal_rate must be >= 0")
        if not act.signal_words:
            raise ValueError("signal_words must be nonempty")
        _check_words(act.signal_words, spec.vocab_size, "signal")
        _path_cells(spec, act)
        signal.update(act.signal_words)
    negative = set(spec.noise_words)
    for occ in spec.occlusions:
        _check_interval(occ.temporal_extent, ext.num_frames, "occlusion")
        if occ.rate < 0:
            raise ValueError("occlusion rate must be >= 0")
        if not occ.distractor_words:
            raise ValueError("distractor_words must be nonempty")
        _check_words(occ.distractor_words, spec.vocab_size, "distractor")
        negative.update(occ.distractor_words)
    clash = signal & negative
    if clash:
        raise ValueError(f"words {sorted(clash)} are both signal and noise/distractor words")
    for w in spec.word_weights:
        if not 0 <= int(w) < spec.vocab_size:
            raise ValueError(f"word_weights key {w} outside vocabulary of size {spec.vocab_size}")
    _config(spec)  # grid sanity
    if ext.width < spec.grid[1] or ext.height < spec.grid[0]:
        raise ValueError(f"a {ext.width}x{ext.height} frame cannot hold a {spec.grid[0]}x{spec.grid[1]} grid")


def _emit(draws: _Draws, first: int, end: int, rate: float, words, rect) -> np.ndarray:
    counts = frame_counts(rate, end - first)
    n = int(counts.sum())
    t = np.repeat(np.arange(first, end, dtype=np.int64), counts)
    x0, y0, x1, y1 = rect
    bounds = np.tile(np.array([len(words), x1 - x0, y1 - y0], dtype=np.int64), n)
    r = draws.below(3 * n, bounds).reshape(n, 3)
    w = np.asarray(words, dtype=np.int64)[r[:, 0]]
    return np.column_stack([t, x0 + r[:, 1], y0 + r[:, 2], w])


def _model(spec: ScenarioSpec) -> WordModel:
    w = np.zeros(spec.vocab_size)
    w[list(spec.noise_words)] = spec.noise_weight
    for occ in spec.occlusions:
        w[list(occ.distractor_words)] = spec.distractor_weight
    for act in spec.planted:
        w[list(act.signal_words)] = spec.signal_weight
    for k, v in spec.word_weights.items():
        w[int(k)] = v
    return WordModel(w, 0.0)


def generate(spec: ScenarioSpec, seed: int | None = None) -> GeneratedScenario:
    """Features, ground truth, and word model of a scenario; ``seed`` overrides ``spec.seed``."""
    validate(spec)
    if seed is not None:
        spec = replace(spec, seed=seed)
    ext, cfg = spec.extent, _config(spec)
    frame = (0, 0, ext.width, ext.height)
    draws = _Draws(spec.seed)
    parts = [np.empty((0, 4), dtype=np.int64)]
    if spec.noise_rate > 0:
        parts.append(_emit(draws, 0, ext.num_frames, spec.noise_rate, spec.noise_words, frame))
    truths = []
    for act in spec.planted:
        boxes = []
        for first, end, cell in _path_cells(spec, act):
            rect = frame if cell is None else cell_rect(ext, cfg, *cell)
            parts.append(_emit(draws, first, end, act.signal_rate, act.signal_words, rect))
            boxes.append(Box(first, end, *rect))
        spatial = None if act.spatial_path is None else tuple(boxes)
        truths.append(GroundTruthInstance(act.label, tuple(act.temporal_extent), spatial, spec.name))
    for occ in spec.occlusions:
        rect = frame if occ.cell is None else cell_rect(ext, cfg, *occ.cell)
        parts.append(_emit(draws, *occ.temporal_extent, occ.rate, occ.distractor_words, rect))
    table = np.concatenate(parts)
    table = table[np.argsort(table[:, 0], kind="stable")]
    table.setflags(write=False)
    return GeneratedScenario(spec, table, tuple(truths), _model(spec))


def drift_scenario(spec: ScenarioSpec, seed: int | None = None) -> GeneratedScenario:
    """``generate`` for scenarios whose activity moves between cells over time."""
    drifting = [
        a for a in spec.planted
        if a.spatial_path is not None and len({tuple(c) for c in a.spatial_path}) > 1
    ]
    if not drifting:
        raise ValueError("drift scenario needs a planted activity whose spatial_path changes cell")
    return generate(spec, seed)


# --------------------------------------------------------------------------
# spec documents
# --------------------------------------------------------------------------


def _pair(v):
    return None if v is None else (int(v[0]), int(v[1]))


def spec_from_dict(doc: dict) -> ScenarioSpec:
    """Build a spec from its JSON document; errors name the offending field."""
    def need(d, key, where):
        if key not in d:
            raise KeyError(f"missing field {where}{key!r}")
        return d[key]

    try:
        ext = need(doc, "extent", "")
        extent = VideoExtent(int(need(ext, "num_frames", "extent.")), int(need(ext, "width", "extent.")),
                             int(need(ext, "height", "extent.")))
        planted = tuple(
            PlantedActivity(
                temporal_extent=tuple(need(p, "temporal_extent", f"planted[{i}].")),
                spatial_path=None if p.get("spatial_path") is None else tuple(_pair(c) for c in p["spatial_path"]),
                signal_rate=float(p.get("signal_rate", 1.0)),
                signal_words=tuple(int(w) for w in need(p, "signal_words", f"planted[{i}].")),
                label=str(p.get("label", "activity")),
            )
            for i, p in enumerate(doc.get("planted", []))
        )
        occlusions = tuple(
            Occlusion(
                temporal_extent=tuple(need(o, "temporal_extent", f"occlusions[{i}].")),
                distractor_words=tuple(int(w) for w in need(o, "distractor_words", f"occlusions[{i}].")),
                rate=float(o.get("rate", 1.0)),
                cell=_pair(o.get("cell")),
            )
            for i, o in enumerate(doc.get("occlusions", []))
        )
        spec = ScenarioSpec(
            name=str(doc.get("name", "scenario")),
            extent=extent,
            vocab_size=int(need(doc, "vocab_size", "")),
            planted=planted,
            noise_rate=float(doc.get("noise_rate", 0.0)),
            noise_words=tuple(int(w) for w in doc.get("noise_words", [])),
            occlusions=occlusions,
            seed=int(doc.get("seed", 0)),
            slab_frames=int(doc.get("slab_frames", 10)),
            grid=_pair(doc.get("grid", (3, 3))),
            signal_weight=float(doc.get("signal_weight", 1.0)),
            noise_weight=float(doc.get("noise_weight", -1.0)),
            distractor_weight=float(doc.get("distractor_weight", -1.0)),
            word_weights={int(k): float(v) for k, v in doc.get("word_weights", {}).items()},
        )
    except (TypeError, IndexError) as exc:
        raise ValueError(f"malformed scenario spec: {exc}") from None
    validate(spec)
    return spec


def spec_to_dict(spec: ScenarioSpec) -> dict:
    doc = asdict(spec)
    doc["word_weights"] = {str(k): v for k, v in spec.word_weights.items()}
    return json.loads(json.dumps(doc))


def preset(name: str) -> ScenarioSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    text = resources.files(__package__).joinpath(f"presets/{name}.json").read_text()
    return spec_from_dict(json.loads(text))


def load_spec(source: str | Path) -> ScenarioSpec:
    """A preset name or a path to a spec document."""
    if str(source) in PRESETS:
        return preset(str(source))
    return spec_from_dict(json.loads(Path(source).read_text()))

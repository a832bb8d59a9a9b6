"""Dataset manifests, annotation building, splits, and synthetic corpora.

Manifests are JSON-lines files, one record per line with the fields
``{id, path, vienna, nice, split}``; paths are relative to the manifest
directory.  Invalid records are collected into an issue report instead
of aborting the load, unless more than 10% of the lines are bad.

The synthetic generator renders flat-color geometric logos with known
color/shape ground truth.  Shape geometry is chosen so that, after
border cropping, every logo keeps at least half of its bounding box in
ink: that makes flat colors exactly separable by the color-histogram
baseline, which the end-to-end checks rely on.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .taxonomy import CharacteristicKind, CodeParseError, LabelSpaces, parse_code

MANIFEST_NAME = "manifest.jsonl"
GROUPS_NAME = "groups.json"
MAX_INVALID_FRACTION = 0.10


class ManifestError(ValueError):
    def __init__(self, message: str, issues: Sequence["ManifestIssue"] = ()):
        super().__init__(message)
        self.issues = list(issues)


@dataclass(frozen=True)
class ManifestIssue:
    line: int
    message: str

    def as_dict(self) -> dict:
        return {"line": self.line, "message": self.message}


@dataclass(frozen=True)
class LogoRecord:
    logo_id: int
    path: str
    vienna: tuple[str, ...]
    nice: tuple[int, ...]
    split: str

    def as_dict(self) -> dict:
        return {
            "id": self.logo_id,
            "path": self.path,
            "vienna": list(self.vienna),
            "nice": list(self.nice),
            "split": self.split,
        }


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    records: tuple[LogoRecord, ...]
    version: int = 1
    issues: tuple[ManifestIssue, ...] = field(default=(), compare=False)

    def image_path(self, record: LogoRecord) -> Path:
        return self.root / record.path

    def by_id(self) -> dict[int, LogoRecord]:
        return {r.logo_id: r for r in self.records}

    def subset(self, split: str) -> tuple[LogoRecord, ...]:
        return tuple(r for r in self.records if r.split == split)


def _validate_record(obj: dict) -> LogoRecord:
    expected = {"id", "path", "vienna", "nice", "split"}
    if set(obj) != expected:
        raise ValueError(f"fields must be exactly {sorted(expected)}, got {sorted(obj)}")
    logo_id = obj["id"]
    if not isinstance(logo_id, int) or logo_id < 0:
        raise ValueError(f"id must be a non-negative integer, got {logo_id!r}")
    path = obj["path"]
    if not isinstance(path, str) or not path:
        raise ValueError("path must be a non-empty string")
    codes = obj["vienna"]
    if not isinstance(codes, list):
        raise ValueError("vienna must be a list of code strings")
    for code in codes:
        parse_code(code)  # raises CodeParseError with the offending field
    nice = obj["nice"]
    if not isinstance(nice, list) or not all(
        isinstance(n, int) and 1 <= n <= 45 for n in nice
    ):
        raise ValueError("nice must be a list of integers in [1, 45]")
    split = obj["split"]
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    return LogoRecord(logo_id, path, tuple(codes), tuple(nice), split)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest; aborts if >10% of lines are invalid."""
    path = Path(path)
    try:
        lines = path.read_text("utf-8").splitlines()
    except OSError as err:
        raise ManifestError(f"cannot read manifest {path}: {err}") from err
    records: list[LogoRecord] = []
    issues: list[ManifestIssue] = []
    seen_ids: set[int] = set()
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            obj = json.loads(line)
            record = _validate_record(obj)
            if record.logo_id in seen_ids:
                raise ValueError(f"duplicate id {record.logo_id}")
            seen_ids.add(record.logo_id)
            records.append(record)
        except (json.JSONDecodeError, CodeParseError, ValueError) as err:
            issues.append(ManifestIssue(lineno, str(err)))
    if total and len(issues) / total > MAX_INVALID_FRACTION:
        raise ManifestError(
            f"{len(issues)}/{total} records invalid (limit {MAX_INVALID_FRACTION:.0%})",
            issues,
        )
    return DatasetManifest(root=path.parent, records=tuple(records), issues=tuple(issues))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for record in manifest.records:
            fh.write(json.dumps(record.as_dict(), separators=(", ", ": ")) + "\n")


def split_train_test(manifest: DatasetManifest, ratio: float, seed: int) -> DatasetManifest:
    """Deterministic shuffled split; train size is round-half-up(ratio*N)."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    n = len(manifest.records)
    n_train = int(math.floor(ratio * n + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    train_rows = set(order[:n_train].tolist())
    records = tuple(
        replace(r, split="train" if row in train_rows else "test")
        for row, r in enumerate(manifest.records)
    )
    return DatasetManifest(root=manifest.root, records=records, version=manifest.version)


def build_annotations(
    manifest: DatasetManifest, spaces: LabelSpaces
) -> dict[int, dict[CharacteristicKind, frozenset[int]]]:
    """Ground-truth label sets per record: grouped codes plus sectors."""
    out: dict[int, dict[CharacteristicKind, frozenset[int]]] = {}
    for record in manifest.records:
        ann = spaces.annotate(parse_code(c) for c in record.vienna)
        sectors = {spaces.sector_label_for_nice(n) for n in record.nice}
        if sectors:
            ann.setdefault(CharacteristicKind.SECTOR, set()).update(sectors)
        out[record.logo_id] = {k: frozenset(v) for k, v in ann.items()}
    return out


# -- synthetic corpus ---------------------------------------------------------

#: Render palette. White is deliberately absent from the default drawing
#: palette: a white logo on the white canvas would be invisible to every
#: extractor and break the exact-separability guarantee.
SYNTH_COLORS: dict[str, tuple[int, int, int]] = {
    "red": (230, 30, 30),
    "yellow": (240, 210, 20),
    "green": (30, 160, 40),
    "blue": (30, 60, 200),
    "violet": (130, 40, 160),
    "brown": (120, 70, 30),
    "black": (10, 10, 10),
    "silver": (190, 190, 195),
    "gray": (120, 120, 120),
    "gold": (210, 170, 40),
    "orange": (240, 140, 20),
    "pink": (245, 160, 180),
}

#: Retained color section of 29.01 per palette name.
_COLOR_SECTION = {
    "red": 1, "yellow": 2, "green": 3, "blue": 4, "violet": 5, "white": 6,
    "brown": 7, "black": 8, "silver": 95, "gray": 96, "gold": 97,
    "orange": 98, "pink": 99,
}

SYNTH_SHAPES = ("circle", "square", "triangle", "line", "polygon")

_SHAPE_CODE = {
    "circle": "26.01",
    "square": "26.04",
    "triangle": "26.03",
    "line": "26.11",
    "polygon": "26.05",
}

#: Arbitrary but fixed goods/services class per shape so synthetic
#: manifests exercise the sector space too.
_SHAPE_NICE = {"circle": 38, "square": 7, "triangle": 25, "line": 39, "polygon": 28}


@dataclass(frozen=True)
class SyntheticSpec:
    n_logos: int
    duplicate_groups: int = 0
    duplicates_per_group: int = 0
    shapes: tuple[str, ...] = SYNTH_SHAPES
    colors: tuple[str, ...] = tuple(SYNTH_COLORS)
    text_fraction: float = 0.0
    image_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_logos < 1:
            raise ValueError("n_logos must be >= 1")
        if self.duplicate_groups * self.duplicates_per_group > self.n_logos:
            raise ValueError("duplicate groups exceed the corpus size")
        unknown = [c for c in self.colors if c not in SYNTH_COLORS]
        if unknown:
            raise ValueError(f"unknown palette colors: {unknown}")
        unknown = [s for s in self.shapes if s not in SYNTH_SHAPES]
        if unknown:
            raise ValueError(f"unknown shapes: {unknown}")
        if not 0.0 <= self.text_fraction <= 1.0:
            raise ValueError("text_fraction must lie in [0, 1]")

    @staticmethod
    def from_json(path: str | Path) -> "SyntheticSpec":
        obj = json.loads(Path(path).read_text("utf-8"))
        obj["shapes"] = tuple(obj.get("shapes", SYNTH_SHAPES))
        obj["colors"] = tuple(obj.get("colors", tuple(SYNTH_COLORS)))
        return SyntheticSpec(**obj)


def _draw_shape(draw: ImageDraw.ImageDraw, shape: str, color, size: int, params: dict) -> None:
    s = size
    cx, cy, scale = params["cx"] * s, params["cy"] * s, params["scale"]
    if shape == "circle":
        r = scale * 0.36 * s
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)
    elif shape == "square":
        a = scale * 0.36 * s
        stroke = 0.36 * a  # leaves a white interior: the crop stays honest
        draw.rectangle([cx - a, cy - a, cx + a, cy + a], fill=color)
        draw.rectangle(
            [cx - a + stroke, cy - a + stroke, cx + a - stroke, cy + a - stroke],
            fill=(255, 255, 255),
        )
    elif shape == "triangle":
        b = scale * 0.40 * s
        h = scale * 0.38 * s
        draw.polygon([(cx, cy - h), (cx - b, cy + h), (cx + b, cy + h)], fill=color)
    elif shape == "line":
        half_span = scale * 0.42 * s
        h = scale * 0.14 * s
        slant = 0.3 * half_span
        x0, x1 = cx - half_span, cx + half_span
        draw.polygon(
            [(x0 + slant, cy - h), (x1, cy - h), (x1 - slant, cy + h), (x0, cy + h)],
            fill=color,
        )
    elif shape == "polygon":
        r = scale * 0.40 * s
        points = []
        for i in range(5):
            angle = math.pi / 2 + 2 * math.pi * i / 5
            points.append((cx + r * math.cos(angle), cy - r * math.sin(angle)))
        draw.polygon(points, fill=color)
    else:  # pragma: no cover - guarded by SyntheticSpec
        raise ValueError(f"unknown shape {shape}")


def _draw_glyph_strip(draw: ImageDraw.ImageDraw, size: int, rng: np.random.Generator) -> None:
    """A row of small dark rectangles standing in for detected text."""
    s = size
    y0, y1 = int(0.86 * s), int(0.93 * s)
    x = int(0.12 * s)
    for _ in range(int(rng.integers(4, 8))):
        w = int(rng.integers(int(0.04 * s), int(0.10 * s)))
        draw.rectangle([x, y0, min(x + w, int(0.9 * s)), y1], fill=(15, 15, 15))
        x += w + int(0.025 * s)
        if x >= int(0.85 * s):
            break


def _base_params(rng: np.random.Generator, with_text: bool) -> dict:
    cy_high = 0.42 if with_text else 0.55
    return {
        "cx": float(rng.uniform(0.45, 0.55)),
        "cy": float(rng.uniform(0.40, cy_high)),
        "scale": float(rng.uniform(0.82, 1.0)),
    }


def _jitter(params: dict, rng: np.random.Generator, size: int) -> dict:
    shift = 0.03  # fraction of the canvas
    return {
        "cx": params["cx"] + float(rng.uniform(-shift, shift)),
        "cy": params["cy"] + float(rng.uniform(-shift, shift)),
        "scale": params["scale"] * float(rng.uniform(0.92, 1.0)),
    }


def generate_synthetic_corpus(
    spec: SyntheticSpec, out_dir: str | Path
) -> tuple[DatasetManifest, dict[int, list[int]]]:
    """Render the corpus and write ``manifest.jsonl`` plus ``groups.json``.

    The first ``duplicate_groups * duplicates_per_group`` ids form the
    near-duplicate groups (jittered copies of one base drawing).  Each
    group owns a (color, shape) pair that no distractor reuses, so group
    membership is the unique nearest-neighbor signal by construction.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    try:
        images_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ManifestError(f"cannot create output directory {images_dir}: {err}") from err
    rng = np.random.default_rng(spec.seed)
    combos = [(c, s) for c in spec.colors for s in spec.shapes]
    group_combos = [
        (spec.colors[g % len(spec.colors)], spec.shapes[g % len(spec.shapes)])
        for g in range(spec.duplicate_groups)
    ]
    if len(set(group_combos)) != len(group_combos):
        raise ValueError("palette too small for distinct per-group color/shape pairs")
    distractor_combos = [c for c in combos if c not in group_combos]
    if not distractor_combos and spec.n_logos > spec.duplicate_groups * spec.duplicates_per_group:
        raise ValueError("no color/shape pairs left for distractors")

    records: list[LogoRecord] = []
    groups: dict[int, list[int]] = {}
    logo_id = 0

    def render(color_name: str, shape: str, params: dict, with_text: bool) -> LogoRecord:
        nonlocal logo_id
        img = Image.new("RGB", (spec.image_size, spec.image_size), (255, 255, 255))
        draw = ImageDraw.Draw(img)
        _draw_shape(draw, shape, SYNTH_COLORS[color_name], spec.image_size, params)
        codes = [f"29.01.{_COLOR_SECTION[color_name]:02d}", _SHAPE_CODE[shape]]
        if with_text:
            _draw_glyph_strip(draw, spec.image_size, rng)
            codes.append("27")
        rel = f"images/logo_{logo_id:05d}.png"
        img.save(out_dir / rel)
        record = LogoRecord(
            logo_id=logo_id,
            path=rel,
            vienna=tuple(codes),
            nice=(_SHAPE_NICE[shape],),
            split="train",
        )
        logo_id += 1
        return record

    for g, (color_name, shape) in enumerate(group_combos):
        base = _base_params(rng, with_text=False)
        members = []
        for _ in range(spec.duplicates_per_group):
            record = render(color_name, shape, _jitter(base, rng, spec.image_size), False)
            records.append(record)
            members.append(record.logo_id)
        groups[g] = members

    while logo_id < spec.n_logos:
        color_name, shape = distractor_combos[
            (logo_id - spec.duplicate_groups * spec.duplicates_per_group)
            % len(distractor_combos)
        ]
        with_text = bool(rng.random() < spec.text_fraction)
        records.append(render(color_name, shape, _base_params(rng, with_text), with_text))

    manifest = DatasetManifest(root=out_dir, records=tuple(records))
    save_manifest(manifest, out_dir / MANIFEST_NAME)
    (out_dir / GROUPS_NAME).write_text(
        json.dumps({str(g): m for g, m in groups.items()}, indent=2), "utf-8"
    )
    return manifest, groups


def load_groups(path: str | Path) -> dict[int, list[int]]:
    obj = json.loads(Path(path).read_text("utf-8"))
    return {int(g): [int(i) for i in members] for g, members in obj.items()}

"""Per-characteristic feature vectors, fusion, and the weighted distance.

Each logo is described by one block per characteristic (color, shape,
figurative, text, sector, generic appearance).  Blocks are L2-normalized
independently so their Euclidean sub-distances share the same [0, 2]
range regardless of dimensionality; the overall dissimilarity between
two fused features is the weight-normalized convex combination

    d_w(A, B) = sum_c w_c * ||A_c - B_c|| / sum_c w_c

over the characteristics the caller cares about.  Externally computed
embeddings travel in the binary store format documented next to
:func:`read_neural_codes`.

Baseline extractors (joint color histogram, oriented-edge histogram,
text-pixel heuristic) let the whole pipeline run on raw images when no
trained network embeddings are available.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .taxonomy import KIND_ORDER, CharacteristicKind

UNIT_NORM_TOLERANCE = 1e-6

COLOR_HIST_BINS = 5          # per channel; 5**3 = 125 dims
EDGE_ORIENT_BINS = 16
EDGE_GRID_ROWS = 2
EDGE_GRID_COLS = 4           # 16 orientations * 8 cells = 128 dims

#: Rec. 601 luma weights for grayscale conversion.
_LUMA = np.array([0.299, 0.587, 0.114])


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureBlock:
    """One characteristic's descriptor vector."""

    kind: CharacteristicKind
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise FeatureError(f"{self.kind.token}: block must be a non-empty 1-D vector")
        if not np.isfinite(v).all():
            raise FeatureError(f"{self.kind.token}: block contains non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    def norm(self) -> float:
        v = self.values
        return float(np.sqrt(np.sum(v * v)))

    def is_normalized(self, tolerance: float = UNIT_NORM_TOLERANCE) -> bool:
        n = self.norm()
        return n == 0.0 or abs(n - 1.0) <= tolerance


def l2_normalize(block: FeatureBlock) -> FeatureBlock:
    """Scale to unit Euclidean length; the zero vector stays zero."""
    n = block.norm()
    if n == 0.0:
        return block
    return FeatureBlock(block.kind, block.values / n)


@dataclass(frozen=True)
class FusedFeature:
    """Blocks keyed by kind, concatenated in canonical kind order."""

    blocks: Mapping[CharacteristicKind, FeatureBlock]

    def __post_init__(self):
        ordered = {}
        for kind in KIND_ORDER:
            if kind in self.blocks:
                blk = self.blocks[kind]
                if blk.kind is not kind:
                    raise FeatureError(f"block under key {kind.token} has kind {blk.kind.token}")
                ordered[kind] = blk
        if len(ordered) != len(self.blocks):
            raise FeatureError("unknown block key")
        object.__setattr__(self, "blocks", ordered)

    def block(self, kind: CharacteristicKind) -> FeatureBlock:
        try:
            return self.blocks[kind]
        except KeyError:
            raise FeatureError(f"fused feature has no {kind.token} block") from None

    def kinds(self) -> tuple[CharacteristicKind, ...]:
        return tuple(self.blocks)

    def concatenated(self) -> np.ndarray:
        return np.concatenate([b.values for b in self.blocks.values()])


@dataclass(frozen=True)
class QueryWeights:
    """Normalized per-characteristic weights (non-negative, sum 1)."""

    weights: Mapping[CharacteristicKind, float]

    def __post_init__(self):
        clean = {}
        for kind, w in self.weights.items():
            if not isinstance(kind, CharacteristicKind):
                raise FeatureError(f"weight key {kind!r} is not a characteristic kind")
            w = float(w)
            if not np.isfinite(w) or w < 0:
                raise FeatureError(f"weight for {kind.token} must be finite and >= 0")
            clean[kind] = w
        total = sum(clean.values())
        if total <= 0:
            raise FeatureError("at least one weight must be positive")
        if abs(total - 1.0) > 1e-9:
            raise FeatureError("weights must sum to 1; use QueryWeights.normalized()")
        object.__setattr__(self, "weights", dict(clean))

    @staticmethod
    def normalized(raw: Mapping[CharacteristicKind, float]) -> "QueryWeights":
        """Build from raw non-negative weights, rescaling to sum 1."""
        total = float(sum(raw.values()))
        if total <= 0 or not np.isfinite(total):
            raise FeatureError("raw weights must contain a positive entry")
        return QueryWeights({k: float(v) / total for k, v in raw.items()})

    def positive_kinds(self) -> tuple[CharacteristicKind, ...]:
        return tuple(k for k in KIND_ORDER if self.weights.get(k, 0.0) > 0.0)

    def get(self, kind: CharacteristicKind) -> float:
        return self.weights.get(kind, 0.0)


def block_distance(a: FeatureBlock, b: FeatureBlock) -> float:
    """Euclidean distance between two same-kind blocks (float64 math)."""
    if a.kind is not b.kind:
        raise FeatureError(f"kind mismatch: {a.kind.token} vs {b.kind.token}")
    if a.dim != b.dim:
        raise FeatureError(f"{a.kind.token}: dimension mismatch {a.dim} vs {b.dim}")
    diff = a.values - b.values
    return float(np.sqrt(np.sum(diff * diff)))


def weighted_distance(a: FusedFeature, b: FusedFeature, w: QueryWeights) -> float:
    """Weight-averaged Euclidean dissimilarity over the positive kinds.

    Kinds with zero weight are skipped entirely; a positively weighted
    kind missing from either side is an error (silent zeros would
    corrupt rankings).
    """
    num = 0.0
    den = 0.0
    for kind in w.positive_kinds():
        wc = w.get(kind)
        num += wc * block_distance(a.block(kind), b.block(kind))
        den += wc
    return num / den


# -- baseline extractors ----------------------------------------------------


def _check_normalized_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FeatureError(f"expected (H, W, 3) normalized image, got {img.shape}")
    return img


def color_histogram_extractor(img: np.ndarray) -> FeatureBlock:
    """Joint 5x5x5 RGB histogram, L1- then L2-normalized (125 dims)."""
    img = _check_normalized_image(img)
    bins = np.clip((img * COLOR_HIST_BINS).astype(int), 0, COLOR_HIST_BINS - 1)
    flat = (bins[..., 0] * COLOR_HIST_BINS + bins[..., 1]) * COLOR_HIST_BINS + bins[..., 2]
    counts = np.bincount(flat.ravel(), minlength=COLOR_HIST_BINS**3).astype(np.float64)
    hist = counts / counts.sum()
    return l2_normalize(FeatureBlock(CharacteristicKind.COLOR, hist))


def edge_orientation_extractor(img: np.ndarray) -> FeatureBlock:
    """Magnitude-weighted edge-orientation histogram (128 dims).

    Central-difference gradients on the grayscale image, 16 orientation
    bins per cell of a 2x4 spatial grid.  A gradient-free image yields
    the all-zero block.
    """
    img = _check_normalized_image(img)
    gray = img @ _LUMA
    h, w = gray.shape
    if h < 3 or w < 3:
        return FeatureBlock(CharacteristicKind.SHAPE, np.zeros(_edge_dim()))
    gx = (gray[1:-1, 2:] - gray[1:-1, :-2]) / 2.0
    gy = (gray[2:, 1:-1] - gray[:-2, 1:-1]) / 2.0
    mag = np.sqrt(gx * gx + gy * gy)
    theta = np.arctan2(gy, gx)  # (-pi, pi]
    obin = np.clip(
        ((theta + np.pi) / (2 * np.pi) * EDGE_ORIENT_BINS).astype(int),
        0,
        EDGE_ORIENT_BINS - 1,
    )
    ys = np.arange(1, h - 1)
    xs = np.arange(1, w - 1)
    cell_r = np.minimum(ys * EDGE_GRID_ROWS // h, EDGE_GRID_ROWS - 1)
    cell_c = np.minimum(xs * EDGE_GRID_COLS // w, EDGE_GRID_COLS - 1)
    cell = cell_r[:, None] * EDGE_GRID_COLS + cell_c[None, :]
    flat = cell * EDGE_ORIENT_BINS + obin
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=_edge_dim())
    return l2_normalize(FeatureBlock(CharacteristicKind.SHAPE, hist))


def _edge_dim() -> int:
    return EDGE_GRID_ROWS * EDGE_GRID_COLS * EDGE_ORIENT_BINS


def text_presence_extractor(img: np.ndarray, dark_threshold: float = 0.5) -> FeatureBlock:
    """Two-dim one-hot from a crude text heuristic.

    Looks for an ink strip along the bottom quarter of the logo: a dark
    pixel ratio between 1% and 50% there reads as text.  Index 0 = no
    text, index 1 = text present.
    """
    img = _check_normalized_image(img)
    h = img.shape[0]
    strip = img[int(h * 0.75):]
    luma = strip @ _LUMA
    ratio = float((luma < dark_threshold).mean()) if luma.size else 0.0
    onehot = np.zeros(2)
    onehot[1 if 0.01 < ratio < 0.5 else 0] = 1.0
    return FeatureBlock(CharacteristicKind.TEXT, onehot)


BASELINE_EXTRACTORS = {
    CharacteristicKind.COLOR: color_histogram_extractor,
    CharacteristicKind.SHAPE: edge_orientation_extractor,
    CharacteristicKind.TEXT: text_presence_extractor,
}


# -- embedding store ---------------------------------------------------------
#
# Binary layout (little-endian, bit-exact for cross-language interchange):
#   magic   : 4 bytes  b"NCF1"
#   kind    : u8       CharacteristicKind value
#   dim     : u32      vector length
#   count   : u64      number of records
#   normed  : u8       1 if vectors are already unit length
#   records : count * { logo_id: u64, values: dim * f32 }

NEURAL_CODE_MAGIC = b"NCF1"
_HEADER = struct.Struct("<4sBIQB")


class NeuralCodeFormatError(ValueError):
    pass


def write_neural_codes(
    path: str | Path,
    kind: CharacteristicKind,
    vectors: Mapping[int, np.ndarray] | Iterable[tuple[int, np.ndarray]],
    normalized: bool = False,
) -> None:
    items = list(vectors.items()) if isinstance(vectors, Mapping) else list(vectors)
    if not items:
        raise NeuralCodeFormatError("refusing to write an empty embedding store")
    dim = int(np.asarray(items[0][1]).size)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(NEURAL_CODE_MAGIC, kind.value, dim, len(items), int(normalized)))
        for logo_id, vec in items:
            arr = np.asarray(vec, dtype="<f4").ravel()
            if arr.size != dim:
                raise NeuralCodeFormatError(
                    f"record {logo_id}: dim {arr.size} does not match header dim {dim}"
                )
            fh.write(struct.pack("<Q", int(logo_id)))
            fh.write(arr.tobytes())


def read_neural_codes(path: str | Path) -> dict[int, FeatureBlock]:
    """Load an embedding store; vectors are L2-normalized on load unless
    the header marks them as already normalized."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise NeuralCodeFormatError("truncated header")
    magic, kind_id, dim, count, normalized = _HEADER.unpack_from(data)
    if magic != NEURAL_CODE_MAGIC:
        raise NeuralCodeFormatError(f"bad magic {magic!r}")
    try:
        kind = CharacteristicKind(kind_id)
    except ValueError:
        raise NeuralCodeFormatError(f"unknown kind id {kind_id}") from None
    if dim == 0:
        raise NeuralCodeFormatError("header declares dim 0")
    payload = data[_HEADER.size:]
    record_size = 8 + 4 * dim
    if len(payload) != count * record_size:
        raise NeuralCodeFormatError(
            f"truncated payload: expected {count} records of {record_size} bytes, "
            f"got {len(payload)} bytes"
        )
    dtype = np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))])
    records = np.frombuffer(payload, dtype=dtype)
    out: dict[int, FeatureBlock] = {}
    for rec in records:
        logo_id = int(rec["id"])
        if logo_id in out:
            raise NeuralCodeFormatError(f"duplicate logo id {logo_id}")
        block = FeatureBlock(kind, np.array(rec["vec"]))
        out[logo_id] = block if normalized else l2_normalize(block)
    return out


def import_neural_codes(path: str | Path) -> dict[int, FeatureBlock]:
    return read_neural_codes(path)

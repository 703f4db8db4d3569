"""Sample collections: IDX / CSV ingestion, min-max scaling, epoch streams."""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, ParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    samples: np.ndarray  # (n, d) float64, C-contiguous
    labels: np.ndarray | None = None
    per_dim_min: np.ndarray | None = None
    per_dim_max: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise InvalidArgument("samples must be a 2-D array")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.samples):
                raise InvalidArgument(
                    f"{len(self.labels)} labels for {len(self.samples)} samples"
                )

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def classes(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.labels)

    @property
    def is_normalized(self) -> bool:
        return self.per_dim_min is not None

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self,
            samples=self.samples[idx],
            labels=None if self.labels is None else self.labels[idx],
        )

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        if not self.is_normalized:
            return x
        span = self.per_dim_max - self.per_dim_min
        return x * span + self.per_dim_min


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _idx_header(raw: bytes, magic: int, ndims: int, path) -> tuple[int, ...]:
    need = 4 + 4 * ndims
    if len(raw) < need:
        raise ParseError(f"{path}: truncated IDX header ({len(raw)} bytes)", len(raw))
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise ParseError(f"{path}: bad magic 0x{got:08x} at byte 0, expected 0x{magic:08x}", 0)
    return struct.unpack(">" + "I" * ndims, raw[4:need])


def load_idx(image_path, label_path=None) -> Dataset:
    """Read MNIST-style IDX files (optionally gzipped) into raw 0-255 values."""
    raw = _read_bytes(image_path)
    n, rows, cols = _idx_header(raw, IDX_IMAGES_MAGIC, 3, image_path)
    d = rows * cols
    body = raw[16:]
    if len(body) < n * d:
        raise ParseError(
            f"{image_path}: truncated pixel data, expected {n * d} bytes after offset 16",
            16 + len(body),
        )
    samples = np.frombuffer(body, dtype=np.uint8, count=n * d).reshape(n, d)
    labels = None
    if label_path is not None:
        lraw = _read_bytes(label_path)
        (m,) = _idx_header(lraw, IDX_LABELS_MAGIC, 1, label_path)
        if m != n:
            raise ParseError(f"{label_path}: {m} labels for {n} images (offset 4)", 4)
        if len(lraw) - 8 < m:
            raise ParseError(f"{label_path}: truncated label data", len(lraw))
        labels = np.frombuffer(lraw[8:], dtype=np.uint8, count=m).astype(np.int64)
    return Dataset(samples.astype(np.float64), labels, name=Path(image_path).name)


def write_idx(samples, labels, image_path, label_path=None, shape=None) -> None:
    """Write ``uint8`` samples (and labels) in IDX format; inverse of :func:`load_idx`."""
    samples = np.asarray(samples, dtype=np.uint8)
    n = samples.shape[0]
    rows, cols = shape if shape is not None else (1, samples.shape[1])
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(samples.reshape(n, -1).tobytes())
    if label_path is not None:
        with open(label_path, "wb") as fh:
            fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
            fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


def load_csv(path, label_column: int | None = None, header: bool = False,
             delimiter: str | None = None) -> Dataset:
    """Read a numeric table; ``label_column`` (negative allowed) holds class ids."""
    text = _read_bytes(path).decode()
    if delimiter is None:
        first = text.split("\n", 1)[0]
        delimiter = "," if "," in first else (";" if ";" in first else None)
    lines = text.splitlines()
    if header:
        lines = lines[1:]
    reader = csv.reader(lines, delimiter=delimiter) if delimiter else (
        ln.split() for ln in lines
    )
    rows, labels = [], []
    width = None
    for lineno, row in enumerate(reader, start=2 if header else 1):
        row = [c.strip() for c in row]
        if not row or all(c == "" for c in row):
            continue
        if width is None:
            width = len(row)
            if label_column is not None and not -width <= label_column < width:
                raise InvalidArgument(
                    f"label_column {label_column} out of range for {width} columns"
                )
        elif len(row) != width:
            raise ParseError(f"{path}: row {lineno} has {len(row)} columns, expected {width}", lineno)
        if label_column is not None:
            lab = row.pop(label_column)
            try:
                labels.append(int(float(lab)))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric label {lab!r}", lineno) from None
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"{path}: row {lineno}: non-numeric feature cell", lineno) from None
    if not rows:
        raise ParseError(f"{path}: no data rows", 0)
    return Dataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64) if label_column is not None else None,
        name=Path(path).name,
    )


def normalize(dataset: Dataset) -> Dataset:
    """Min-max scale every dimension to [0, 1]; constant dimensions map to 0."""
    if len(dataset) == 0:
        raise InvalidArgument("cannot normalize an empty dataset")
    x = dataset.samples
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (x - lo) / safe, 0.0)
    return replace(dataset, samples=scaled, per_dim_min=lo, per_dim_max=hi)


def apply_normalization(dataset: Dataset, reference: Dataset) -> Dataset:
    """Scale ``dataset`` with the min/max recorded on ``reference``, clipped to [0, 1]."""
    lo, hi = reference.per_dim_min, reference.per_dim_max
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (dataset.samples - lo) / safe, 0.0)
    return replace(dataset, samples=np.clip(scaled, 0.0, 1.0), per_dim_min=lo, per_dim_max=hi)


def synthetic_square(n: int, seed: int = 0, d: int = 2) -> Dataset:
    """Uniform samples on the unit square (or hypercube)."""
    rng = np.random.default_rng(seed)
    return Dataset(rng.random((n, d)), name=f"square{d}d-{n}")


def epoch_order(n_samples: int, i_max: int, rng) -> np.ndarray:
    """Concatenated shuffled epochs truncated to ``i_max`` sample indices."""
    if i_max < 0:
        raise InvalidArgument("i_max must be non-negative")
    if i_max == 0:
        return np.zeros(0, dtype=np.int64)
    epochs = math.ceil(i_max / n_samples)
    order = np.concatenate([rng.permutation(n_samples) for _ in range(epochs)])
    return order[:i_max].astype(np.int64)


def epoch_stream(dataset: Dataset, i_max: int, rng):
    """Yield ``(i, sample_index, vector)`` over shuffled epochs."""
    if i_max < 1:
        raise InvalidArgument("i_max must be >= 1")
    for i, idx in enumerate(epoch_order(len(dataset), i_max, rng)):
        yield i, int(idx), dataset.samples[idx]


def train_test_split(dataset: Dataset, n_train: int, seed: int = 0,
                     stratify: bool = True) -> tuple[Dataset, Dataset]:
    """Deterministic split; stratified by label when labels exist."""
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if not 0 < n_train < n:
        raise InvalidArgument(f"n_train must lie in (0, {n})")
    if stratify and dataset.labels is not None:
        train_idx = []
        frac = n_train / n
        for c in dataset.classes:
            members = rng.permutation(np.flatnonzero(dataset.labels == c))
            train_idx.extend(members[: int(round(frac * len(members)))].tolist())
        train_idx = np.array(train_idx)
        # fix rounding so the train split has exactly n_train samples
        rest = np.setdiff1d(np.arange(n), train_idx)
        if len(train_idx) > n_train:
            train_idx = rng.permutation(train_idx)[:n_train]
        elif len(train_idx) < n_train:
            extra = rng.choice(rest, n_train - len(train_idx), replace=False)
            train_idx = np.concatenate([train_idx, extra])
        train_idx = np.sort(train_idx)
    else:
        train_idx = np.sort(rng.permutation(n)[:n_train])
    test_idx = np.setdiff1d(np.arange(n), train_idx)
    return dataset.subset(train_idx), dataset.subset(test_idx)

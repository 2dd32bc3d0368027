# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Dataset ingestion, preprocessing and synthetic quantum datasets.

IDX files (MNIST / Fashion-MNIST), big-endian:

    offset 0   magic   0x00000803 (images, dims = count, rows, cols)
                       0x00000801 (labels, dims = count)
    offset 4   one uint32 per dimension
    then       unsigned bytes, row-major

Files may be gzipped (".gz"). The dataset root comes from QAL_DATA_DIR:

    $QAL_DATA_DIR/fashion-mnist/train-images-idx3-ubyte[.gz]
    $QAL_DATA_DIR/fashion-mnist/train-labels-idx1-ubyte[.gz]
    $QAL_DATA_DIR/fashion-mnist/t10k-images-idx3-ubyte[.gz]
    $QAL_DATA_DIR/fashion-mnist/t10k-labels-idx1-ubyte[.gz]
    $QAL_DATA_DIR/mnist/...    (same names)
"""

from __future__ import annotations

import enum
import gzip
import logging
import math
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Final, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .hamiltonians import (
    ModelSpec,
    aubry_andre_phase,
    cluster_ising,
    cluster_ising_phase,
    ground_state,
)

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC: Final[int] = 0x00000803
IDX_LABELS_MAGIC: Final[int] = 0x00000801
DATA_DIR_ENV: Final[str] = "QAL_DATA_DIR"
DEFAULT_CLASSES: Final[dict[str, tuple[int, int]]] = {
    "fashion-mnist": (1, 9),  # trouser vs ankle boot
    "mnist": (1, 9),
}
ANGLE_SCALES: Final[dict[str, float]] = {"pi": math.pi, "2pi": 2 * math.pi, "unit": 1.0}
_IDX_FILES: Final[dict[str, tuple[str, str]]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    """Raised on bad magic numbers, truncated files or image/label count mismatches."""
    pass


class DatasetError(ValueError):
    """Raised on invalid samples, labels, class filters or split sizes."""
    pass


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------

class DatasetKind(str, enum.Enum):
    CLASSICAL = "classical"
    HAMILTONIAN = "hamiltonian"
    QUANTUM_STATE = "quantum_state"


@dataclass(frozen=True, eq=False)
class Sample:
    payload: Any  # np.ndarray (classical), ModelSpec (hamiltonian), PureState (quantum_state)
    label: int
    sample_id: int = 0
    meta: Mapping[str, Any] = field(default_factory=dict)


@dataclass(eq=False)
class LabeledDataset:
    kind: DatasetKind
    samples: list[Sample]
    k_classes: int = 2
    classes: tuple[int, ...] = ()  # source class ids, position = new label
    split_seed: int | None = None

    def __post_init__(self) -> None:
        self.kind = DatasetKind(self.kind)
        self.samples = list(self.samples)
        for s in self.samples:
            if not 0 <= s.label < self.k_classes:
                raise DatasetError(
                    f"sample {s.sample_id}: label {s.label} outside 0..{self.k_classes - 1}"
                )
        if self.kind is DatasetKind.CLASSICAL and self.samples:
            dims = {np.asarray(s.payload).size for s in self.samples}
            if len(dims) != 1:
                raise DatasetError(f"classical payloads have mixed dimensions {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, i: int) -> Sample:
        return self.samples[i]

    @property
    def data_dim(self) -> int:
        if self.kind is not DatasetKind.CLASSICAL or not self.samples:
            raise DatasetError("data_dim: only defined for nonempty classical datasets")
        return int(np.asarray(self.samples[0].payload).size)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def subset(self, indices: Sequence[int]) -> LabeledDataset:
        return replace(self, samples=[self.samples[i] for i in indices])

    def class_balance(self) -> np.ndarray:
        return np.bincount(self.labels(), minlength=self.k_classes) / max(len(self), 1)


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------

class RawImages(NamedTuple):
    images: np.ndarray  # uint8, (count, rows, cols)
    labels: np.ndarray  # uint8, (count,)


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    opener: Callable = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def read_idx(path: str | Path) -> tuple[int, np.ndarray]:
    """Return (magic, array) for an unsigned-byte IDX file."""
    data = _read_bytes(path)
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header ({len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    zero, dtype_code, ndim = magic >> 16, (magic >> 8) & 0xFF, magic & 0xFF
    if zero != 0 or dtype_code != 0x08 or ndim == 0:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08X}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = math.prod(dims)
    if len(data) - header < count:
        raise IdxFormatError(
            f"{path}: truncated payload ({len(data) - header} of {count} bytes)"
        )
    arr = np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)
    return magic, arr


def write_idx(path: str | Path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (gzipped when the name ends in .gz)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = (0x08 << 8) | array.ndim
    blob = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape) + array.tobytes()
    path = Path(path)
    opener: Callable = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as f:
        f.write(blob)


def load_idx(images_path: str | Path, labels_path: str | Path) -> RawImages:
    img_magic, images = read_idx(images_path)
    if img_magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"{images_path}: expected image magic 0x803, got 0x{img_magic:X}")
    lbl_magic, labels = read_idx(labels_path)
    if lbl_magic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"{labels_path}: expected label magic 0x801, got 0x{lbl_magic:X}")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    return RawImages(images, labels)


def data_root() -> Path | None:
    root = os.environ.get(DATA_DIR_ENV)
    return Path(root) if root else None


def dataset_files(name: str, part: str = "train", root: Path | None = None) -> tuple[Path, Path]:
    """Locate (images, labels) for `name` under the data root, preferring plain over .gz."""
    if name not in DEFAULT_CLASSES:
        raise DatasetError(f"dataset: unknown image dataset {name!r}")
    if part not in _IDX_FILES:
        raise DatasetError(f"dataset: part must be 'train' or 'test', got {part!r}")
    root = root if root is not None else data_root()
    if root is None:
        raise DatasetError(f"dataset: {DATA_DIR_ENV} is not set")
    found = []
    for stem in _IDX_FILES[part]:
        candidates = [root / name / stem, root / name / f"{stem}.gz"]
        hit = next((c for c in candidates if c.exists()), None)
        if hit is None:
            raise DatasetError(f"dataset: missing {candidates[0]} (or .gz)")
        found.append(hit)
    return found[0], found[1]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def area_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) box-averaging matrix: row i averages source cells overlapping [i, i+1)*src/dst."""
    if dst < 1 or dst > src:
        raise DatasetError(f"resize: target side {dst} must be in [1, {src}]")
    scale = src / dst
    w = np.zeros((dst, src))
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        for r in range(int(math.floor(lo)), int(math.ceil(hi))):
            w[i, r] = max(0.0, min(hi, r + 1) - max(lo, r))
    return w / scale


def downsample(images: np.ndarray, side: int) -> np.ndarray:
    """Box-average (count, rows, cols) images to (count, side, side)."""
    images = np.asarray(images, dtype=float)
    wr = area_weights(images.shape[1], side)
    wc = area_weights(images.shape[2], side)
    return np.einsum("ir,nrc,jc->nij", wr, images, wc)


def preprocess(
    raw: RawImages,
    side: int = 10,
    classes: Sequence[int] = (1, 9),
    angle_range: str = "pi",
    limit: int | None = None,
) -> LabeledDataset:
    """Filter to `classes` (relabelled 0..k-1), downsample, map pixels to rotation angles."""
    classes = tuple(int(c) for c in classes)
    if len(classes) < 2 or len(set(classes)) != len(classes):
        raise DatasetError(f"classes: need at least two distinct ids, got {classes}")
    present = set(np.unique(raw.labels).tolist())
    missing = [c for c in classes if c not in present]
    if missing:
        raise DatasetError(f"classes: unknown class ids {missing}")
    if angle_range not in ANGLE_SCALES:
        raise DatasetError(f"angle_range: expected one of {sorted(ANGLE_SCALES)}: {angle_range!r}")

    keep = np.flatnonzero(np.isin(raw.labels, classes))
    if limit is not None:
        keep = keep[:limit]
    small = downsample(raw.images[keep], side) / 255.0 * ANGLE_SCALES[angle_range]
    lookup = {c: i for i, c in enumerate(classes)}
    samples = [
        Sample(small[j].reshape(-1), lookup[int(raw.labels[idx])], sample_id=int(idx))
        for j, idx in enumerate(keep)
    ]
    log.info("preprocess: kept %d of %d images, %dx%d", len(samples), raw.labels.size, side, side)
    return LabeledDataset(DatasetKind.CLASSICAL, samples, k_classes=len(classes), classes=classes)


def load_image_dataset(
    name: str,
    part: str = "train",
    side: int = 10,
    classes: Sequence[int] | None = None,
    angle_range: str = "pi",
    limit: int | None = None,
    root: Path | None = None,
) -> LabeledDataset:
    images, labels = dataset_files(name, part, root)
    raw = load_idx(images, labels)
    return preprocess(raw, side, classes or DEFAULT_CLASSES[name], angle_range, limit)


# ---------------------------------------------------------------------------
# synthetic datasets
# ---------------------------------------------------------------------------

def gen_aubry_andre_dataset(
    n_samples: int,
    rng: np.random.Generator,
    n_qubits: int = 10,
    g: float = 1.0,
    v_range: tuple[float, float] = (0.0, 4.0),
) -> LabeledDataset:
    """V ~ U(v_range), label 1 when localised (V/g > 2); payload is the model descriptor."""
    samples = []
    for i in range(n_samples):
        v = float(rng.uniform(*v_range))
        spec = ModelSpec.aubry_andre(n_qubits, g, v)
        samples.append(Sample(spec, aubry_andre_phase(g, v), sample_id=i, meta={"g": g, "V": v}))
    return LabeledDataset(DatasetKind.HAMILTONIAN, samples, k_classes=2, classes=(0, 1))


def cluster_ising_sample(n_qubits: int, h: float, sample_id: int = 0) -> Sample:
    gs = ground_state(cluster_ising(n_qubits, h))
    meta = {"h": h, "energy": gs.energy, "degenerate": gs.degenerate}
    return Sample(gs.state, cluster_ising_phase(h), sample_id=sample_id, meta=meta)


def gen_cluster_ising_dataset(
    n_samples: int,
    rng: np.random.Generator,
    n_qubits: int = 10,
    h_range: tuple[float, float] = (0.0, 2.0),
    mapper: Callable | None = None,
) -> LabeledDataset:
    """h ~ U(h_range), label 1 in the antiferromagnetic phase (h > 1); payload is the ground state.

    `mapper(fn, items)` may run the diagonalisations concurrently (see runtime.parallel_map).
    """
    hs = [float(rng.uniform(*h_range)) for _ in range(n_samples)]
    jobs = list(enumerate(hs))
    build = lambda job: cluster_ising_sample(n_qubits, job[1], job[0])  # noqa: E731
    samples = list(mapper(build, jobs)) if mapper else [build(j) for j in jobs]
    return LabeledDataset(DatasetKind.QUANTUM_STATE, samples, k_classes=2, classes=(0, 1))


def gen_synthetic(
    n_samples: int,
    data_dim: int,
    rng: np.random.Generator,
    k_classes: int = 2,
    spread: float = 0.3,
) -> LabeledDataset:
    """Toy classical data: Gaussian clusters around random angle centres, clipped to [0, pi]."""
    if n_samples < 1 or data_dim < 1:
        raise DatasetError(f"synthetic: need n_samples, data_dim >= 1, got {n_samples}, {data_dim}")
    centres = rng.uniform(0.0, math.pi, size=(k_classes, data_dim))
    samples = []
    for i in range(n_samples):
        y = i % k_classes
        x = np.clip(centres[y] + spread * rng.standard_normal(data_dim), 0.0, math.pi)
        samples.append(Sample(x, y, sample_id=i))
    return LabeledDataset(
        DatasetKind.CLASSICAL, samples, k_classes=k_classes, classes=tuple(range(k_classes))
    )


def split(
    dataset: LabeledDataset, test_size: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded uniform split; both halves keep the original sample order."""
    if not 0 <= test_size <= len(dataset):
        raise DatasetError(f"split: test size {test_size} out of range for {len(dataset)} samples")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    test_idx = np.sort(perm[:test_size])
    train_idx = np.sort(perm[test_size:])
    train = replace(dataset.subset(train_idx.tolist()), split_seed=seed)
    test = replace(dataset.subset(test_idx.tolist()), split_seed=seed)
    return train, test

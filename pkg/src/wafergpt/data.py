"""Sequence datasets: UCR TSV / canonical CSV ingestion, min-max scaling and quantization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateRange, EmptyFile, InvalidResolution, MalformedInput

NORMAL = "normal"
ABNORMAL = "abnormal"
LABELS = (NORMAL, ABNORMAL)

UCR_LABELS = {1: NORMAL, -1: ABNORMAL}

# Canonical text precision for every CSV this package writes.
FLOAT_FMT = "{:.9g}"

PathLike = Union[str, Path]


@dataclass
class LabeledSequence:
    id: str
    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"sequence {self.id!r}: values must be 1-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"sequence {self.id!r}: non-finite value")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"sequence {self.id!r}: unknown label {self.label!r}")


@dataclass
class Dataset:
    sequences: list
    seq_len: int
    split: str = "train"

    def __post_init__(self):
        if not self.sequences:
            raise EmptyFile("dataset has no sequences")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        for i, s in enumerate(self.sequences):
            if len(s.values) != self.seq_len:
                raise MalformedInput(i + 1, f"length {len(s.values)} != seq_len {self.seq_len}")

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def n(self) -> int:
        return len(self.sequences)

    @property
    def ids(self) -> list:
        return [s.id for s in self.sequences]

    @property
    def labels(self) -> list:
        return [s.label for s in self.sequences]

    def values(self) -> np.ndarray:
        """Raw values as an ``(N, T)`` float64 matrix (copy)."""
        return np.stack([s.values for s in self.sequences])

    def label_counts(self) -> dict:
        counts = {NORMAL: 0, ABNORMAL: 0, None: 0}
        for s in self.sequences:
            counts[s.label] += 1
        return counts


@dataclass(frozen=True)
class NormalizationParams:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise DegenerateRange("normalization bounds must be finite")
        if not self.max > self.min:
            raise DegenerateRange(f"max ({self.max}) must exceed min ({self.min})")


@dataclass
class QuantizedSequence:
    classes: np.ndarray
    resolution: int = field(default=100)

    def __len__(self):
        return len(self.classes)


def _parse_float(token, row):
    try:
        v = float(token)
    except ValueError:
        raise MalformedInput(row, f"non-numeric token {token!r}") from None
    if not math.isfinite(v):
        raise MalformedInput(row, f"non-finite value {token!r}")
    return v


def _infer_split(path: Path) -> str:
    return "test" if "TEST" in path.name.upper() else "train"


def load_ucr_tsv(path: PathLike, label_map: Optional[Mapping[int, str]] = None,
                 split: Optional[str] = None) -> Dataset:
    """Load a UCR archive ``.tsv`` file (class label first, then the series).

    ``label_map`` maps the integer class code to ``"normal"``/``"abnormal"``;
    the default treats ``1`` as normal and ``-1`` as abnormal. Row numbers in
    errors are 1-based line numbers.
    """
    path = Path(path)
    label_map = dict(UCR_LABELS if label_map is None else label_map)
    sequences = []
    seq_len = None
    with open(path, encoding="utf-8") as fh:
        for row, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            code = _parse_float(fields[0], row)
            if code != int(code) or int(code) not in label_map:
                raise MalformedInput(row, f"unmapped class label {fields[0]!r}")
            values = [_parse_float(tok, row) for tok in fields[1:]]
            if seq_len is None:
                if not values:
                    raise MalformedInput(row, "row has no values")
                seq_len = len(values)
            elif len(values) != seq_len:
                raise MalformedInput(row, f"expected {seq_len} values, got {len(values)}")
            sequences.append(LabeledSequence(f"{path.stem}-{len(sequences)}",
                                             np.array(values), label_map[int(code)]))
    if not sequences:
        raise EmptyFile(f"{path}: no records")
    return Dataset(sequences, seq_len, split or _infer_split(path))


def load_csv(path: PathLike, split: Optional[str] = None) -> Dataset:
    """Load the canonical ``id,label,x0,...,x{T-1}`` CSV. Empty labels mean unlabeled."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path}: empty file")
        expected = [f"x{i}" for i in range(len(header) - 2)]
        if header[:2] != ["id", "label"] or header[2:] != expected or not expected:
            raise MalformedInput(0, "header must be id,label,x0,...,x{T-1}")
        seq_len = len(expected)
        sequences = []
        for row, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != seq_len + 2:
                raise MalformedInput(row, f"expected {seq_len} values, got {len(rec) - 2}")
            label = rec[1].strip() or None
            if label is not None and label not in LABELS:
                raise MalformedInput(row, f"unknown label {label!r}")
            values = np.array([_parse_float(tok, row) for tok in rec[2:]])
            sequences.append(LabeledSequence(rec[0], values, label))
    if not sequences:
        raise EmptyFile(f"{path}: no records")
    return Dataset(sequences, seq_len, split or _infer_split(path))


def write_csv(dataset: Union[Dataset, Iterable[LabeledSequence]], path: PathLike) -> None:
    """Write sequences in canonical CSV form (9 significant digits, LF endings)."""
    seqs = list(dataset)
    if not seqs:
        raise EmptyFile("nothing to write")
    seq_len = len(seqs[0].values)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["id", "label"] + [f"x{i}" for i in range(seq_len)]) + "\n")
        for s in seqs:
            vals = ",".join(FLOAT_FMT.format(v) for v in s.values)
            fh.write(f"{s.id},{s.label or ''},{vals}\n")


def load_any(path: PathLike, split: Optional[str] = None) -> Dataset:
    """Dispatch on extension: ``.tsv`` goes to the UCR loader, anything else to CSV."""
    path = Path(path)
    if path.suffix.lower() == ".tsv":
        return load_ucr_tsv(path, split=split)
    return load_csv(path, split=split)


def fit_normalizer(train: Dataset) -> NormalizationParams:
    """Min and max over every value of every training sequence."""
    if train.n == 0:
        raise EmptyFile("training split is empty")
    lo = min(float(s.values.min()) for s in train)
    hi = max(float(s.values.max()) for s in train)
    if lo == hi:
        raise DegenerateRange(f"all training values equal {lo}")
    return NormalizationParams(lo, hi)


def normalize(seq, params: NormalizationParams) -> np.ndarray:
    """Map values affinely so training min -> 0 and max -> 1, clamping outliers into [0, 1].

    Accepts a ``LabeledSequence`` or any array (e.g. an ``(N, T)`` matrix).
    """
    values = seq.values if isinstance(seq, LabeledSequence) else np.asarray(seq, dtype=np.float64)
    scaled = (values - params.min) / (params.max - params.min)
    return np.clip(scaled, 0.0, 1.0)


def quantize(normalized, r: int = 100) -> QuantizedSequence:
    """``floor(v * r)`` capped at ``r - 1`` so that 1.0 lands in the top class."""
    if int(r) != r or r < 2:
        raise InvalidResolution(f"resolution must be an integer >= 2, got {r!r}")
    v = np.asarray(normalized, dtype=np.float64)
    classes = np.minimum(np.floor(v * r), r - 1).astype(np.int64)
    return QuantizedSequence(classes, int(r))


def prepare(dataset: Dataset, params: NormalizationParams) -> np.ndarray:
    """Normalized ``(N, T)`` value matrix for model input. Labels are dropped."""
    return normalize(dataset.values(), params)


def strip_labels(sequences: Sequence[LabeledSequence]) -> list:
    return [LabeledSequence(s.id, s.values.copy(), None) for s in sequences]

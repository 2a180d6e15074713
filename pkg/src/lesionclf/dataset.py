"""Ground-truth ingestion and train/validation/test split handling.

The ground-truth file is a UTF-8 CSV with header
``image_id,malignant,nonmelanocytic``: one row per image, labels 0/1
(task 1: 0 benign, 1 malignant; task 2: 0 melanocytic, 1 non-melanocytic).
ISIC 2017 challenge files (``image_id,melanoma,seborrheic_keratosis``)
can be accepted via a converter flag.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicateImageId,
    EmptyDataset,
    InvalidImageId,
    LabelOutOfDomain,
    MissingHeader,
    MissingImageFile,
    RaggedRow,
)

logger = logging.getLogger(__name__)

CANONICAL_HEADER = ("image_id", "malignant", "nonmelanocytic")
ISIC_2017_HEADER = ("image_id", "melanoma", "seborrheic_keratosis")
SPLIT_NAMES = ("train", "validation", "test")

# Extension search order when pairing a record with its image file.
IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")

# Challenge CSVs encode binary labels as floats; only these four token
# forms parse, anything else is an error (never rounded).
_LABEL_TOKENS = {"0": 0, "1": 1, "0.0": 0, "1.0": 1}


@dataclass(frozen=True)
class GroundTruthRecord:
    """One labelled image: file stem plus the two binary task labels."""

    image_id: str
    malignant: int
    nonmelanocytic: int

    def __post_init__(self):
        if not self.image_id:
            raise InvalidImageId("image_id is empty")
        if "/" in self.image_id or "\\" in self.image_id:
            raise InvalidImageId(f"image_id contains a path separator: {self.image_id!r}")
        for field in ("malignant", "nonmelanocytic"):
            value = getattr(self, field)
            if value not in (0, 1):
                raise LabelOutOfDomain(f"{field} label must be 0 or 1, got {value!r}")

    def label_for(self, task: str) -> int:
        if task == "malignancy":
            return self.malignant
        if task == "cell_origin":
            return self.nonmelanocytic
        raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class DatasetExample:
    image_id: str
    image_path: Path
    record: GroundTruthRecord


@dataclass(frozen=True)
class Dataset:
    """An immutable split of labelled images (paths only, not decoded)."""

    split_name: str
    examples: tuple[DatasetExample, ...]

    def __post_init__(self):
        if self.split_name not in SPLIT_NAMES:
            raise ValueError(f"split_name must be one of {SPLIT_NAMES}, got {self.split_name!r}")

    def __len__(self) -> int:
        return len(self.examples)


@dataclass(frozen=True)
class DatasetSummary:
    count: int
    malignant_positives: int
    nonmelanocytic_positives: int
    # balance = positives/count; absent (None) for an empty dataset
    malignant_balance: float | None
    nonmelanocytic_balance: float | None


def _parse_label(token: str, column: str, line_num: int) -> int:
    try:
        return _LABEL_TOKENS[token.strip()]
    except KeyError:
        raise LabelOutOfDomain(
            f"line {line_num}: {column} label {token.strip()!r} not in {{0, 1, 0.0, 1.0}}"
        ) from None


def parse_ground_truth(csv_text: str, accept_isic_header: bool = False) -> list[GroundTruthRecord]:
    """Parse a ground-truth CSV into records, preserving row order.

    With ``accept_isic_header`` the ISIC 2017 challenge header is accepted
    and mapped column-wise (melanoma -> malignant, seborrheic_keratosis ->
    nonmelanocytic).
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("ground-truth CSV is empty") from None

    header = tuple(column.strip() for column in header)
    if header != CANONICAL_HEADER:
        if header == ISIC_2017_HEADER:
            if not accept_isic_header:
                raise MissingHeader(
                    "line 1: got the ISIC 2017 challenge header; pass the converter "
                    f"flag to accept it (expected {','.join(CANONICAL_HEADER)})"
                )
        else:
            raise MissingHeader(
                f"line 1: expected header {','.join(CANONICAL_HEADER)}, got {','.join(header)!r}"
            )

    records: list[GroundTruthRecord] = []
    seen: set[str] = set()
    for row in reader:
        if not row:
            continue
        line_num = reader.line_num
        if len(row) != 3:
            raise RaggedRow(f"line {line_num}: expected 3 columns, got {len(row)}")
        image_id = row[0].strip()
        try:
            record = GroundTruthRecord(
                image_id=image_id,
                malignant=_parse_label(row[1], CANONICAL_HEADER[1], line_num),
                nonmelanocytic=_parse_label(row[2], CANONICAL_HEADER[2], line_num),
            )
        except InvalidImageId as exc:
            raise InvalidImageId(f"line {line_num}: {exc}") from None
        if record.image_id in seen:
            raise DuplicateImageId(f"line {line_num}: duplicate image_id {record.image_id!r}")
        seen.add(record.image_id)
        records.append(record)
    return records


def serialize_ground_truth(records: list[GroundTruthRecord]) -> str:
    """Inverse of :func:`parse_ground_truth` (canonical header, LF endings)."""
    lines = [",".join(CANONICAL_HEADER)]
    lines.extend(f"{r.image_id},{r.malignant},{r.nonmelanocytic}" for r in records)
    return "\n".join(lines) + "\n"


def _index_image_files(image_dir: Path) -> dict[str, Path]:
    """Map file stems to image paths, resolving extension collisions by
    the fixed extension priority and then lexicographic name order."""
    candidates: dict[str, list[tuple[int, str, Path]]] = {}
    for entry in sorted(image_dir.iterdir()):
        if not entry.is_file():
            continue
        suffix = entry.suffix.lower()
        if suffix in IMAGE_EXTENSIONS:
            rank = IMAGE_EXTENSIONS.index(suffix)
            candidates.setdefault(entry.stem, []).append((rank, entry.name, entry))
    return {stem: min(options)[2] for stem, options in candidates.items()}


def discover_images(image_dir: str | Path) -> list[tuple[str, Path]]:
    """List (image_id, path) pairs found in a directory, sorted by id."""
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise MissingImageFile(f"image directory not found: {image_dir}")
    index = _index_image_files(image_dir)
    return sorted(index.items())


def load_split(
    image_dir: str | Path,
    records: list[GroundTruthRecord],
    split_name: str,
    allow_missing: bool = False,
) -> Dataset:
    """Pair records with their image files, strictly by default.

    With ``allow_missing`` rows without an image file are dropped with a
    warning instead of raising :class:`MissingImageFile`.
    """
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise MissingImageFile(f"image directory not found: {image_dir}")
    index = _index_image_files(image_dir)

    examples = []
    missing = []
    seen: set[str] = set()
    for record in records:
        if record.image_id in seen:
            raise DuplicateImageId(f"duplicate image_id {record.image_id!r} in split {split_name!r}")
        seen.add(record.image_id)
        path = index.get(record.image_id)
        if path is None:
            missing.append(record.image_id)
        else:
            examples.append(DatasetExample(record.image_id, path, record))

    if missing:
        if not allow_missing:
            raise MissingImageFile(
                f"{len(missing)} record(s) without an image file in {image_dir}: "
                + ", ".join(missing)
            )
        logger.warning("dropping %d record(s) without an image file: %s", len(missing), ", ".join(missing))

    if not examples:
        raise EmptyDataset(f"split {split_name!r} has no usable examples")
    return Dataset(split_name=split_name, examples=tuple(examples))


def dataset_summary(d: Dataset) -> DatasetSummary:
    count = len(d.examples)
    malignant = sum(e.record.malignant for e in d.examples)
    nonmelanocytic = sum(e.record.nonmelanocytic for e in d.examples)
    return DatasetSummary(
        count=count,
        malignant_positives=malignant,
        nonmelanocytic_positives=nonmelanocytic,
        malignant_balance=malignant / count if count else None,
        nonmelanocytic_balance=nonmelanocytic / count if count else None,
    )

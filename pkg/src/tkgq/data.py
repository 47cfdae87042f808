"""Quadruple dataset ingestion, vocabularies, filtering, and batching.

A dataset directory holds three tab-separated files named ``train``,
``valid`` and ``test``, one fact per line::

    head<TAB>relation<TAB>tail<TAB>timestamp

Timestamps are textual time points, either ISO dates ("2014-03-14") or
plain integer day indices; they are sorted by parsed calendar value before
id assignment so that adjacent timestamp ids are chronological neighbours.

Relations are materialized twice: ids in [0, R) are the file relations,
ids in [R, 2R) their inverses, so head prediction is an ordinary forward
(tail) query under the inverse relation.
"""

from __future__ import annotations

import datetime
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import CheckpointError, DatasetError

__all__ = [
    "Vocabulary",
    "Quadruple",
    "QuadrupleDataset",
    "FilterIndex",
    "load_dataset",
    "build_filter_index",
    "batch_iterator",
    "save_cache",
    "load_cache",
    "load_dataset_or_cache",
]

SPLIT_NAMES = ("train", "valid", "test")

_CACHE_MAGIC = b"TKGQDATA"
_CACHE_VERSION = 1


class Quadruple(NamedTuple):
    """One integer-encoded fact (head, relation, tail, timestamp)."""

    head: int
    relation: int
    tail: int
    timestamp: int


def _timestamp_key(label: str, origin: str) -> tuple[int, float]:
    """Chronological sort key: plain integers sort before ISO dates/datetimes."""
    try:
        return (0, int(label))
    except ValueError:
        pass
    try:
        return (1, float(datetime.date.fromisoformat(label).toordinal()))
    except ValueError:
        pass
    try:
        return (1, datetime.datetime.fromisoformat(label).timestamp())
    except ValueError:
        raise DatasetError(
            f"{origin}: timestamp {label!r} is neither an integer nor an ISO date"
        ) from None


@dataclass(frozen=True)
class Vocabulary:
    """Dense label<->id maps for entities, relations, and timestamps.

    Timestamp ids are monotone in calendar order; entity and relation ids
    are assigned in sorted label order (any fixed order works, this one is
    reproducible across runs and platforms).
    """

    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    timestamp_labels: tuple[str, ...]
    entity_ids: dict[str, int] = field(repr=False, default_factory=dict)
    relation_ids: dict[str, int] = field(repr=False, default_factory=dict)
    timestamp_ids: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        for labels, ids in (
            (self.entity_labels, self.entity_ids),
            (self.relation_labels, self.relation_ids),
            (self.timestamp_labels, self.timestamp_ids),
        ):
            if not ids:
                ids.update({label: i for i, label in enumerate(labels)})

    @property
    def n_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    @property
    def n_timestamps(self) -> int:
        return len(self.timestamp_labels)

    def decode(self, q: Quadruple) -> tuple[str, str, str, str]:
        """Labels of a quadruple; inverse relations render with a suffix."""
        r = q.relation
        rel = (
            self.relation_labels[r]
            if r < self.n_relations
            else self.relation_labels[r - self.n_relations] + "^-1"
        )
        return (
            self.entity_labels[q.head],
            rel,
            self.entity_labels[q.tail],
            self.timestamp_labels[q.timestamp],
        )


@dataclass(frozen=True)
class QuadrupleDataset:
    """Integer-encoded splits plus the reciprocal-augmented training set.

    Split arrays have shape [n, 4] (head, relation, tail, timestamp) with
    relation ids < n_relations; ``augmented_train`` appends one reciprocal
    fact (t, r + R, h, tau) per training fact.
    """

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    n_relations: int

    def __post_init__(self) -> None:
        for name in SPLIT_NAMES:
            arr = getattr(self, name)
            object.__setattr__(self, name, np.ascontiguousarray(arr, dtype=np.int32))

    @property
    def augmented_train(self) -> np.ndarray:
        recip = self.train[:, [2, 1, 0, 3]].copy()
        recip[:, 1] += self.n_relations
        return np.concatenate([self.train, recip], axis=0)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLIT_NAMES:
            raise DatasetError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")
        return getattr(self, name)


def _parse_split(path: Path) -> list[tuple[str, str, str, str]]:
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise DatasetError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
                )
            rows.append(tuple(fields))
    if not rows:
        raise DatasetError(f"{path}: split is empty")
    return rows


def load_dataset(dir_path: str | Path) -> tuple[Vocabulary, QuadrupleDataset]:
    """Parse train/valid/test from a directory and build vocabularies.

    Vocabularies cover the union of all three splits; evaluation ranks
    every known entity, so entities seen only in valid/test still get ids.
    """
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise DatasetError(f"dataset directory not found: {dir_path}")
    raw = {name: _parse_split(dir_path / name) for name in SPLIT_NAMES}

    entities: set[str] = set()
    relations: set[str] = set()
    timestamps: set[str] = set()
    for rows in raw.values():
        for h, r, t, tau in rows:
            entities.add(h)
            entities.add(t)
            relations.add(r)
            timestamps.add(tau)

    ts_sorted = sorted(timestamps, key=lambda s: _timestamp_key(s, str(dir_path)))
    vocab = Vocabulary(
        entity_labels=tuple(sorted(entities)),
        relation_labels=tuple(sorted(relations)),
        timestamp_labels=tuple(ts_sorted),
    )

    def encode(rows) -> np.ndarray:
        out = np.empty((len(rows), 4), dtype=np.int32)
        for i, (h, r, t, tau) in enumerate(rows):
            out[i, 0] = vocab.entity_ids[h]
            out[i, 1] = vocab.relation_ids[r]
            out[i, 2] = vocab.entity_ids[t]
            out[i, 3] = vocab.timestamp_ids[tau]
        return out

    ds = QuadrupleDataset(
        train=encode(raw["train"]),
        valid=encode(raw["valid"]),
        test=encode(raw["test"]),
        n_relations=vocab.n_relations,
    )
    return vocab, ds


class FilterIndex:
    """Known true answers per (entity, relation, timestamp) query.

    Both directions are indexed over train, valid and test: a fact
    (h, r, t, tau) registers t under key (h, r, tau) and h under
    (t, r + R, tau). Only same-timestamp facts are filtered (time-wise,
    not time-agnostic filtering).
    """

    def __init__(self, answers: dict[tuple[int, int, int], np.ndarray]):
        self._answers = answers

    def answers(self, entity: int, relation: int, timestamp: int) -> np.ndarray:
        """Sorted array of true answer ids for the query, empty if none known."""
        return self._answers.get(
            (int(entity), int(relation), int(timestamp)),
            np.empty(0, dtype=np.int32),
        )

    def __len__(self) -> int:
        return len(self._answers)


def build_filter_index(ds: QuadrupleDataset) -> FilterIndex:
    sets: dict[tuple[int, int, int], set[int]] = {}
    n_rel = ds.n_relations
    for split in SPLIT_NAMES:
        for h, r, t, tau in ds.split(split).tolist():
            sets.setdefault((h, r, tau), set()).add(t)
            sets.setdefault((t, r + n_rel, tau), set()).add(h)
    return FilterIndex(
        {k: np.array(sorted(v), dtype=np.int32) for k, v in sets.items()}
    )


def batch_iterator(
    ds: QuadrupleDataset, batch_size: int, seed: int | tuple
) -> Iterator[np.ndarray]:
    """One epoch over the augmented training set in a seeded random order.

    Yields [b, 4] arrays; the last batch may be short. The same seed always
    produces the same batch sequence.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    quads = ds.augmented_train
    order = np.random.default_rng(seed).permutation(len(quads))
    for start in range(0, len(quads), batch_size):
        yield quads[order[start : start + batch_size]]


# ---------------------------------------------------------------------------
# preprocessed binary cache
# ---------------------------------------------------------------------------


def save_cache(path: str | Path, vocab: Vocabulary, ds: QuadrupleDataset) -> None:
    """Write a self-contained binary snapshot of a parsed dataset.

    Layout: magic, u32 version, six u32 counts (entities, relations,
    timestamps, train, valid, test), a u64-length-prefixed UTF-8 JSON blob
    with the three label lists, then the three id arrays as little-endian
    u32 in row-major [n, 4] order.
    """
    labels = json.dumps(
        [list(vocab.entity_labels), list(vocab.relation_labels), list(vocab.timestamp_labels)],
        ensure_ascii=False,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(
            struct.pack(
                "<7I",
                _CACHE_VERSION,
                vocab.n_entities,
                vocab.n_relations,
                vocab.n_timestamps,
                len(ds.train),
                len(ds.valid),
                len(ds.test),
            )
        )
        fh.write(struct.pack("<Q", len(labels)))
        fh.write(labels)
        for name in SPLIT_NAMES:
            fh.write(np.ascontiguousarray(ds.split(name), dtype="<u4").tobytes())


def load_cache(path: str | Path) -> tuple[Vocabulary, QuadrupleDataset]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"cache file not found: {path}")
    data = path.read_bytes()
    if data[:8] != _CACHE_MAGIC:
        raise CheckpointError(f"{path}: not a dataset cache (bad magic)")
    version, n_ent, n_rel, n_ts, n_train, n_valid, n_test = struct.unpack_from("<7I", data, 8)
    if version != _CACHE_VERSION:
        raise CheckpointError(f"{path}: unsupported cache version {version}")
    offset = 8 + 28
    (label_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    ent_labels, rel_labels, ts_labels = json.loads(data[offset : offset + label_len])
    offset += label_len
    if (len(ent_labels), len(rel_labels), len(ts_labels)) != (n_ent, n_rel, n_ts):
        raise CheckpointError(f"{path}: label counts disagree with header")
    splits = []
    for n in (n_train, n_valid, n_test):
        arr = np.frombuffer(data, dtype="<u4", count=n * 4, offset=offset)
        splits.append(arr.reshape(n, 4).astype(np.int32))
        offset += n * 16
    if offset != len(data):
        raise CheckpointError(f"{path}: trailing bytes after id arrays")
    vocab = Vocabulary(tuple(ent_labels), tuple(rel_labels), tuple(ts_labels))
    ds = QuadrupleDataset(splits[0], splits[1], splits[2], n_relations=n_rel)
    return vocab, ds


def load_dataset_or_cache(path: str | Path) -> tuple[Vocabulary, QuadrupleDataset]:
    """Accept either a dataset directory or a preprocessed cache file."""
    path = Path(path)
    if path.is_dir():
        return load_dataset(path)
    if path.is_file():
        return load_cache(path)
    raise DatasetError(f"no dataset directory or cache file at: {path}")

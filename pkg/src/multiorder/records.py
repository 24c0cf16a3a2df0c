"""On-disk archives of per-sample interaction records.

An archive is a directory with a JSON header and one CSV file per
sample::

    <root>/
        archive.json          header: schema, player count, pairs,
                              orders, sample roster, free-form meta
        records/<sid>.csv     one row per (pair, order)

Record rows carry ``sample_id, v_full, v_empty, i, j, m, mean, stderr,
contexts_used, deltas`` with floats printed at 17 significant digits so
64-bit values survive the round trip byte-exactly.  The two sample
scores repeat on every row, keeping each row self-contained.  ``deltas``
is a semicolon-joined list when the archive retains per-context synergy
samples and empty otherwise.

Writers land files atomically (temp file, then rename), and the sample
roster is fixed at creation, so an interrupted run resumes by writing
only the samples whose files are missing.  Readers refuse archives whose
schema version they do not know.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .coalition import PlayerSet
from .engine import InteractionProfile, PairOrderEstimate
from .errors import ArchiveError
from .metrics import SampleRecord, SampleRecordSet

SCHEMA_VERSION = 1
HEADER_NAME = "archive.json"
RECORDS_DIR = "records"

_COLUMNS = (
    "sample_id",
    "v_full",
    "v_empty",
    "i",
    "j",
    "m",
    "mean",
    "stderr",
    "contexts_used",
    "deltas",
)

# Sample ids double as file names; keep them portable.
_SAFE_ID = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-"
)


def format_float(value: float) -> str:
    """Shortest decimal form that reconstructs the exact float64."""
    return f"{float(value):.17g}"


def check_sample_id(sample_id: str) -> str:
    if not sample_id or not set(sample_id) <= _SAFE_ID or sample_id[0] == ".":
        raise ArchiveError(
            f"sample id {sample_id!r} is not a portable file name; "
            "use letters, digits, '.', '_' or '-'"
        )
    return sample_id


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a sibling temp file so readers never see a torn file."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ArchiveHeader:
    """Run-level facts shared by every sample of an archive."""

    n: int
    pairs: tuple[tuple[int, int], ...]
    orders: tuple[int, ...]
    retain_deltas: bool
    sample_ids: tuple[str, ...]
    meta: Mapping[str, object] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        object.__setattr__(self, "orders", tuple(self.orders))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "meta", dict(self.meta))
        PlayerSet(self.n)
        for i, j in self.pairs:
            if not (0 <= i < j < self.n):
                raise ArchiveError(f"bad pair ({i}, {j}) for n={self.n}")
        if len(set(self.pairs)) != len(self.pairs):
            raise ArchiveError("archive pairs repeat")
        if list(self.orders) != sorted(set(self.orders)):
            raise ArchiveError(f"orders must be sorted and distinct, got {self.orders}")
        if any(not (0 <= m <= self.n - 2) for m in self.orders):
            raise ArchiveError(f"orders {self.orders} out of range for n={self.n}")
        if not self.sample_ids:
            raise ArchiveError("archive needs at least one sample id")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ArchiveError("sample ids repeat")
        for sid in self.sample_ids:
            check_sample_id(sid)

    def to_json(self) -> str:
        return _canonical_json(
            {
                "schema_version": self.schema_version,
                "n": self.n,
                "pairs": [list(p) for p in self.pairs],
                "orders": list(self.orders),
                "retain_deltas": self.retain_deltas,
                "sample_ids": list(self.sample_ids),
                "meta": self.meta,
            }
        )

    @classmethod
    def from_json(cls, text: str, source: str) -> "ArchiveHeader":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ArchiveError(f"{source}: not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ArchiveError(f"{source}: header must be a JSON object")
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ArchiveError(
                f"{source}: unknown archive schema version {version!r}; "
                f"this reader understands version {SCHEMA_VERSION}"
            )
        try:
            return cls(
                n=payload["n"],
                pairs=tuple(tuple(p) for p in payload["pairs"]),
                orders=tuple(payload["orders"]),
                retain_deltas=bool(payload["retain_deltas"]),
                sample_ids=tuple(payload["sample_ids"]),
                meta=payload.get("meta", {}),
            )
        except KeyError as exc:
            raise ArchiveError(f"{source}: header is missing field {exc}") from exc


def _format_row(record: SampleRecord, est: PairOrderEstimate, retain: bool) -> list[str]:
    deltas = ""
    if retain:
        if est.deltas is None:
            raise ArchiveError(
                f"sample {record.sample_id!r} lacks retained deltas for "
                f"pair ({est.i}, {est.j}) order {est.m}"
            )
        deltas = ";".join(format_float(d) for d in est.deltas)
    return [
        record.sample_id,
        format_float(record.v_full),
        format_float(record.v_empty),
        str(est.i),
        str(est.j),
        str(est.m),
        format_float(est.mean),
        format_float(est.stderr),
        str(est.contexts_used),
        deltas,
    ]


class RecordArchive:
    """Reader/writer for one archive directory."""

    def __init__(self, root: Path | str, header: ArchiveHeader):
        self.root = Path(root)
        self.header = header

    @classmethod
    def create(
        cls,
        root: Path | str,
        *,
        n: int,
        pairs: Sequence[tuple[int, int]],
        orders: Sequence[int],
        retain_deltas: bool,
        sample_ids: Sequence[str],
        meta: Mapping[str, object] | None = None,
    ) -> "RecordArchive":
        """Create a new archive, or adopt an identical existing one.

        Adopting makes interrupted runs resumable: the caller recreates
        the archive from the same configuration and fills in whatever
        samples are missing.  A header that differs in any way is a
        different run and is refused.
        """
        header = ArchiveHeader(
            n=n,
            pairs=tuple(pairs),
            orders=tuple(orders),
            retain_deltas=retain_deltas,
            sample_ids=tuple(sample_ids),
            meta=meta or {},
        )
        root = Path(root)
        header_path = root / HEADER_NAME
        if header_path.exists():
            existing = ArchiveHeader.from_json(
                header_path.read_text(encoding="utf-8"), str(header_path)
            )
            if existing != header:
                raise ArchiveError(
                    f"{root} already holds an archive with different settings; "
                    "point the run at a fresh directory"
                )
            return cls(root, existing)
        (root / RECORDS_DIR).mkdir(parents=True, exist_ok=True)
        atomic_write_text(header_path, header.to_json())
        return cls(root, header)

    @classmethod
    def open(cls, root: Path | str) -> "RecordArchive":
        root = Path(root)
        header_path = root / HEADER_NAME
        if not header_path.is_file():
            raise ArchiveError(f"{root} is not an archive (no {HEADER_NAME})")
        header = ArchiveHeader.from_json(
            header_path.read_text(encoding="utf-8"), str(header_path)
        )
        return cls(root, header)

    def sample_path(self, sample_id: str) -> Path:
        check_sample_id(sample_id)
        return self.root / RECORDS_DIR / f"{sample_id}.csv"

    def completed(self) -> tuple[str, ...]:
        return tuple(
            sid for sid in self.header.sample_ids if self.sample_path(sid).is_file()
        )

    def missing(self) -> tuple[str, ...]:
        done = set(self.completed())
        return tuple(sid for sid in self.header.sample_ids if sid not in done)

    @property
    def is_complete(self) -> bool:
        return not self.missing()

    def write_sample(self, record: SampleRecord) -> Path:
        """Persist one sample atomically; rows follow the header layout."""
        head = self.header
        if record.sample_id not in head.sample_ids:
            raise ArchiveError(
                f"sample {record.sample_id!r} is not in the archive roster"
            )
        if record.n != head.n:
            raise ArchiveError(
                f"sample {record.sample_id!r} has n={record.n}, archive has n={head.n}"
            )
        by_pair = {(p.i, p.j): p for p in record.profiles}
        if set(by_pair) != set(head.pairs):
            raise ArchiveError(
                f"sample {record.sample_id!r} covers pairs {sorted(by_pair)}, "
                f"archive expects {list(head.pairs)}"
            )
        rows = []
        for pair in head.pairs:
            profile = by_pair[pair]
            if profile.orders != head.orders:
                raise ArchiveError(
                    f"sample {record.sample_id!r} pair {pair} records orders "
                    f"{profile.orders}, archive expects {head.orders}"
                )
            for est in profile.values:
                rows.append(_format_row(record, est, head.retain_deltas))
        lines = [",".join(_COLUMNS)]
        lines.extend(",".join(row) for row in rows)
        path = self.sample_path(record.sample_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, "\n".join(lines) + "\n")
        return path

    def read_sample(self, sample_id: str) -> SampleRecord:
        head = self.header
        if sample_id not in head.sample_ids:
            raise ArchiveError(f"sample {sample_id!r} is not in the archive roster")
        path = self.sample_path(sample_id)
        if not path.is_file():
            raise ArchiveError(f"sample {sample_id!r} has not been written yet")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                columns = tuple(next(reader))
            except StopIteration:
                raise ArchiveError(f"{path}: empty record file") from None
            if columns != _COLUMNS:
                raise ArchiveError(f"{path}: unexpected columns {columns}")
            rows = list(reader)
        expected = len(head.pairs) * len(head.orders)
        if len(rows) != expected:
            raise ArchiveError(f"{path}: expected {expected} rows, found {len(rows)}")
        return self._parse_rows(path, sample_id, rows)

    def _parse_rows(
        self, path: Path, sample_id: str, rows: Iterable[Sequence[str]]
    ) -> SampleRecord:
        head = self.header
        it = iter(rows)
        v_full = v_empty = None
        profiles = []
        for pair in head.pairs:
            estimates = []
            for m in head.orders:
                lineno = len(estimates) + len(profiles) * len(head.orders) + 2
                try:
                    row = next(it)
                except StopIteration:
                    raise ArchiveError(f"{path}: truncated record file") from None
                try:
                    sid, full_s, empty_s, i_s, j_s, m_s, mean_s, se_s, k_s, d_s = row
                    full, empty = float(full_s), float(empty_s)
                    key = (int(i_s), int(j_s), int(m_s))
                    mean, stderr, used = float(mean_s), float(se_s), int(k_s)
                    deltas = (
                        tuple(float(t) for t in d_s.split(";")) if d_s else None
                    )
                except (ValueError, TypeError) as exc:
                    raise ArchiveError(f"{path}:{lineno}: bad row: {exc}") from exc
                if sid != sample_id:
                    raise ArchiveError(
                        f"{path}:{lineno}: row belongs to sample {sid!r}"
                    )
                if key != (pair[0], pair[1], m):
                    raise ArchiveError(
                        f"{path}:{lineno}: expected pair/order {pair + (m,)}, got {key}"
                    )
                if v_full is None:
                    v_full, v_empty = full, empty
                elif not (_same(full, v_full) and _same(empty, v_empty)):
                    raise ArchiveError(
                        f"{path}:{lineno}: sample scores differ between rows"
                    )
                estimates.append(
                    PairOrderEstimate(
                        i=pair[0],
                        j=pair[1],
                        m=m,
                        mean=mean,
                        stderr=stderr,
                        contexts_used=used,
                        deltas=deltas,
                    )
                )
            profiles.append(
                InteractionProfile(n=head.n, i=pair[0], j=pair[1], values=tuple(estimates))
            )
        return SampleRecord(
            sample_id=sample_id,
            profiles=tuple(profiles),
            v_full=v_full,
            v_empty=v_empty,
        )

    def load(self, sample_ids: Sequence[str] | None = None) -> SampleRecordSet:
        """Read samples (default: the full roster) into a record set."""
        ids = tuple(sample_ids) if sample_ids is not None else self.header.sample_ids
        return SampleRecordSet(records=tuple(self.read_sample(sid) for sid in ids))


def _same(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))

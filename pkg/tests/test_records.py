"""Archive round trips, resume bookkeeping, and reader strictness."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiorder.engine import InteractionProfile, PairOrderEstimate, profile_pairs
from multiorder.errors import ArchiveError
from multiorder.games import TableGame
from multiorder.metrics import SampleRecord
from multiorder.records import (
    SCHEMA_VERSION,
    ArchiveHeader,
    RecordArchive,
    format_float,
)

PAIRS = ((0, 1), (1, 3), (2, 5))
ORDERS = (0, 1, 2, 3, 4)


def record_for(sample_id, seed, retain=False, n=6):
    game = TableGame.seeded(n, seed)
    profiles = profile_pairs(game, PAIRS, plan=None, mode="exact", retain_deltas=retain)
    return SampleRecord(
        sample_id=sample_id,
        profiles=tuple(profiles),
        v_full=float(game.table[-1]),
        v_empty=float(game.table[0]),
    )


def make_archive(tmp_path, retain=False, sample_ids=("a", "b")):
    return RecordArchive.create(
        tmp_path / "arch",
        n=6,
        pairs=PAIRS,
        orders=ORDERS,
        retain_deltas=retain,
        sample_ids=sample_ids,
    )


class TestRoundTrip:
    def test_record_survives_write_and_read_exactly(self, tmp_path):
        archive = make_archive(tmp_path)
        original = record_for("a", seed=3)
        archive.write_sample(original)
        assert archive.read_sample("a") == original

    def test_deltas_round_trip_when_retained(self, tmp_path):
        archive = make_archive(tmp_path, retain=True)
        original = record_for("a", seed=3, retain=True)
        archive.write_sample(original)
        back = archive.read_sample("a")
        assert back == original
        assert all(e.deltas is not None for p in back.profiles for e in p.values)

    def test_lean_archive_drops_deltas(self, tmp_path):
        archive = make_archive(tmp_path)
        archive.write_sample(record_for("a", seed=3, retain=True))
        back = archive.read_sample("a")
        assert all(e.deltas is None for p in back.profiles for e in p.values)

    def test_nan_stderr_round_trips(self, tmp_path):
        archive = RecordArchive.create(
            tmp_path / "arch", n=4, pairs=((0, 1),), orders=(1,),
            retain_deltas=False, sample_ids=("a",),
        )
        est = PairOrderEstimate(i=0, j=1, m=1, mean=0.25,
                                stderr=float("nan"), contexts_used=1)
        profile = InteractionProfile(n=4, i=0, j=1, values=(est,))
        archive.write_sample(SampleRecord("a", (profile,), v_full=1.0, v_empty=0.0))
        back = archive.read_sample("a").profiles[0].values[0]
        assert math.isnan(back.stderr) and back.mean == 0.25

    def test_write_is_byte_deterministic(self, tmp_path):
        archive = make_archive(tmp_path)
        record = record_for("a", seed=3)
        first = archive.write_sample(record).read_bytes()
        second = archive.write_sample(record).read_bytes()
        assert first == second

    def test_load_collects_the_roster_in_order(self, tmp_path):
        archive = make_archive(tmp_path)
        archive.write_sample(record_for("b", seed=4))
        archive.write_sample(record_for("a", seed=3))
        records = archive.load()
        assert [r.sample_id for r in records.records] == ["a", "b"]


class TestResumeBookkeeping:
    def test_completed_and_missing_track_files(self, tmp_path):
        archive = make_archive(tmp_path)
        assert archive.completed() == () and archive.missing() == ("a", "b")
        archive.write_sample(record_for("a", seed=3))
        assert archive.completed() == ("a",) and archive.missing() == ("b",)
        assert not archive.is_complete
        archive.write_sample(record_for("b", seed=4))
        assert archive.is_complete

    def test_temp_files_do_not_count_as_completed(self, tmp_path):
        archive = make_archive(tmp_path)
        (archive.root / "records" / "a.csv.tmp").write_text("torn")
        assert archive.completed() == ()

    def test_create_adopts_an_identical_archive(self, tmp_path):
        first = make_archive(tmp_path)
        first.write_sample(record_for("a", seed=3))
        again = make_archive(tmp_path)
        assert again.header == first.header
        assert again.completed() == ("a",)

    def test_create_refuses_different_settings(self, tmp_path):
        make_archive(tmp_path)
        with pytest.raises(ArchiveError, match="different settings"):
            RecordArchive.create(
                tmp_path / "arch", n=6, pairs=PAIRS, orders=(0, 1),
                retain_deltas=False, sample_ids=("a", "b"),
            )


class TestHeaderValidation:
    def test_rejects_unsorted_orders(self):
        with pytest.raises(ArchiveError, match="sorted"):
            ArchiveHeader(n=6, pairs=PAIRS, orders=(2, 1),
                          retain_deltas=False, sample_ids=("a",))

    def test_rejects_out_of_range_pair(self):
        with pytest.raises(ArchiveError, match="bad pair"):
            ArchiveHeader(n=6, pairs=((0, 6),), orders=(0,),
                          retain_deltas=False, sample_ids=("a",))

    def test_rejects_duplicate_sample_ids(self):
        with pytest.raises(ArchiveError, match="repeat"):
            ArchiveHeader(n=6, pairs=PAIRS, orders=(0,),
                          retain_deltas=False, sample_ids=("a", "a"))

    @pytest.mark.parametrize("sid", ["", "a b", "x/y", ".hidden", "sé"])
    def test_rejects_unportable_sample_ids(self, sid):
        with pytest.raises(ArchiveError, match="portable"):
            ArchiveHeader(n=6, pairs=PAIRS, orders=(0,),
                          retain_deltas=False, sample_ids=(sid,))


class TestReaderStrictness:
    def test_open_requires_a_header(self, tmp_path):
        with pytest.raises(ArchiveError, match="not an archive"):
            RecordArchive.open(tmp_path)

    def test_open_rejects_unknown_schema_version(self, tmp_path):
        archive = make_archive(tmp_path)
        text = (archive.root / "archive.json").read_text()
        bumped = text.replace(f'"schema_version": {SCHEMA_VERSION}',
                              '"schema_version": 99')
        (archive.root / "archive.json").write_text(bumped)
        with pytest.raises(ArchiveError, match="unknown archive schema version 99"):
            RecordArchive.open(archive.root)

    def test_open_rejects_missing_fields(self, tmp_path):
        archive = make_archive(tmp_path)
        (archive.root / "archive.json").write_text(
            f'{{"schema_version": {SCHEMA_VERSION}, "n": 6}}'
        )
        with pytest.raises(ArchiveError, match="missing field"):
            RecordArchive.open(archive.root)

    def test_read_before_write_names_the_sample(self, tmp_path):
        archive = make_archive(tmp_path)
        with pytest.raises(ArchiveError, match="has not been written"):
            archive.read_sample("a")

    def test_read_rejects_foreign_samples(self, tmp_path):
        archive = make_archive(tmp_path)
        with pytest.raises(ArchiveError, match="not in the archive roster"):
            archive.read_sample("zz")

    def test_read_rejects_truncation(self, tmp_path):
        archive = make_archive(tmp_path)
        path = archive.write_sample(record_for("a", seed=3))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ArchiveError, match="expected 15 rows"):
            archive.read_sample("a")

    def test_read_rejects_reordered_rows(self, tmp_path):
        archive = make_archive(tmp_path)
        path = archive.write_sample(record_for("a", seed=3))
        lines = path.read_text().splitlines()
        lines[1], lines[2] = lines[2], lines[1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ArchiveError, match="expected pair/order"):
            archive.read_sample("a")

    def test_read_rejects_unparseable_cells(self, tmp_path):
        archive = make_archive(tmp_path)
        path = archive.write_sample(record_for("a", seed=3))
        text = path.read_text().splitlines()
        text[1] = text[1].replace(",0,1,0,", ",0,one,0,")
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(ArchiveError, match="bad row"):
            archive.read_sample("a")

    def test_read_rejects_inconsistent_sample_scores(self, tmp_path):
        archive = make_archive(tmp_path)
        path = archive.write_sample(record_for("a", seed=3))
        lines = path.read_text().splitlines()
        cells = lines[2].split(",")
        cells[1] = format_float(float(cells[1]) + 1.0)
        lines[2] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ArchiveError, match="scores differ"):
            archive.read_sample("a")


class TestWriterValidation:
    def test_write_rejects_samples_off_the_roster(self, tmp_path):
        archive = make_archive(tmp_path)
        with pytest.raises(ArchiveError, match="not in the archive roster"):
            archive.write_sample(record_for("zz", seed=3))

    def test_write_rejects_wrong_pairs(self, tmp_path):
        archive = make_archive(tmp_path)
        game = TableGame.seeded(6, 3)
        profiles = profile_pairs(game, [(0, 1)], plan=None, mode="exact")
        record = SampleRecord("a", tuple(profiles), v_full=0.0, v_empty=0.0)
        with pytest.raises(ArchiveError, match="covers pairs"):
            archive.write_sample(record)

    def test_retaining_archive_requires_deltas(self, tmp_path):
        archive = make_archive(tmp_path, retain=True)
        with pytest.raises(ArchiveError, match="lacks retained deltas"):
            archive.write_sample(record_for("a", seed=3, retain=False))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips_float64(value):
    assert float(format_float(value)) == value

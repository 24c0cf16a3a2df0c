"""CLI: config round trips, probe/metrics/compare pipelines, exit codes."""

import json
import shutil
import threading

import numpy as np
import pytest

from multiorder.bridge import BuiltinServer
from multiorder.cli import (
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_SELFCHECK,
    EXIT_VALIDATION,
    RunConfig,
    cmd_compare,
    cmd_metrics,
    cmd_probe,
    cmd_selfcheck,
    config_digest,
    main,
    parse_config,
    serialize_config,
)
from multiorder.errors import ArchiveError, ConfigError, GridMismatch
from multiorder.imagegame import save_tensor
from multiorder.metrics import SampleRecordSet, eta, eta_order, order_profile
from multiorder.records import RecordArchive, format_float


def table_config(out_dir, n=6, samples=2, seed=11, **overrides):
    payload = {
        "game": {"source": "synthetic", "kind": "table", "params": {"n": n}},
        "n": n,
        "samples": samples,
        "mode": "exact",
        "pairs": "all",
        "metrics": ["strength", "normalized", "average"],
        "retain_deltas": False,
        "out_dir": str(out_dir),
        "seed": seed,
    }
    payload.update(overrides)
    return parse_config(json.dumps(payload))


def quiet(*args, **kwargs):
    pass


class TestConfigRoundTrip:
    def test_parse_inverts_serialize(self, tmp_path):
        config = table_config(tmp_path / "out")
        assert parse_config(serialize_config(config)) == config

    def test_round_trip_covers_sampled_options(self, tmp_path):
        config = table_config(
            tmp_path / "out", mode="sampled", orders=[0, 2, 4],
            contexts_per_order=32, pairs=5,
            metrics=["disentanglement"], retain_deltas=True,
        )
        assert parse_config(serialize_config(config)) == config

    def test_digest_tracks_content(self, tmp_path):
        a = table_config(tmp_path / "out")
        b = table_config(tmp_path / "out", seed=12)
        assert config_digest(a) != config_digest(b)
        assert config_digest(a) == config_digest(table_config(tmp_path / "out"))

    def test_defaults_fill_in(self):
        config = parse_config(
            '{"game": {"source": "synthetic", "kind": "table", "params": {"n": 4}},'
            ' "n": 4, "out_dir": "x", "seed": 1}'
        )
        assert config.mode == "exact" and config.pairs == "all"
        assert config.samples is None and config.orders is None


class TestConfigValidation:
    def test_syntax_errors_carry_position(self):
        with pytest.raises(ConfigError, match="line 1 column"):
            parse_config("{nope}")

    def test_missing_field_is_named(self):
        with pytest.raises(ConfigError, match="seed: required"):
            parse_config('{"game": {"source": "synthetic"}, "n": 4, "out_dir": "x"}')

    def test_out_dir_flag_satisfies_the_field(self):
        # A directory given on the command line should not demand a
        # placeholder in the file, and it wins when both are present.
        text = '{"game": {"source": "synthetic", "kind": "table"}, "n": 4, "seed": 1}'
        assert parse_config(text, out_dir="flagged").out_dir == "flagged"
        with pytest.raises(ConfigError, match="out_dir: required"):
            parse_config(text)
        both = text[:-1] + ', "out_dir": "filed"}'
        assert parse_config(both, out_dir="flagged").out_dir == "flagged"

    def test_unknown_fields_are_rejected(self):
        with pytest.raises(ConfigError, match="unknown fields.*typo"):
            parse_config(
                '{"game": {"source": "synthetic"}, "n": 4, "out_dir": "x",'
                ' "seed": 1, "typo": 2}'
            )

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ConfigError, match="n: expected an integer"):
            parse_config(
                '{"game": {"source": "synthetic"}, "n": true, "out_dir": "x", "seed": 1}'
            )

    @pytest.mark.parametrize(
        "patch,message",
        [
            ({"mode": "fast"}, "mode"),
            ({"orders": [3, 1]}, "sorted"),
            ({"orders": [0, 9]}, "out of range"),
            ({"contexts_per_order": 0}, "positive"),
            ({"pairs": -2}, "pairs"),
            ({"metrics": ["strengthh"]}, "metrics"),
            ({"samples": 0}, "samples"),
        ],
    )
    def test_field_rules(self, patch, message, tmp_path):
        payload = {
            "game": {"source": "synthetic", "kind": "table", "params": {"n": 6}},
            "n": 6, "out_dir": str(tmp_path), "seed": 1,
        }
        payload.update(patch)
        with pytest.raises(ConfigError, match=message):
            parse_config(json.dumps(payload))

    def test_disentanglement_requires_retained_deltas(self, tmp_path):
        with pytest.raises(ConfigError, match="retain_deltas"):
            table_config(tmp_path, metrics=["disentanglement"])

    def test_all_pairs_is_capped(self, tmp_path):
        with pytest.raises(ConfigError, match="pair sample size"):
            parse_config(json.dumps({
                "game": {"source": "synthetic", "kind": "local_pairs",
                          "params": {"g": 10}},
                "n": 100, "out_dir": str(tmp_path), "seed": 1, "pairs": "all",
            }))


class TestProbe:
    def test_synthetic_params_default_n_from_config(self, tmp_path):
        # {"kind": "table"} with no params block should build a game of
        # the config's size, and a bad kind is a validation error, not a
        # stray traceback.
        config = table_config(tmp_path / "out", game={"source": "synthetic", "kind": "table"})
        assert cmd_probe(config, echo=quiet) == EXIT_OK
        assert RecordArchive.open(tmp_path / "out").header.n == 6

        bad = table_config(tmp_path / "bad", game={"source": "synthetic", "kind": "tble"})
        with pytest.raises(ConfigError, match="game: unknown synthetic kind"):
            cmd_probe(bad, echo=quiet)

    def test_probe_fills_the_archive(self, tmp_path):
        config = table_config(tmp_path / "out")
        assert cmd_probe(config, echo=quiet) == EXIT_OK
        archive = RecordArchive.open(tmp_path / "out")
        assert archive.is_complete
        assert archive.header.n == 6
        assert len(archive.header.pairs) == 15
        assert archive.header.orders == tuple(range(5))

    def test_manifest_records_run_facts(self, tmp_path):
        config = table_config(tmp_path / "out")
        cmd_probe(config, echo=quiet)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "complete"
        assert manifest["config_digest"] == config_digest(config)
        assert manifest["samples_computed"] == 2
        # full enumeration dedupes to one evaluation per coalition
        assert manifest["evaluator_calls"] == 2 * 2**6
        assert 0.0 < manifest["cache_hit_rate"] < 1.0

    def test_resolved_config_lands_next_to_outputs(self, tmp_path):
        config = table_config(tmp_path / "out")
        cmd_probe(config, echo=quiet)
        text = (tmp_path / "out" / "config.json").read_text()
        assert parse_config(text) == config

    def test_rerun_is_a_no_op_with_identical_bytes(self, tmp_path):
        config = table_config(tmp_path / "out")
        cmd_probe(config, echo=quiet)
        before = {
            p.name: p.read_bytes()
            for p in (tmp_path / "out" / "records").iterdir()
        }
        cmd_probe(config, echo=quiet)
        after = {
            p.name: p.read_bytes()
            for p in (tmp_path / "out" / "records").iterdir()
        }
        assert before == after
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["samples_computed"] == 0
        assert manifest["samples_skipped"] == 2

    def test_resume_computes_only_missing_samples(self, tmp_path):
        config = table_config(tmp_path / "out")
        cmd_probe(config, echo=quiet)
        s0 = tmp_path / "out" / "records" / "s0.csv"
        s1 = tmp_path / "out" / "records" / "s1.csv"
        kept = s0.read_bytes()
        removed = s1.read_bytes()
        s1.unlink()
        cmd_probe(config, echo=quiet)
        assert s0.read_bytes() == kept
        assert s1.read_bytes() == removed

    def test_changed_settings_refuse_the_directory(self, tmp_path):
        cmd_probe(table_config(tmp_path / "out"), echo=quiet)
        with pytest.raises(ArchiveError, match="different settings"):
            cmd_probe(table_config(tmp_path / "out", seed=99), echo=quiet)

    def test_lock_file_excludes_concurrent_runs(self, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / "run.lock").write_text("pid 1\n")
        with pytest.raises(ConfigError, match="another run owns"):
            cmd_probe(table_config(out), echo=quiet)

    def test_lock_is_released_afterwards(self, tmp_path):
        config = table_config(tmp_path / "out")
        cmd_probe(config, echo=quiet)
        assert not (tmp_path / "out" / "run.lock").exists()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        sampled = dict(mode="sampled", orders=[0, 2, 4], contexts_per_order=16,
                       pairs=6, retain_deltas=True,
                       metrics=["strength", "disentanglement"])
        cmd_probe(table_config(tmp_path / "w1", n=8, **sampled), echo=quiet)
        cmd_probe(table_config(tmp_path / "w8", n=8, **sampled),
                  workers=8, echo=quiet)
        for sid in ("s0", "s1"):
            a = (tmp_path / "w1" / "records" / f"{sid}.csv").read_bytes()
            b = (tmp_path / "w8" / "records" / f"{sid}.csv").read_bytes()
            assert a == b

    def test_archive_identity_ignores_out_dir_and_metrics(self, tmp_path):
        # Neither field shapes record bytes, so the headers match and a
        # copied archive resumes under a different directory or metric
        # list without recomputation.
        cmd_probe(table_config(tmp_path / "a"), echo=quiet)
        cmd_probe(table_config(tmp_path / "b", metrics=["average"]), echo=quiet)
        header_a = (tmp_path / "a" / "archive.json").read_bytes()
        assert header_a == (tmp_path / "b" / "archive.json").read_bytes()

        shutil.copytree(tmp_path / "a", tmp_path / "moved")
        cmd_probe(table_config(tmp_path / "moved"), echo=quiet)
        manifest = json.loads((tmp_path / "moved" / "manifest.json").read_text())
        assert manifest["samples_computed"] == 0
        assert manifest["samples_skipped"] == 2

    def test_synthetic_n_mismatch_is_a_config_error(self, tmp_path):
        bad = parse_config(json.dumps({
            "game": {"source": "synthetic", "kind": "table", "params": {"n": 6}},
            "n": 7, "out_dir": str(tmp_path / "out"), "seed": 1,
        }))
        with pytest.raises(ConfigError, match="n=6, config says n=7"):
            cmd_probe(bad, echo=quiet)


class TestImageSource:
    def make_inputs(self, tmp_path, count=2):
        rng = np.random.default_rng(0)
        paths = []
        for k in range(count):
            path = tmp_path / f"img{k}.bin"
            save_tensor(path, rng.uniform(-1, 1, size=(1, 6, 6)))
            paths.append(str(path))
        return paths

    def test_probe_uses_file_stems_as_sample_ids(self, tmp_path):
        config = parse_config(json.dumps({
            "game": {
                "source": "image", "inputs": self.make_inputs(tmp_path),
                "g": 3, "scorer": {"kind": "bilinear", "seed": 4,
                                    "pos_a": [0, 0, 0], "pos_b": [0, 5, 5]},
                "baseline": "zero",
            },
            "n": 9, "out_dir": str(tmp_path / "out"), "seed": 3,
        }))
        assert cmd_probe(config, echo=quiet) == EXIT_OK
        archive = RecordArchive.open(tmp_path / "out")
        assert archive.header.sample_ids == ("img0", "img1")
        assert archive.is_complete

    def test_linear_scorer_probes_to_zero_interactions(self, tmp_path):
        config = parse_config(json.dumps({
            "game": {
                "source": "image", "inputs": self.make_inputs(tmp_path, count=1),
                "g": 3, "scorer": {"kind": "linear", "seed": 4},
            },
            "n": 9, "out_dir": str(tmp_path / "out"), "seed": 3,
        }))
        cmd_probe(config, echo=quiet)
        records = RecordArchive.open(tmp_path / "out").load()
        worst = max(
            abs(e.mean)
            for r in records.records for p in r.profiles for e in p.values
        )
        assert worst < 1e-9

    def test_duplicate_stems_are_rejected(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        rng = np.random.default_rng(0)
        for sub in ("a", "b"):
            save_tensor(tmp_path / sub / "x.bin", rng.uniform(-1, 1, (1, 6, 6)))
        config = parse_config(json.dumps({
            "game": {"source": "image",
                      "inputs": [str(tmp_path / "a" / "x.bin"),
                                 str(tmp_path / "b" / "x.bin")],
                      "g": 3, "scorer": {"kind": "linear", "seed": 4}},
            "n": 9, "out_dir": str(tmp_path / "out"), "seed": 3,
        }))
        with pytest.raises(ConfigError, match="stems must be unique"):
            cmd_probe(config, echo=quiet)


class TestBridgeSource:
    @pytest.fixture
    def endpoint(self):
        server = BuiltinServer(seed=7, n=6)
        sock, port = server.serve_tcp()
        thread = threading.Thread(
            target=server.accept_loop, args=(sock,), daemon=True
        )
        thread.start()
        yield f"tcp:127.0.0.1:{port}"
        sock.close()

    def test_probe_through_a_live_endpoint(self, tmp_path, endpoint):
        config = parse_config(json.dumps({
            "game": {"source": "bridge", "endpoint": endpoint},
            "n": 6, "out_dir": str(tmp_path / "out"), "seed": 5, "pairs": 4,
        }))
        assert cmd_probe(config, echo=quiet) == EXIT_OK
        archive = RecordArchive.open(tmp_path / "out")
        assert archive.header.sample_ids == ("builtin",)
        assert archive.is_complete

    def test_unknown_ref_is_a_validation_error(self, tmp_path, endpoint):
        config = parse_config(json.dumps({
            "game": {"source": "bridge", "endpoint": endpoint,
                      "input_refs": ["nope"]},
            "n": 6, "out_dir": str(tmp_path / "out"), "seed": 5,
        }))
        with pytest.raises(ConfigError, match="not served"):
            cmd_probe(config, echo=quiet)


class TestMetricsCommand:
    @pytest.fixture
    def archive_dir(self, tmp_path):
        config = table_config(
            tmp_path / "out",
            metrics=["strength", "normalized", "purity", "average", "eta",
                     "disentanglement"],
            retain_deltas=True,
        )
        cmd_probe(config, echo=quiet)
        return tmp_path / "out"

    def test_csv_values_match_the_metrics_module(self, archive_dir):
        assert cmd_metrics(archive_dir, which=["strength"], echo=quiet) == EXIT_OK
        records = RecordArchive.open(archive_dir).load()
        expected = order_profile(records, "strength")
        lines = (archive_dir / "metrics-strength.csv").read_text().splitlines()
        assert lines[0] == "order,value,stderr,kind"
        for line, m, value in zip(lines[1:], expected.orders, expected.values):
            assert line == f"{m},{format_float(value)},,strength"

    def test_default_metric_list_comes_from_the_config(self, archive_dir):
        cmd_metrics(archive_dir, echo=quiet)
        for name in ("strength", "normalized", "purity", "average", "eta",
                     "disentanglement"):
            assert (archive_dir / f"metrics-{name}.csv").is_file()

    def test_eta_emits_one_row_per_sample(self, archive_dir):
        cmd_metrics(archive_dir, which=["eta"], echo=quiet)
        records = RecordArchive.open(archive_dir).load()
        lines = (archive_dir / "metrics-eta.csv").read_text().splitlines()
        assert len(lines) == 1 + len(records.records)
        m_star = eta_order(records.n)
        for line, record in zip(lines[1:], records.records):
            single = SampleRecordSet((record,))
            assert line == f"{m_star},{format_float(eta(single))},,eta"

    def test_out_redirects_a_single_metric(self, archive_dir, tmp_path):
        target = tmp_path / "strength.csv"
        cmd_metrics(archive_dir, which=["strength"], out=target, echo=quiet)
        assert target.read_text().startswith("order,value,stderr,kind")

    def test_out_refuses_multiple_metrics(self, archive_dir, tmp_path):
        with pytest.raises(ConfigError, match="exactly one metric"):
            cmd_metrics(archive_dir, which=["strength", "purity"],
                        out=tmp_path / "x.csv", echo=quiet)

    def test_unknown_metric_is_rejected(self, archive_dir):
        with pytest.raises(ConfigError, match="unknown metrics"):
            cmd_metrics(archive_dir, which=["sharpness"], echo=quiet)

    def test_incomplete_archive_is_rejected(self, tmp_path, archive_dir):
        (archive_dir / "records" / "s1.csv").unlink()
        with pytest.raises(ArchiveError, match="incomplete"):
            cmd_metrics(archive_dir, which=["strength"], echo=quiet)


class TestCompareCommand:
    def run_two(self, tmp_path, seed_b=12):
        cmd_probe(table_config(tmp_path / "a"), echo=quiet)
        cmd_probe(table_config(tmp_path / "b", seed=seed_b), echo=quiet)
        return tmp_path / "a", tmp_path / "b"

    def test_self_comparison_is_a_zero_column(self, tmp_path):
        a, _ = self.run_two(tmp_path)
        out = tmp_path / "delta.csv"
        assert cmd_compare(a, a, "avg", out=out, echo=quiet) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "order,value,stderr,kind"
        assert all(line.split(",")[1] == "0" for line in lines[1:])
        assert all(line.endswith(",delta") for line in lines[1:])

    def test_swapping_arguments_negates_the_column(self, tmp_path):
        a, b = self.run_two(tmp_path)
        ab, ba = tmp_path / "ab.csv", tmp_path / "ba.csv"
        cmd_compare(a, b, "avg", out=ab, echo=quiet)
        cmd_compare(b, a, "avg", out=ba, echo=quiet)
        fwd = [float(line.split(",")[1])
               for line in ab.read_text().splitlines()[1:]]
        rev = [float(line.split(",")[1])
               for line in ba.read_text().splitlines()[1:]]
        assert fwd == pytest.approx([-x for x in rev], abs=1e-15)
        assert any(abs(x) > 1e-6 for x in fwd)

    def test_mismatched_universes_are_rejected(self, tmp_path):
        cmd_probe(table_config(tmp_path / "a"), echo=quiet)
        cmd_probe(table_config(tmp_path / "b", n=4), echo=quiet)
        with pytest.raises(GridMismatch):
            cmd_compare(tmp_path / "a", tmp_path / "b", "avg", echo=quiet)

    def test_unknown_metric_is_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="metric must be one of"):
            cmd_compare(tmp_path, tmp_path, "strength", echo=quiet)


class TestSelfcheckCommand:
    def test_clean_build_exits_zero(self):
        assert cmd_selfcheck(sizes=(4,), echo=quiet) == EXIT_OK

    def test_sabotage_exits_three(self):
        rc = cmd_selfcheck(sizes=(4,), cardinality_weights=[1, 0, 0, 0],
                           echo=quiet)
        assert rc == EXIT_SELFCHECK


class TestMainEntry:
    def test_probe_then_metrics_through_argv(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text(serialize_config(table_config(tmp_path / "out")))
        assert main(["probe", "--config", str(config_path)]) == EXIT_OK
        assert main(["metrics", str(tmp_path / "out"), "--which", "strength"]) == EXIT_OK
        assert (tmp_path / "out" / "metrics-strength.csv").is_file()

    def test_validation_failures_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"game": {"source": "synthetic"}, "n": 4}')
        assert main(["probe", "--config", bad.as_posix()]) == EXIT_VALIDATION
        assert "error" in capsys.readouterr().err

    def test_runtime_failures_exit_two(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({
            "game": {"source": "bridge", "endpoint": "tcp:127.0.0.1:1"},
            "n": 6, "out_dir": str(tmp_path / "out"), "seed": 1,
        }))
        assert main(["probe", "--config", str(config_path)]) == EXIT_RUNTIME

    def test_selfcheck_subcommand_reports_properties(self, capsys):
        assert main(["selfcheck", "--sizes", "4"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "efficiency" in out and "all properties hold" in out

    def test_bad_sizes_exit_one(self, capsys):
        assert main(["selfcheck", "--sizes", "4,two"]) == EXIT_VALIDATION

    def test_workers_override_is_validated(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text(serialize_config(table_config(tmp_path / "out")))
        rc = main(["probe", "--config", str(config_path), "--workers", "0"])
        assert rc == EXIT_VALIDATION

import json

import numpy as np
import pytest

from pdomd.cli import (
    ExperimentConfig,
    config_from_mapping,
    generate_price_trace,
    ingest_price_trace,
    main,
    parse_config,
    parse_seed_range,
    run_experiment,
    sweep_rates,
    write_price_trace,
)
from pdomd.errors import ConfigError


def write_config(path, **entries):
    path.write_text(json.dumps(entries))
    return path


class TestConfigParsing:
    def test_minimal_defaults(self, tmp_path):
        path = write_config(tmp_path / "c.json", scenario="synthetic", T=400)
        config = parse_config(path)
        assert config.horizon == 400
        assert config.seeds == tuple(range(20))
        assert config.resolved_variant == "simplex"
        assert config.sweep_horizons == (100, 400, 1600, 6400)
        # defaults defer to the schedule: V = sqrt(T), alpha = T
        params = config.params_for(400)
        assert params.objective_weight == pytest.approx(20.0)
        assert params.prox_weight == pytest.approx(400.0)

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(ConfigError, match="alpha_beta"):
            config_from_mapping({"scenario": "synthetic", "alpha_beta": 1})

    def test_nested_path_in_diagnostics(self):
        with pytest.raises(ConfigError, match=r"synthetic\.d"):
            config_from_mapping({"synthetic": {"d": "ten"}})
        with pytest.raises(ConfigError, match=r"synthetic\.n_ineq"):
            config_from_mapping({"synthetic": {"n_ineq": -1}})
        with pytest.raises(ConfigError, match=r"datacenter\.pareto_shape"):
            config_from_mapping({"datacenter": {"pareto_shape": 0.5}})

    def test_short_horizon_rejected(self):
        with pytest.raises(ConfigError, match="T"):
            config_from_mapping({"T": 1})

    def test_boolean_not_an_integer(self):
        with pytest.raises(ConfigError, match="expected an integer"):
            config_from_mapping({"T": True})

    def test_datacenter_refuses_simplex_variant(self):
        with pytest.raises(ConfigError, match="box"):
            config_from_mapping({"scenario": "datacenter", "variant": "simplex"})

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            config_from_mapping({"seeds": [0, 1, 1]})

    def test_sweep_horizons_must_increase(self):
        with pytest.raises(ConfigError, match="increasing"):
            config_from_mapping({"sweep_T": [400, 100]})

    def test_equalities_bounded_by_dimension(self):
        with pytest.raises(ConfigError, match=r"synthetic\.n_eq"):
            config_from_mapping({"synthetic": {"d": 3, "n_eq": 3}})

    def test_invalid_json_named(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            parse_config(path)

    def test_missing_file_named(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            parse_config(tmp_path / "absent.json")

    def test_hash_ignores_out_dir(self):
        a = config_from_mapping({"T": 64, "out_dir": "left"})
        b = config_from_mapping({"T": 64, "out_dir": "right"})
        assert a.config_hash() == b.config_hash()
        c = config_from_mapping({"T": 65, "out_dir": "left"})
        assert a.config_hash() != c.config_hash()


class TestSeedRange:
    def test_range_is_inclusive(self):
        assert parse_seed_range("4..7") == (4, 5, 6, 7)

    def test_single_seed(self):
        assert parse_seed_range(" 5 ") == (5,)

    def test_backwards_range(self):
        with pytest.raises(ConfigError, match="end before start"):
            parse_seed_range("7..4")

    def test_garbage(self):
        with pytest.raises(ConfigError):
            parse_seed_range("a..b")
        with pytest.raises(ConfigError):
            parse_seed_range("five")


class TestPriceTraces:
    def test_write_ingest_round_trip(self, tmp_path):
        trace = generate_price_trace(50, seed=3)
        path = tmp_path / "trace.csv"
        write_price_trace(trace, path)
        back = ingest_price_trace(path)
        assert back.zones == trace.zones
        # prices are written with repr, so the round trip is exact
        assert np.array_equal(back.prices, trace.prices)

    def test_zone_offsets_ordered(self):
        trace = generate_price_trace(4000, seed=1)
        means = trace.prices.mean(axis=0)
        assert np.argmax(means) == 4  # offset 1.2
        assert np.argmin(means) == 3  # offset 0.8

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("slot,price,zone\n0,Z,1.0\n")
        with pytest.raises(ConfigError, match="header"):
            ingest_price_trace(path)

    def test_ragged_zones_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text(
            "slot,zone,price\n0,a,1.0\n1,a,1.0\n0,b,2.0\n"
        )
        with pytest.raises(ConfigError, match="ragged"):
            ingest_price_trace(path)

    def test_missing_slot_rejected(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text(
            "slot,zone,price\n0,a,1.0\n2,a,1.0\n0,b,2.0\n2,b,2.0\n"
        )
        with pytest.raises(ConfigError, match="missing slot 1"):
            ingest_price_trace(path)

    def test_duplicate_slot_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("slot,zone,price\n0,a,1.0\n0,a,1.5\n")
        with pytest.raises(ConfigError, match="duplicate slot"):
            ingest_price_trace(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "text.csv"
        path.write_text("slot,zone,price\n0,a,cheap\n")
        with pytest.raises(ConfigError, match="non-numeric"):
            ingest_price_trace(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("slot,zone,price\n")
        with pytest.raises(ConfigError, match="no rows"):
            ingest_price_trace(path)


def small_config(tmp_path, **extra):
    entries = {
        "scenario": "synthetic",
        "T": 60,
        "seeds": [0, 1],
        "synthetic": {"d": 5, "n_ineq": 1, "n_eq": 1},
        "out_dir": str(tmp_path / "out"),
    }
    entries.update(extra)
    return config_from_mapping(entries)


class TestRunExperiment:
    def test_output_files_and_headers(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        out = result["out_dir"]
        for stem in ("cost_cumulative", "violation_ineq", "violation_eq", "metrics"):
            assert (out / f"{stem}.csv").exists()
        for seed in (0, 1):
            assert (out / "records" / f"run_seed{seed}.csv").exists()
        chash = result["config_hash"]
        for stem in ("cost_cumulative", "metrics"):
            first = (out / f"{stem}.csv").read_text().splitlines()[0]
            assert first.startswith("# pdomd-experiment v1 ")
            assert chash in first
        resolved = json.loads((out / "config_resolved.json").read_text())
        assert resolved["config_hash"] == chash
        assert resolved["T"] == 60

    def test_series_shapes_and_policies(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        series = result["series"]
        assert set(series["cost"]) == {"algorithm", "hindsight"}
        assert series["cost"]["algorithm"].shape == (60,)
        # cumulative mean cost increases roughly linearly; sanity only
        assert series["cost"]["algorithm"][-1] > series["cost"]["algorithm"][0]

    def test_deterministic_outputs(self, tmp_path):
        config_a = small_config(tmp_path / "a")
        config_b = small_config(tmp_path / "b")
        result_a = run_experiment(config_a)
        result_b = run_experiment(config_b)
        for stem in ("metrics", "cost_cumulative"):
            bytes_a = (result_a["out_dir"] / f"{stem}.csv").read_bytes()
            bytes_b = (result_b["out_dir"] / f"{stem}.csv").read_bytes()
            assert bytes_a == bytes_b

    def test_override_recorded_in_headers(self, tmp_path):
        config = small_config(tmp_path, V=1)
        assert config.params_for(60).objective_weight == 1.0
        result = run_experiment(config)
        first = (result["out_dir"] / "metrics.csv").read_text().splitlines()[0]
        meta = json.loads(first.removeprefix("# pdomd-experiment v1 "))
        assert meta["V"] == 1.0
        assert meta["alpha"] == pytest.approx(60.0)  # schedule value kept

    def test_override_changes_hash(self, tmp_path):
        assert (
            small_config(tmp_path, V=1).config_hash()
            != small_config(tmp_path).config_hash()
        )

    def test_resolved_config_round_trips(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        reloaded = parse_config(result["out_dir"] / "config_resolved.json")
        assert reloaded.config_hash() == result["config_hash"]
        assert reloaded.canonical() == config.canonical()

    def test_resolved_config_detects_tampering(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        path = result["out_dir"] / "config_resolved.json"
        resolved = json.loads(path.read_text())
        resolved["T"] = 61  # edit a value without refreshing the hash
        path.write_text(json.dumps(resolved))
        with pytest.raises(ConfigError, match="config_hash"):
            parse_config(path)


class TestSweep:
    def test_single_horizon_rejected(self):
        config = ExperimentConfig(sweep_horizons=(64,))
        with pytest.raises(ConfigError, match="at least two"):
            sweep_rates(config)

    def test_datacenter_rejected(self):
        config = ExperimentConfig(scenario="datacenter")
        with pytest.raises(ConfigError, match="synthetic"):
            sweep_rates(config)

    def test_overrides_rejected(self):
        config = ExperimentConfig(prox_weight=50.0)
        with pytest.raises(ConfigError, match="override"):
            sweep_rates(config)

    def test_degenerate_curve_flagged(self, tmp_path):
        # no inequality constraints: the violation curve is identically zero
        config = dataclasses_replace_synthetic(
            ExperimentConfig(
                seeds=(0, 1),
                sweep_horizons=(16, 32),
                out_dir=str(tmp_path / "sweep"),
            ),
            dimension=4,
            n_ineq=0,
            n_eq=1,
        )
        report = sweep_rates(config)
        assert report["ineq_scaled"]["degenerate"] is True
        assert report["ineq_scaled"]["slope"] is None
        assert report["eq_scaled"]["degenerate"] is False
        assert (tmp_path / "sweep" / "sweep_report.json").exists()
        assert (tmp_path / "sweep" / "sweep_means.csv").exists()

    def test_report_written_matches_return(self, tmp_path):
        config = dataclasses_replace_synthetic(
            ExperimentConfig(
                seeds=(0,),
                sweep_horizons=(16, 32),
                out_dir=str(tmp_path / "sweep"),
            ),
            dimension=4,
            n_ineq=1,
            n_eq=1,
        )
        report = sweep_rates(config)
        on_disk = json.loads((tmp_path / "sweep" / "sweep_report.json").read_text())
        assert on_disk == json.loads(json.dumps(report))


def dataclasses_replace_synthetic(config, **synth):
    import dataclasses

    return dataclasses.replace(
        config, synthetic=dataclasses.replace(config.synthetic, **synth)
    )


class TestMainExitCodes:
    def test_gen_trace_and_run_and_audit(self, tmp_path, capsys):
        trace_path = tmp_path / "trace.csv"
        assert main(["gen-trace", "--out", str(trace_path), "--slots", "30"]) == 0
        assert len(ingest_price_trace(trace_path)) == 30

        config_path = write_config(
            tmp_path / "c.json",
            scenario="synthetic",
            T=40,
            seeds=[0],
            synthetic={"d": 4, "n_ineq": 1, "n_eq": 1},
            out_dir=str(tmp_path / "out"),
        )
        assert main(["run", "--config", str(config_path)]) == 0
        record_path = tmp_path / "out" / "records" / "run_seed0.csv"
        assert record_path.exists()

        code = main(
            ["audit", "--config", str(config_path), "--record", str(record_path)]
        )
        assert code == 0
        assert "audit passed" in capsys.readouterr().out

        # the resolved config written next to the outputs audits the same
        # record, so a run directory is self-contained
        resolved = tmp_path / "out" / "config_resolved.json"
        code = main(["audit", "--config", str(resolved), "--record", str(record_path)])
        assert code == 0
        assert "audit passed" in capsys.readouterr().out

    def test_config_error_is_exit_2(self, tmp_path, capsys):
        bad = write_config(tmp_path / "bad.json", alpha_beta=1)
        assert main(["run", "--config", str(bad)]) == 2
        assert "alpha_beta" in capsys.readouterr().err

    def test_audit_hash_mismatch_is_exit_2(self, tmp_path, capsys):
        config_path = write_config(
            tmp_path / "c.json",
            scenario="synthetic",
            T=40,
            seeds=[0],
            synthetic={"d": 4, "n_ineq": 1, "n_eq": 1},
            out_dir=str(tmp_path / "out"),
        )
        assert main(["run", "--config", str(config_path)]) == 0
        other = write_config(
            tmp_path / "other.json",
            scenario="synthetic",
            T=44,
            seeds=[0],
            synthetic={"d": 4, "n_ineq": 1, "n_eq": 1},
        )
        record_path = tmp_path / "out" / "records" / "run_seed0.csv"
        code = main(["audit", "--config", str(other), "--record", str(record_path)])
        assert code == 2
        assert "hash mismatch" in capsys.readouterr().err

    def test_tampered_record_is_exit_3(self, tmp_path, capsys):
        config_path = write_config(
            tmp_path / "c.json",
            scenario="synthetic",
            T=40,
            seeds=[0],
            synthetic={"d": 4, "n_ineq": 1, "n_eq": 1},
            out_dir=str(tmp_path / "out"),
        )
        assert main(["run", "--config", str(config_path)]) == 0
        record_path = tmp_path / "out" / "records" / "run_seed0.csv"
        lines = record_path.read_text().splitlines()
        # perturb the recorded objective on the first data row; the row
        # layout is t, mu_0..mu_3, objective, ...
        header_rows = 2  # json header + column names
        fields = lines[header_rows].split(",")
        fields[5] = repr(float(fields[5]) + 0.5)
        lines[header_rows] = ",".join(fields)
        record_path.write_text("\n".join(lines) + "\n")
        code = main(
            ["audit", "--config", str(config_path), "--record", str(record_path)]
        )
        assert code == 3
        assert "error" in capsys.readouterr().err

    def test_seed_override_applies(self, tmp_path):
        config_path = write_config(
            tmp_path / "c.json",
            scenario="synthetic",
            T=30,
            seeds=[0, 1, 2],
            synthetic={"d": 4, "n_ineq": 1, "n_eq": 1},
            out_dir=str(tmp_path / "out"),
        )
        assert (
            main(["run", "--config", str(config_path), "--seeds", "5..6"]) == 0
        )
        records = sorted(p.name for p in (tmp_path / "out" / "records").iterdir())
        assert records == ["run_seed5.csv", "run_seed6.csv"]

"""Command-line interface: exit codes, manifests, config round trips.

Everything runs in process through cli.main(argv); exit code channels are
0 = all checks pass, 1 = a check failed, 2 = config or usage error,
3 = numerical failure raised by the library.
"""

import hashlib
import json

import pytest

from sbmlab import cli


def _manifest(out):
    with open(out / "manifest.json") as fh:
        return json.load(fh)


def test_phi_table_success(tmp_path, capsys):
    rc = cli.main(["phi", "--family", "stable", "--alpha", "1.0",
                   "--out", str(tmp_path)])
    assert rc == 0
    man = _manifest(tmp_path)
    assert sorted(man) == ["backend", "checks", "config", "config_sha256",
                           "files", "schema_version", "seed", "warnings"]
    assert man["config"]["operation"] == "phi.table"
    assert all(c["pass"] for c in man["checks"])
    # every recorded artifact checksum must recompute from disk
    for name, digest in man["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    cfg = cli.RunConfig.from_dict(man["config"])
    assert cli._config_hash(cfg) == man["config_sha256"]
    out = capsys.readouterr().out
    assert "[PASS]" in out and "manifest:" in out


def test_failed_check_gives_rc1(tmp_path):
    # this exponent family loses subadditive scaling for small mass parameters
    rc = cli.main(["phi", "--family", "relativistic-geometric-stable",
                   "--alpha", "1.0", "--m", "0.2", "--out", str(tmp_path)])
    assert rc == 1
    man = _manifest(tmp_path)
    failed = [c["name"] for c in man["checks"] if not c["pass"]]
    assert "phi.subadditive-scaling" in failed


def test_usage_errors_give_rc2(capsys):
    assert cli.main(["phi", "--bogus"]) == 2
    assert cli.main(["no-such-command"]) == 2
    capsys.readouterr()


def test_bad_family_spec_gives_rc2(tmp_path, capsys):
    rc = cli.main(["phi", "--family", "no-such-family", "--out", str(tmp_path)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_run_config_error_channels(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["run", "--config", str(missing)]) == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"operation": "phi.table",
                                   "family": {"name": "stable"}, "extra": 1}))
    assert cli.main(["run", "--config", str(unknown)]) == 2

    badop = tmp_path / "badop.json"
    badop.write_text(json.dumps({"operation": "phi.nope",
                                 "family": {"name": "stable"}}))
    assert cli.main(["run", "--config", str(badop)]) == 2
    assert capsys.readouterr().err.count("config error") == 4


def test_numerical_failures_give_rc3(tmp_path, capsys):
    # the Green kernel needs transience; gamma in d=1 is recurrent
    rc = cli.main(["kernel", "g", "--family", "gamma", "--d", "1",
                   "--r", "0.01,0.1", "--out", str(tmp_path / "a")])
    assert rc == 3
    # no exact sampler exists for this family
    rc = cli.main(["simulate", "mean-exit", "--family", "reg-varying",
                   "--alpha", "1.0", "--radius", "0.5", "--n-paths", "50",
                   "--out", str(tmp_path / "b")])
    assert rc == 3
    assert capsys.readouterr().err.count("numerical failure") == 2


def test_run_reruns_are_byte_identical(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    out = tmp_path / "out"
    cfg_path.write_text(json.dumps({
        "operation": "phi.table",
        "family": {"name": "geometric-stable", "alpha": 1.0},
        "d": 2, "out": str(out),
    }))
    assert cli.main(["run", "--config", str(cfg_path)]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert cli.main(["run", "--config", str(cfg_path)]) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    assert "manifest.json" in first and any(n.endswith(".csv") for n in first)


def test_run_seed_and_out_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "operation": "transience.check",
        "family": {"name": "geometric-stable", "alpha": 1.0},
        "d": 2, "out": str(tmp_path / "ignored"),
    }))
    out = tmp_path / "actual"
    rc = cli.main(["run", "--config", str(cfg_path), "--seed", "7",
                   "--out", str(out)])
    assert rc == 0
    man = _manifest(out)
    assert man["seed"] == 7 and man["config"]["seed"] == 7
    assert man["config"]["out"] == str(out)


def test_runconfig_dict_roundtrip():
    cfg = cli.RunConfig(operation="kernel.profile",
                        family={"name": "stable", "alpha": 1.5},
                        d=3, seed=11, params={"kind": "j"})
    assert cli.RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(cli.ConfigError, match="unknown config keys"):
        cli.RunConfig.from_dict({**cfg.to_dict(), "speed": 9})
    with pytest.raises(cli.ConfigError, match="positive"):
        cli.RunConfig(operation="phi.table", family={"name": "stable"}, d=0)
    with pytest.raises(cli.ConfigError, match="'name'"):
        cli.RunConfig(operation="phi.table", family={})


def test_backend_flag_recorded_and_reset(tmp_path):
    from sbmlab import _backend
    before = _backend.backend_name()
    rc = cli.main(["phi", "--family", "gamma", "--backend", "numpy",
                   "--out", str(tmp_path)])
    assert rc == 0
    assert _manifest(tmp_path)["backend"] == "numpy"
    assert _backend.backend_name() == before


def test_threads_flag_sizes_pool_and_clamps(tmp_path):
    import numba
    rc = cli.main(["phi", "--family", "gamma", "--threads", "1",
                   "--out", str(tmp_path / "a")])
    assert rc == 0
    assert numba.get_num_threads() == 1
    # requests beyond the configured pool clamp instead of failing
    rc = cli.main(["phi", "--family", "gamma", "--threads", "4096",
                   "--out", str(tmp_path / "b")])
    assert rc == 0
    assert numba.get_num_threads() <= numba.config.NUMBA_NUM_THREADS


def test_simulate_mean_exit_smoke(tmp_path):
    rc = cli.main(["simulate", "mean-exit", "--family", "stable", "--alpha", "1.0",
                   "--d", "1", "--radius", "0.5", "--n-paths", "400",
                   "--dt-factor", "0.01", "--out", str(tmp_path)])
    assert rc == 0
    man = _manifest(tmp_path)
    assert man["config"]["params"]["radius"] == 0.5
    assert any(c["name"].startswith("simulate") for c in man["checks"])


def test_verify_conditions_smoke(tmp_path):
    rc = cli.main(["verify", "conditions", "--family", "geometric-stable",
                   "--alpha", "1.0", "--d", "2", "--out", str(tmp_path)])
    assert rc == 0
    names = [c["name"] for c in _manifest(tmp_path)["checks"]]
    assert "conditions.upper-scaling" in names
    assert "conditions.lower-scaling" in names

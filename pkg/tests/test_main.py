"""Tests for the command-line interface."""

import json

import pytest

from src.main import EXIT_CAP, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def _json(capsys, *argv):
    code, out = _run(capsys, *argv)
    return code, json.loads(out) if out else None


class TestSample:
    """Tests for the sample subcommand."""

    def test_level_sampler(self, capsys, mock_config_file):
        """A normal level IRS has a single atom."""
        code, report = _json(capsys, "sample", "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["command"] == "sample"
        assert report["support_size"] == 1
        assert report["max_frequency"] == "1"
        assert report["config"]["trials"] == 50

    def test_report_keys(self, capsys, mock_config_file):
        """Trials, seed and support sit at the top of the report."""
        _, report = _json(capsys, "sample", "--config", str(mock_config_file))
        assert report["trials"] == 50
        assert report["seed"] == 7
        assert report["sampler"]["kind"] == "level"
        assert report["support"] == [{"fingerprint_hash": report["support"][0]["fingerprint_hash"], "count": 50}]
        assert "distribution" not in report

    def test_byte_identical(self, capsys, mock_config_file):
        """Equal seeds give byte-identical reports."""
        first = _run(capsys, "sample", "--config", str(mock_config_file))
        second = _run(capsys, "sample", "--config", str(mock_config_file))
        assert first == second

    def test_overrides(self, capsys, mock_config_file):
        """Flags override the config."""
        _, report = _json(capsys, "sample", "--config", str(mock_config_file), "--trials", "5", "--seed", "2")
        assert report["trials"] == 5
        assert report["seed"] == 2
        assert report["config"]["seed"] == 2

    def test_csv(self, capsys, mock_config_file):
        """CSV output lists digest and count."""
        code, out = _run(capsys, "sample", "--config", str(mock_config_file), "--format", "csv")
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "fingerprint_hash,count"
        assert lines[1].endswith(",50")

    def test_timings(self, capsys, mock_config_file):
        """Runtimes appear only with --timings."""
        _, plain = _json(capsys, "sample", "--config", str(mock_config_file))
        _, timed = _json(capsys, "sample", "--config", str(mock_config_file), "--timings")
        assert "ms" not in plain
        assert "ms" in timed


class TestVerify:
    """Tests for the verify subcommand."""

    def test_passing_check(self, capsys, mock_config_file):
        """A passing check exits 0."""
        code, report = _json(capsys, "verify", "def_cover", "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["summary"] == {"pass": 1}
        assert report["reports"][0]["seed"] == 7

    def test_failing_check(self, capsys, write_json, sample_config):
        """A failing check exits 4."""
        path = write_json("fail.json", {**sample_config, "check_params": {"def_cover": {"same_discard": True}}})
        code, report = _json(capsys, "verify", "def_cover", "--config", str(path))
        assert code == EXIT_CHECK_FAILED
        assert report["reports"][0]["verdict"] == "fail"

    def test_strict(self, capsys, write_json, sample_config):
        """Inconclusive checks fail only under --strict."""
        params = {"coloring_collisions": {"trials": 10}}
        path = write_json("few.json", {**sample_config, "check_params": params})
        code, report = _json(capsys, "verify", "coloring_collisions", "--config", str(path))
        assert code == EXIT_OK
        assert report["reports"][0]["verdict"] == "inconclusive"
        code, _ = _json(capsys, "verify", "coloring_collisions", "--config", str(path), "--strict")
        assert code == EXIT_CHECK_FAILED

    def test_checks_from_config(self, capsys, write_json, sample_config):
        """Without names the config list is used."""
        path = write_json("list.json", {**sample_config, "checks": ["def_cover", "enumeration_orders"]})
        _, report = _json(capsys, "verify", "--config", str(path))
        assert [r["check"] for r in report["reports"]] == ["def_cover", "enumeration_orders"]

    def test_timings(self, capsys, mock_config_file):
        """--timings adds ms to each report."""
        _, report = _json(capsys, "verify", "def_cover", "--config", str(mock_config_file), "--timings")
        assert "ms" in report["reports"][0]

    def test_order_cap_applies(self, capsys, write_json, sample_config):
        """The config order cap reaches the checks."""
        path = write_json("cap.json", {**sample_config, "order_cap": 4})
        code, _ = _run(capsys, "verify", "index_bound", "--config", str(path))
        assert code == EXIT_CAP

    def test_unknown_check(self, capsys, mock_config_file):
        """Unknown names exit 2."""
        code, _ = _run(capsys, "verify", "no_such_check", "--config", str(mock_config_file))
        assert code == EXIT_USAGE

    def test_csv_rejected(self, capsys, mock_config_file):
        """Only sample writes CSV."""
        code, _ = _run(capsys, "verify", "def_cover", "--config", str(mock_config_file), "--format", "csv")
        assert code == EXIT_USAGE


class TestDistance:
    """Tests for the distance subcommand."""

    def test_ray(self, capsys, mock_config_file, write_json):
        """Rays agreeing on two digits are 1/4 apart."""
        path = write_json("rays.json", {"p": "0101", "q": "0110"})
        code, report = _json(capsys, "distance", "ray", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["distance"] == {"value": "1/4", "decimal": "0.25"}

    def test_aut(self, capsys, mock_config_file, write_json):
        """The root swap is at distance 1 from the identity."""
        path = write_json("auts.json", {"a": {"": [1, 0]}, "b": {}})
        _, report = _json(capsys, "distance", "aut", "--input", str(path), "--config", str(mock_config_file))
        assert report["distance"]["value"] == "1"

    def test_partition(self, capsys, mock_config_file, write_json):
        """Equal partition sequences set the truncation flag."""
        P = [{"level": 0, "blocks": [[""]]}, {"level": 1, "blocks": [["0"], ["1"]]}]
        path = write_json("parts.json", {"P": P, "Q": P})
        _, report = _json(capsys, "distance", "partition", "--input", str(path), "--config", str(mock_config_file))
        assert report["distance"]["equal_at_truncation"] is True

    def test_set(self, capsys, mock_config_file, write_json):
        """Opposite rays differ on level 1."""
        path = write_json("sets.json", {"C1": {"ray": "00"}, "C2": {"ray": "11"}})
        _, report = _json(capsys, "distance", "set", "--input", str(path), "--config", str(mock_config_file))
        assert report["distance"]["value"] == "1"

    def test_class(self, capsys, mock_config_file, write_json):
        """Opposite rays are one orbit apart."""
        path = write_json("sets.json", {"C1": {"ray": "00"}, "C2": {"ray": "11"}})
        _, report = _json(capsys, "distance", "class", "--input", str(path), "--config", str(mock_config_file))
        assert report["distance"]["equal_at_truncation"] is True

    def test_class_over_cap(self, capsys, write_json, sample_config):
        """A group larger than the order cap exits 3."""
        config = write_json("cap.json", {**sample_config, "order_cap": 4})
        path = write_json("sets.json", {"C1": {"ray": "00"}, "C2": {"ray": "11"}})
        code, _ = _run(capsys, "distance", "class", "--input", str(path), "--config", str(config))
        assert code == EXIT_CAP

    def test_bad_json(self, capsys, mock_config_file, temp_config_dir):
        """Unparseable input exits 2."""
        path = temp_config_dir / "bad.json"
        path.write_text("{ nope")
        code, _ = _run(capsys, "distance", "ray", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_USAGE

    def test_missing_keys(self, capsys, mock_config_file, write_json):
        """Inputs must carry the expected keys."""
        path = write_json("rays.json", {"p": "01"})
        code, _ = _run(capsys, "distance", "ray", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_USAGE

    def test_equal_rays(self, capsys, mock_config_file, write_json):
        """Equal truncations are invalid input."""
        path = write_json("rays.json", {"p": "01", "q": "01"})
        code, _ = _run(capsys, "distance", "ray", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_USAGE


class TestOrbitsAndDecompose:
    """Tests for the orbits and decompose subcommands."""

    def test_orbits_of_input(self, capsys, mock_config_file, write_json):
        """The swap at 0 joins its children's subtrees."""
        path = write_json("gens.json", {"generators": [{"0": [1, 0]}]})
        code, report = _json(capsys, "orbits", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["order"] == 2
        assert report["orbits"][2] == {"level": 2, "blocks": [["00", "01"], ["10"], ["11"]]}
        assert report["fixed_boundary"][3] == ["100", "101", "110", "111"]

    def test_orbits_of_sample(self, capsys, mock_config_file):
        """Without input one subgroup is sampled."""
        code, report = _json(capsys, "orbits", "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["source"] == "sample"
        assert report["order"] == 64

    def test_decompose(self, capsys, mock_config_file, write_json):
        """A ray of depth 2 hangs one subtree off each level."""
        path = write_json("ray.json", {"ray": "11"})
        code, report = _json(capsys, "decompose", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_OK
        assert report["hanging_subtrees"] == ["0", "10"]
        assert report["green_ray"] == "11"
        assert report["clopen_from"] == 2
        assert report["coloring"][""] == "g"

    def test_decompose_bad_set(self, capsys, mock_config_file, write_json):
        """Malformed sets exit 2."""
        path = write_json("bad.json", {"ray": "11", "shadows": ["0"]})
        code, _ = _run(capsys, "decompose", "--input", str(path), "--config", str(mock_config_file))
        assert code == EXIT_USAGE


class TestUsage:
    """Tests for argument handling."""

    def test_no_subcommand(self, capsys):
        """A subcommand is required."""
        assert main([]) == EXIT_USAGE

    def test_help(self, capsys):
        """--help exits 0."""
        assert main(["--help"]) == EXIT_OK

    def test_bad_config(self, capsys, write_json):
        """An invalid config exits 2."""
        path = write_json("bad.json", {"d": 1})
        assert main(["sample", "--config", str(path)]) == EXIT_USAGE

    @pytest.mark.parametrize("kind", ["ray", "aut", "partition", "set", "class"])
    def test_distance_kinds_parse(self, capsys, kind, mock_config_file, write_json):
        """Every distance kind is accepted by the parser."""
        path = write_json("empty.json", {})
        assert main(["distance", kind, "--input", str(path), "--config", str(mock_config_file)]) == EXIT_USAGE

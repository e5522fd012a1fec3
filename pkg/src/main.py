"""Command-line entry point for treeirs."""

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any

from src.autom import FinitaryAutomorphism, aut_distance
from src.boundary import (
    class_distance_at_depth,
    coloring_from_set,
    decompose,
    find_green_ray,
    hanging_subtrees,
    hausdorff_distance_approx,
    is_clopen_at_depth,
)
from src.config import STDIN, ClosedSetSpec, ConfigManager, closed_set_from_spec
from src.errors import ConfigError, OrderCapExceeded, TreeIRSError, UnknownCheck
from src.groups import (
    GeneratedSubgroup,
    LevelPartition,
    TruncatedWreathGroup,
    orbit_partitions,
    partition_distance,
)
from src.irs import build_sampler, estimate_atom_mass, fix_set_of_sample, fingerprint
from src.tree import format_decimal, ray_distance
from src.utils import canonical_json, derive_rng, setup_logging
from src.verify import FAIL, INCONCLUSIVE, run_checks

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_CAP = 3
EXIT_CHECK_FAILED = 4

DISTANCE_KINDS = ("ray", "aut", "partition", "set", "class")


def _read_json(source: str) -> Any:
    """JSON from a file path, or stdin for "-"."""
    try:
        text = sys.stdin.read() if source == STDIN else Path(source).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read {source}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source} is not valid JSON: {e}") from e


def _require(data: Any, *keys: str) -> None:
    if not isinstance(data, dict) or any(k not in data for k in keys):
        raise ConfigError(f"Input must be an object with keys {list(keys)}")


def _rational(value) -> dict:
    return {"value": str(value), "decimal": format_decimal(value)}


class TreeIRSRunner:
    """Runs one subcommand against a validated experiment config."""

    def __init__(self, args: argparse.Namespace):
        overrides = {"seed": args.seed, "trials": args.trials, "depth": args.depth, "format": args.format}
        self.args = args
        self.config = ConfigManager(args.config, overrides)
        self.experiment = self.config.experiment
        self.ambient = TruncatedWreathGroup(self.experiment.d, self.experiment.n, self.experiment.flavor)
        self.exit_code = EXIT_OK

    def _report(self, body: dict) -> dict:
        return {"config": self.config.echo(), **body}

    def _require_json_format(self, command: str) -> None:
        if self.experiment.format != "json":
            raise ConfigError(f"{command} reports are nested; only sample supports csv")

    def cmd_sample(self) -> str:
        exp = self.experiment
        sampler = build_sampler(exp.sampler, self.ambient, exp.order_cap)
        rng = derive_rng(exp.seed, "sample")
        start = time.perf_counter()
        estimate = estimate_atom_mass(sampler, exp.trials, exp.fingerprint_depth, rng, exp.seed)
        elapsed = (time.perf_counter() - start) * 1000
        logger.info(f"Sampled {exp.trials} subgroups in {elapsed:.0f} ms")
        if exp.format == "csv":
            out = io.StringIO()
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["fingerprint_hash", "count"])
            for row in estimate.distribution.to_json()["support"]:
                writer.writerow([row["fingerprint_hash"], row["count"]])
            return out.getvalue()
        body = {"command": "sample", "sampler": sampler.describe(), **estimate.to_json()}
        if self.args.timings:
            body["ms"] = round(elapsed, 3)
        return canonical_json(self._report(body), indent=2) + "\n"

    def cmd_verify(self) -> str:
        self._require_json_format("verify")
        exp = self.experiment
        names = self.args.checks or exp.checks
        reports = run_checks(names, exp.seed, exp.check_params, exp.order_cap)
        verdicts = [r.verdict for r in reports]
        if FAIL in verdicts or (self.args.strict and INCONCLUSIVE in verdicts):
            self.exit_code = EXIT_CHECK_FAILED
        body = {
            "command": "verify",
            "strict": self.args.strict,
            "reports": [r.to_json(self.args.timings) for r in reports],
            "summary": {v: verdicts.count(v) for v in sorted(set(verdicts))},
        }
        return canonical_json(self._report(body), indent=2) + "\n"

    def _distance(self, kind: str, data: Any) -> dict:
        d = self.experiment.d
        if kind == "ray":
            _require(data, "p", "q")
            return _rational(ray_distance(data["p"], data["q"]))
        if kind == "aut":
            _require(data, "a", "b")
            a = FinitaryAutomorphism.from_portrait(d, data["a"])
            b = FinitaryAutomorphism.from_portrait(d, data["b"])
            return _rational(aut_distance(a, b))
        if kind == "partition":
            _require(data, "P", "Q")
            P = [LevelPartition.from_json(x, d) for x in data["P"]]
            Q = [LevelPartition.from_json(x, d) for x in data["Q"]]
            return partition_distance(P, Q).to_json()
        _require(data, "C1", "C2")
        C1 = closed_set_from_spec(ClosedSetSpec.model_validate(data["C1"]), d)
        C2 = closed_set_from_spec(ClosedSetSpec.model_validate(data["C2"]), d)
        if kind == "set":
            return hausdorff_distance_approx(C1, C2).to_json()
        return class_distance_at_depth(C1, C2, self.ambient.truncated(C1.depth).full(self.experiment.order_cap)).to_json()

    def cmd_distance(self) -> str:
        self._require_json_format("distance")
        data = _read_json(self.args.input)
        try:
            result = self._distance(self.args.kind, data)
        except ValueError as e:
            raise ConfigError(f"Malformed {self.args.kind} input: {e}") from e
        body = {"command": "distance", "kind": self.args.kind, "input": data, "distance": result}
        return canonical_json(self._report(body), indent=2) + "\n"

    def _subgroup(self) -> tuple[GeneratedSubgroup, dict]:
        if self.args.input:
            data = _read_json(self.args.input)
            _require(data, "generators")
            gens = tuple(FinitaryAutomorphism.from_portrait(self.ambient.d, p, self.ambient.n) for p in data["generators"])
            return GeneratedSubgroup(self.ambient, gens, None, self.experiment.order_cap), {"source": "input"}
        sampler = build_sampler(self.experiment.sampler, self.ambient, self.experiment.order_cap)
        H = sampler.sample(derive_rng(self.experiment.seed, "orbits"))
        return H, {"source": "sample", "sampler": sampler.describe()}

    def cmd_orbits(self) -> str:
        self._require_json_format("orbits")
        H, origin = self._subgroup()
        depth = self.experiment.fingerprint_depth
        partitions = orbit_partitions(H, depth)
        try:
            order = H.order()
        except OrderCapExceeded:
            logger.warning(f"Subgroup order exceeds {self.experiment.order_cap}; reporting orbits only")
            order = None
        body = {
            "command": "orbits",
            **origin,
            "subgroup": H.describe(),
            "order": order,
            "orbits": [p.to_json() for p in partitions],
            "fixed_boundary": fix_set_of_sample(H).to_json()["levels"],
            "fingerprint": fingerprint(H, depth).to_json(),
        }
        return canonical_json(self._report(body), indent=2) + "\n"

    def cmd_decompose(self) -> str:
        self._require_json_format("decompose")
        data = _read_json(self.args.input)
        try:
            C = closed_set_from_spec(ClosedSetSpec.model_validate(data), self.experiment.d)
        except ValueError as e:
            raise ConfigError(f"Malformed closed set: {e}") from e
        coloring = coloring_from_set(C)
        body = {
            "command": "decompose",
            "set": C.to_json(),
            "measure_upper": str(C.measure_upper()),
            "pieces": [piece.to_json() for piece in decompose(C)],
            "hanging_subtrees": hanging_subtrees(C),
            "green_ray": find_green_ray(C),
            "clopen_from": next((k for k in range(C.depth + 1) if is_clopen_at_depth(C, k)), None),
            "coloring": {v: c.value for v, c in coloring.colors},
        }
        return canonical_json(self._report(body), indent=2) + "\n"

    def run(self) -> int:
        output = getattr(self, f"cmd_{self.args.command}")()
        sys.stdout.write(output)
        sys.stdout.flush()
        return self.exit_code


def parse_args(argv=None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Experiment config (JSON file, or - for stdin).")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed.")
    common.add_argument("--trials", type=int, default=None, help="Override the number of trials.")
    common.add_argument("--depth", type=int, default=None, help="Override the fingerprint depth.")
    common.add_argument("--format", choices=["json", "csv"], default=None, help="Report format (csv: sample only).")
    common.add_argument("--strict", action="store_true", help="Treat inconclusive checks as failures.")
    common.add_argument("--timings", action="store_true", help="Include runtimes in reports.")
    common.add_argument("--log-level", default="WARNING", help="Logging level (DEBUG, INFO, WARNING, ...).")
    common.add_argument("--log-dir", type=Path, default=None, help="Directory for a rotating log file.")

    parser = argparse.ArgumentParser(
        prog="treeirs",
        description="Invariant random subgroups of finitary tree automorphism groups, at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="Sample subgroups and report the fingerprint histogram.")
    verify = sub.add_parser("verify", parents=[common], help="Run named checks (default: the config list).")
    verify.add_argument("checks", nargs="*", help="Check names, or 'all'.")
    distance = sub.add_parser("distance", parents=[common], help="Exact truncated distance between two inputs.")
    distance.add_argument("kind", choices=DISTANCE_KINDS)
    distance.add_argument("--input", required=True, help="JSON input (file, or - for stdin).")
    orbits = sub.add_parser("orbits", parents=[common], help="Orbit partitions of a subgroup.")
    orbits.add_argument("--input", default=None, help='JSON {"generators": [...]}; default: one sample.')
    decomposition = sub.add_parser("decompose", parents=[common], help="Subtree decomposition of a closed set.")
    decomposition.add_argument("--input", required=True, help="Closed set JSON (file, or - for stdin).")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    setup_logging(args.log_dir, level=args.log_level)

    try:
        return TreeIRSRunner(args).run()
    except (ConfigError, UnknownCheck) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OrderCapExceeded as e:
        logger.error(str(e))
        return EXIT_CAP
    except TreeIRSError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"Unhandled exception: {e}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())

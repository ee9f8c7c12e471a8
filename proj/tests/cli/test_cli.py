"""End-to-end tests of the stabkit executable: exit codes, report schema,
CSV side outputs and thread independence.

Usage: test_cli.py STABKIT_EXECUTABLE REPO_ROOT
"""

import csv
import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema
from referencing import Registry, Resource

EXE = None
ROOT = None


def load_schemas():
    schemas = {}
    for path in sorted((ROOT / "docs" / "schemas").glob("*.schema.json")):
        schemas[path.name] = json.loads(path.read_text())
    registry = Registry().with_resources(
        (s["$id"], Resource.from_contents(s)) for s in schemas.values()
    )
    validators = {
        name: jsonschema.Draft202012Validator(s, registry=registry)
        for name, s in schemas.items()
    }
    for name, s in schemas.items():
        jsonschema.Draft202012Validator.check_schema(s)
    return validators


def config(name):
    return str(ROOT / "docs" / "configs" / name)


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.validators = load_schemas()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def run_cli(self, *args):
        return subprocess.run([EXE, *args], capture_output=True, text=True, timeout=600)

    def report(self, *args, expect):
        """Runs a command, checks its exit code and validates the report."""
        proc = self.run_cli(*args)
        self.assertEqual(proc.returncode, expect, msg=proc.stderr)
        rep = json.loads(proc.stdout)
        self.validators["report.schema.json"].validate(rep)
        return rep

    # exit-code contract on the documented examples

    def test_check_gas_linear_contraction_exits_zero(self):
        rep = self.report("check-gas", "--system", config("lin2d.json"), "--samples", "200", expect=0)
        self.assertEqual(rep["verdict"], "pass")
        self.assertEqual(rep["results"]["verdict"], "supported")
        self.assertEqual(rep["results"]["converged"], 200)

    def test_obstruct_rotation_family_exits_two(self):
        rep = self.report("obstruct", "--family", config("rot.json"), expect=2)
        self.assertEqual(rep["results"]["verdict"], "OBSTRUCTED")
        self.assertEqual(rep["results"]["value"], 2)
        self.assertEqual(rep["results"]["reference"], 1)

    def test_degree_identity_exits_zero(self):
        rep = self.report("degree", "--system", config("id.json"), "--radius", "1", expect=0)
        self.assertEqual(rep["results"]["value"], 1)

    def test_falsified_and_inconclusive_exit_codes(self):
        rep = self.report("check-gas", "--system", config("center.json"), "--samples", "20",
                          "--horizon", "50", expect=2)
        self.assertEqual(rep["results"]["verdict"], "falsified")
        rep = self.report("check-gas", "--system", config("cubic.json"), "--samples", "20", expect=3)
        self.assertEqual(rep["results"]["verdict"], "inconclusive")

    def test_not_obstructed_and_not_attracting(self):
        rep = self.report("obstruct", "--family", config("antipodal_family.json"), expect=0)
        self.assertEqual(rep["results"]["verdict"], "NOT-OBSTRUCTED")
        self.assertIn("proves nothing", rep["results"]["note"])
        rep = self.report("family-check", "--family", config("remark_family.json"),
                          "--samples", "64", expect=2)
        self.assertEqual(rep["results"]["verdict"], "not-attracting")
        self.assertTrue(rep["results"]["pointwise_stable"])

    def test_usage_and_runtime_errors_exit_one(self):
        cases = [
            [],
            ["prove-everything"],
            ["check-gas"],
            ["check-gas", "--system", str(self.dir / "missing.json")],
            ["degree", "--system", config("id.json"), "--radius", "wide"],
            ["degree", "--system", config("id.json"), "--center", "0,x"],
            ["degree", "--system", config("id.json"), "--set", "radious=2"],
            ["obstruct", "--family", config("rot.json"), "--threads", "0"],
        ]
        for argv in cases:
            with self.subTest(argv=argv):
                proc = self.run_cli(*argv)
                self.assertEqual(proc.returncode, 1, msg=proc.stderr)
                self.assertEqual(proc.stdout.strip(), "")

    def test_config_errors_report_a_json_pointer(self):
        bad = self.dir / "bad.json"
        bad.write_text(json.dumps({"schema": 1, "dimension": 2, "field": ["-x1", "-x2 *"]}))
        proc = self.run_cli("check-gas", "--system", str(bad))
        self.assertEqual(proc.returncode, 1)
        self.assertIn("/system/field/1", proc.stderr)

        bad.write_text(json.dumps({"schema": 2, "dimension": 2, "field": ["-x1", "-x2"]}))
        proc = self.run_cli("degree", "--system", str(bad))
        self.assertEqual(proc.returncode, 1)
        self.assertIn("/system/schema", proc.stderr)

    def test_help_and_version_exit_zero(self):
        self.assertEqual(self.run_cli("--help").returncode, 0)
        proc = self.run_cli("--version")
        self.assertEqual(proc.returncode, 0)
        self.assertRegex(proc.stdout.strip(), r"^\d+\.\d+\.\d+$")

    # outputs

    def test_out_file_matches_stdout(self):
        out = self.dir / "deg.json"
        proc = self.run_cli("degree", "--system", config("neg3d.json"), "--out", str(out))
        self.assertEqual(proc.returncode, 0)
        self.assertEqual(proc.stdout, "")
        direct = self.run_cli("degree", "--system", config("neg3d.json")).stdout
        self.assertEqual(out.read_text(), direct)
        self.assertEqual(json.loads(direct)["results"]["value"], -1)

    def test_every_command_emits_a_valid_report(self):
        runs = [
            (["lyapunov", "--system", config("spiral.json"), "--samples", "200"], 0),
            (["homotopy", "--system", config("lin2d.json"), "--kind", "sontag", "--verify",
              "--samples", "100", "--t-points", "6"], 0),
            (["homotopy", "--from", config("lin2d.json"), "--to", config("spiral.json"),
              "--kind", "straight-line", "--verify", "--samples", "100"], 0),
            (["linearize", "--system", config("mixed.json"), "--check", "--samples", "50"], 0),
            (["morse", "--system", config("quartic_potential.json"), "--check"], 0),
            (["morse", "--system", config("nested_potential.json"), "--check"], 0),
            (["degree", "--system", config("saddle.json")], 0),
            (["check-gas", "--system", config("spiral.json"), "--samples", "50", "--certificate"], 0),
        ]
        for argv, code in runs:
            with self.subTest(argv=argv[:3]):
                self.report(*argv, expect=code)

    def test_csv_outputs(self):
        grid = self.dir / "grid.csv"
        self.report("lyapunov", "--system", config("lin2d.json"), "--samples", "100", "--grid", str(grid),
                    "--grid-n", "5", "--grid-lo", "-1,-1", "--grid-hi", "1,1", expect=0)
        rows = list(csv.reader(grid.read_text().splitlines()))
        self.assertEqual(rows[0], ["x1", "x2", "V", "dV"])
        self.assertEqual(len(rows), 26)
        for row in rows[1:]:
            x1, x2, v, dv = map(float, row)
            if x1 or x2:
                self.assertGreater(v, 0.0)
                self.assertLess(dv, 0.0)

        trace = self.dir / "trace.csv"
        self.report("homotopy", "--system", config("cubic.json"), "--kind", "sontag",
                    "--trace", str(trace), "--trace-points", "7", expect=0)
        rows = list(csv.reader(trace.read_text().splitlines()))
        self.assertEqual(rows[0][0], "t")
        self.assertGreater(len(rows), 7)

        pts = self.dir / "pts.csv"
        pts.write_text("x1,x2\n0.5,0\n0,-2\n")
        mapped = self.dir / "mapped.csv"
        rep = self.report("linearize", "--system", config("lin2d.json"), "--eval", str(pts),
                          "--csv", str(mapped), expect=0)
        self.assertEqual(len(rep["results"]["mapped"]), 2)
        rows = list(csv.reader(mapped.read_text().splitlines()))
        self.assertEqual(rows[0], ["x1", "x2", "h1", "h2"])
        # for F = -x the chart map is the identity up to the chart scaling
        for row in rows[1:]:
            x1, x2, h1, h2 = map(float, row)
            self.assertAlmostEqual(x1 * h2 - x2 * h1, 0.0, places=6)

    def test_reports_identical_across_runs_and_threads(self):
        cmds = [
            ["check-gas", "--system", config("mixed.json"), "--samples", "60", "--seed", "9"],
            ["family-check", "--family", config("remark_family.json"), "--samples", "40", "--seed", "3"],
            ["degree", "--system", config("neg3d.json"), "--resolution", "4"],
            ["linearize", "--system", config("spiral.json"), "--check", "--samples", "40", "--seed", "2"],
        ]
        for argv in cmds:
            with self.subTest(argv=argv[:3]):
                outs = []
                for threads in ("1", "8", "8"):
                    proc = self.run_cli(*argv, "--threads", threads)
                    self.assertIn(proc.returncode, (0, 2, 3), msg=proc.stderr)
                    outs.append(proc.stdout)
                self.assertEqual(outs[0], outs[1])
                self.assertEqual(outs[1], outs[2])

    # configs

    def test_doc_configs_validate_against_schemas(self):
        seen = 0
        for path in sorted((ROOT / "docs" / "configs").glob("*.json")):
            with self.subTest(config=path.name):
                doc = json.loads(path.read_text())
                schema = "family.schema.json" if "family" in doc else "system.schema.json"
                self.validators[schema].validate(doc)
                seen += 1
        self.assertGreaterEqual(seen, 8)

    def test_schema_rejects_field_and_potential_together(self):
        doc = {"schema": 1, "dimension": 1, "field": ["-x1"], "potential": "x1^2"}
        with self.assertRaises(jsonschema.ValidationError):
            self.validators["system.schema.json"].validate(doc)


if __name__ == "__main__":
    EXE = os.path.abspath(sys.argv[1])
    ROOT = Path(sys.argv[2]).resolve()
    unittest.main(argv=[sys.argv[0], "-v"])

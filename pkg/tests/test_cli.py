"""Command-line surface: reports, artifacts, exit codes, determinism."""

import json

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from polytreelab.cli import main
from polytreelab.cnf import bundled_formulas, write_dimacs_file
from polytreelab.distribution import (
    empirical_distribution,
    read_arity_sidecar,
    read_dataset_csv,
    read_distribution_json,
    write_distribution_json,
)
from polytreelab.generators import parity_fixture, random_polytree_instance
from polytreelab.reports import report_schema
from polytreelab.structure import (
    read_structure_dot,
    read_structure_json,
    score,
    write_structure_json,
)

SCHEMA = report_schema()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    for name in ("parity2", "parity3"):
        dist, generating = parity_fixture(name)
        write_distribution_json(dist, str(root / f"{name}.json"))
        write_structure_json(
            generating, list(dist.names), str(root / f"{name}_structure.json")
        )
    for name, formula in bundled_formulas():
        write_dimacs_file(formula, root / f"{name}.cnf")
    return root


def run(args, expect_exit=0):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    assert result.exit_code == expect_exit, result.output
    return result


def run_json(args, expect_exit=0):
    result = run(args, expect_exit)
    doc = json.loads(result.output)
    jsonschema.validate(instance=doc, schema=SCHEMA)
    return doc


class TestLearnBranching:
    def test_parity_is_invisible(self, workdir):
        doc = run_json(["learn-branching", "--dist", str(workdir / "parity2.json")])
        assert doc["kind"] == "learn-branching"
        assert doc["score"]["total_bits"] == pytest.approx(3.0, abs=1e-9)
        assert doc["structure"]["parents"] == [[], [], []]
        assert len(doc["edges"]) == 3
        assert all(abs(e["mi_bits"]) < 1e-9 for e in doc["edges"])

    def test_writes_json_and_dot_artifacts(self, workdir, tmp_path):
        json_out = tmp_path / "learned.json"
        run_json(
            [
                "learn-branching",
                "--dist", str(workdir / "parity2.json"),
                "--out", str(json_out),
            ]
        )
        structure, names = read_structure_json(str(json_out))
        assert names == ("X1", "X2", "X3")
        assert structure.encoding() == ((), (), ())
        dot_out = tmp_path / "learned.dot"
        run_json(
            [
                "learn-branching",
                "--dist", str(workdir / "parity2.json"),
                "--out", str(dot_out),
                "--format", "dot",
            ]
        )
        structure2, names2 = read_structure_dot(str(dot_out))
        assert names2 == names
        assert structure2 == structure

    def test_learns_from_dataset_csv(self, workdir, tmp_path):
        data = tmp_path / "parity2.csv"
        run_json(
            [
                "gen", "example",
                "--name", "parity2",
                "--format", "csv",
                "--out", str(data),
            ]
        )
        doc = run_json(["learn-branching", "--data", str(data)])
        assert doc["score"]["total_bits"] == pytest.approx(3.0, abs=1e-9)

    def test_requires_exactly_one_input(self, workdir, tmp_path):
        data = tmp_path / "unused.csv"
        doc = run_json(
            [
                "learn-branching",
                "--dist", str(workdir / "parity2.json"),
                "--data", str(data),
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"
        doc = run_json(["learn-branching"], expect_exit=1)
        assert doc["kind"] == "error"

    def test_missing_file_reports_structured_error(self, workdir):
        doc = run_json(
            ["learn-branching", "--dist", str(workdir / "absent.json")],
            expect_exit=1,
        )
        assert doc["kind"] == "error"
        assert doc["error"]["type"]


class TestScoreCommand:
    def test_scores_generating_structure(self, workdir):
        doc = run_json(
            [
                "score",
                "--dist", str(workdir / "parity2.json"),
                "--structure", str(workdir / "parity2_structure.json"),
            ]
        )
        assert doc["kind"] == "score"
        assert doc["score"]["total_bits"] == pytest.approx(2.0, abs=1e-9)
        per_node = {row["name"]: row for row in doc["score"]["per_node"]}
        assert per_node["X1"]["parents"] == ["X2", "X3"]
        assert per_node["X1"]["h_bits"] == pytest.approx(0.0, abs=1e-9)

    def test_structure_option_is_required(self, workdir):
        result = CliRunner().invoke(
            main, ["score", "--dist", str(workdir / "parity2.json")]
        )
        assert result.exit_code == 2

    def test_name_mismatch_is_an_error(self, workdir):
        doc = run_json(
            [
                "score",
                "--dist", str(workdir / "parity3.json"),
                "--structure", str(workdir / "parity2_structure.json"),
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"


class TestExactPolytreeAndRatio:
    def test_parity3_unbounded(self, workdir):
        doc = run_json(["exact-polytree", "--dist", str(workdir / "parity3.json")])
        assert doc["kind"] == "exact-polytree"
        assert doc["best_score_bits"] == pytest.approx(3.0, abs=1e-9)
        assert doc["branching_score_bits"] == pytest.approx(4.0, abs=1e-9)
        assert doc["ratio"] == pytest.approx(4.0 / 3.0, abs=1e-9)

    def test_k_one_matches_branching(self, workdir):
        doc = run_json(
            ["exact-polytree", "--dist", str(workdir / "parity3.json"), "--k", "1"]
        )
        assert doc["best_score_bits"] == pytest.approx(4.0, abs=1e-9)
        assert doc["ratio"] == pytest.approx(1.0, abs=1e-9)

    def test_ratio_command(self, workdir):
        doc = run_json(["ratio", "--dist", str(workdir / "parity3.json"), "--k", "3"])
        assert doc["kind"] == "ratio"
        assert doc["ratio"] == pytest.approx(4.0 / 3.0, abs=1e-9)
        assert doc["excess_bits"] == pytest.approx(1.0, abs=1e-9)

    def test_jobs_do_not_change_output(self, workdir):
        args = ["exact-polytree", "--dist", str(workdir / "parity3.json")]
        one = run(args + ["--jobs", "1"]).output
        two = run(args + ["--jobs", "2"]).output
        assert one == two

    def test_exact_cap_is_enforced(self, workdir):
        doc = run_json(
            [
                "exact-polytree",
                "--dist", str(workdir / "parity3.json"),
                "--exact-cap", "3",
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"
        assert doc["error"]["constraint"] == "exact_search_max_nodes"


class TestHeuristicPolytree:
    def test_runs_and_reports(self, workdir):
        doc = run_json(
            ["heuristic-polytree", "--dist", str(workdir / "parity3.json"), "--k", "2"]
        )
        assert doc["kind"] == "heuristic-polytree"
        assert doc["best_score_bits"] <= doc["branching_score_bits"] + 1e-9

    def test_accepts_seed_structure(self, workdir, tmp_path):
        seed_path = tmp_path / "seed.json"
        run_json(
            [
                "exact-polytree",
                "--dist", str(workdir / "parity3.json"),
                "--out", str(seed_path),
            ]
        )
        doc = run_json(
            [
                "heuristic-polytree",
                "--dist", str(workdir / "parity3.json"),
                "--k", "3",
                "--seed-structure", str(seed_path),
            ]
        )
        assert doc["best_score_bits"] == pytest.approx(3.0, abs=1e-9)


class TestVerifyBounds:
    def test_passes_on_parity(self, workdir):
        doc = run_json(["verify-bounds", "--dist", str(workdir / "parity3.json")])
        assert doc["kind"] == "verify-bounds"
        assert doc["passed"] is True
        names = {row["name"] for row in doc["bounds"]}
        assert "log_node_count_bound" in names
        assert "entropy_spread_bound" in names

    def test_negative_tolerance_exits_one(self, workdir):
        doc = run_json(
            [
                "verify-bounds",
                "--dist", str(workdir / "parity3.json"),
                "--tolerance", "-1",
            ],
            expect_exit=1,
        )
        assert doc["passed"] is False


class TestGenXorTree:
    def test_single_depth_artifacts(self, workdir, tmp_path):
        dist_out = tmp_path / "xor.json"
        structure_out = tmp_path / "xor_structure.json"
        doc = run_json(
            [
                "gen", "xor-tree",
                "--depth", "2",
                "--eps", "0.3",
                "--out", str(dist_out),
                "--structure-out", str(structure_out),
            ]
        )
        assert doc["kind"] == "gen"
        assert doc["num_variables"] == 7
        assert doc["generating_score_bits"] == pytest.approx(1.2, abs=1e-9)
        dist = read_distribution_json(str(dist_out))
        structure, names = read_structure_json(str(structure_out))
        assert dist.n == 7
        assert score(dist, structure).total_bits == pytest.approx(1.2, abs=1e-9)
        assert names == dist.names

    def test_sweep_writes_growth_curve(self, workdir, tmp_path):
        curve = tmp_path / "curve.csv"
        doc = run_json(
            [
                "gen", "xor-tree",
                "--eps", "0.3",
                "--max-depth", "3",
                "--format", "csv",
                "--out", str(curve),
            ]
        )
        assert [row["depth"] for row in doc["sweep"]] == [1, 2, 3]
        ratios = [row["ratio"] for row in doc["sweep"]]
        assert ratios[0] < ratios[1] < ratios[2]
        assert ratios[2] - ratios[0] >= 0.2
        lines = curve.read_text().splitlines()
        assert lines[0] == "depth,branching_bits,polytree_bits,ratio"
        assert len(lines) == 4
        assert lines[1].startswith("1,")

    def test_requires_depth_without_sweep(self, workdir):
        doc = run_json(["gen", "xor-tree", "--eps", "0.3"], expect_exit=1)
        assert doc["kind"] == "error"

    def test_depth_beyond_state_cap(self, workdir):
        doc = run_json(
            ["gen", "xor-tree", "--depth", "4", "--eps", "0.3"], expect_exit=1
        )
        assert doc["error"]["constraint"] == "state_cap"


class TestGenExample:
    def test_csv_support_reproduces_fixture(self, workdir, tmp_path):
        data = tmp_path / "parity3.csv"
        doc = run_json(
            [
                "gen", "example",
                "--name", "parity3",
                "--format", "csv",
                "--out", str(data),
            ]
        )
        assert doc["generating_score_bits"] == pytest.approx(3.0, abs=1e-9)
        dataset = read_dataset_csv(str(data))
        assert dataset.rows.shape == (8, 4)
        empirical = empirical_distribution(dataset)
        exact, _ = parity_fixture("parity3")
        np.testing.assert_allclose(empirical.table, exact.table, atol=1e-12)

    def test_unknown_name_is_usage_error(self, workdir):
        result = CliRunner().invoke(main, ["gen", "example", "--name", "parity9"])
        assert result.exit_code == 2


class TestGenRandom:
    def test_artifacts_round_trip(self, workdir, tmp_path):
        dist_out = tmp_path / "rand.json"
        structure_out = tmp_path / "rand_structure.json"
        doc = run_json(
            [
                "gen", "random",
                "--n", "5",
                "--k", "2",
                "--seed", "3",
                "--out", str(dist_out),
                "--structure-out", str(structure_out),
            ]
        )
        dist = read_distribution_json(str(dist_out))
        structure, _ = read_structure_json(str(structure_out))
        assert score(dist, structure).total_bits == pytest.approx(
            doc["generating_score_bits"], abs=1e-9
        )
        expected, generating = random_polytree_instance(5, 2, 2, seed=3)
        np.testing.assert_allclose(dist.table, expected.table, atol=1e-12)
        assert structure == generating

    def test_reruns_are_byte_identical(self, workdir):
        args = ["gen", "random", "--n", "4", "--seed", "9"]
        assert run(args).output == run(args).output


class TestGenCnf:
    def test_dataset_and_sidecar(self, workdir, tmp_path):
        data = tmp_path / "gadget.csv"
        sidecar = tmp_path / "gadget_arities.json"
        doc = run_json(
            [
                "gen", "cnf", str(workdir / "two_variable.cnf"),
                "--samples", "50",
                "--seed", "1",
                "--out", str(data),
                "--arities-out", str(sidecar),
            ]
        )
        assert doc["kind"] == "gen"
        assert doc["family"] == "cnf"
        assert doc["num_variables"] == 2
        assert doc["num_clauses"] == 3
        assert len(doc["layer_entropy_bits"]) == 3
        names = [node["name"] for node in doc["nodes"]]
        assert names == ["C1", "C2", "C3", "R1", "X1", "R2", "X2", "L1"]
        arities = read_arity_sidecar(str(sidecar))
        assert set(arities) == set(names)
        dataset = read_dataset_csv(str(data), arities=arities)
        assert dataset.rows.shape == (50, len(names))

    def test_sampling_is_deterministic(self, workdir, tmp_path):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        base = ["gen", "cnf", str(workdir / "single_variable.cnf"), "--samples", "20"]
        run_json(base + ["--seed", "5", "--out", str(out_a)])
        run_json(base + ["--seed", "5", "--out", str(out_b)])
        assert out_a.read_text() == out_b.read_text()

    def test_blocker_knobs_require_flag(self, workdir):
        doc = run_json(
            [
                "gen", "cnf", str(workdir / "single_variable.cnf"),
                "--blocker-copies", "7",
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"


class TestVerifyGadget:
    def test_corpus_file_passes(self, workdir):
        doc = run_json(["verify-gadget", str(workdir / "two_variable.cnf")])
        assert doc["kind"] == "verify-gadget"
        assert doc["passed"] is True
        assert doc["satisfied_count"] == 3
        assert doc["structure_is_polytree"] is True
        assert doc["structure_max_indegree"] <= 2

    def test_blockers_flag(self, workdir):
        doc = run_json(
            ["verify-gadget", str(workdir / "single_variable.cnf"), "--blockers"]
        )
        assert doc["passed"] is True
        assert any(row["name"] == "residual[R1|A1,B1]" for row in doc["rows"])

    def test_explicit_assignment(self, workdir):
        doc = run_json(
            [
                "verify-gadget", str(workdir / "single_variable.cnf"),
                "--assignment", "0",
            ]
        )
        assert doc["assignment"] == [0]
        assert doc["satisfied_count"] == 1

    def test_malformed_assignment(self, workdir):
        doc = run_json(
            [
                "verify-gadget", str(workdir / "single_variable.cnf"),
                "--assignment", "maybe",
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"

    def test_wrong_length_assignment(self, workdir):
        doc = run_json(
            [
                "verify-gadget", str(workdir / "single_variable.cnf"),
                "--assignment", "0,1",
            ],
            expect_exit=1,
        )
        assert doc["kind"] == "error"

    def test_negative_tolerance_exits_one(self, workdir):
        doc = run_json(
            [
                "verify-gadget", str(workdir / "single_variable.cnf"),
                "--tolerance", "-1",
            ],
            expect_exit=1,
        )
        assert doc["passed"] is False


class TestDeterminismAndSchema:
    def test_reports_are_byte_identical_across_reruns(self, workdir):
        commands = [
            ["learn-branching", "--dist", str(workdir / "parity2.json")],
            ["exact-polytree", "--dist", str(workdir / "parity3.json")],
            ["ratio", "--dist", str(workdir / "parity3.json")],
            ["verify-bounds", "--dist", str(workdir / "parity2.json")],
            ["verify-gadget", str(workdir / "single_variable.cnf")],
        ]
        for args in commands:
            assert run(args).output == run(args).output

    def test_missing_subcommand_is_usage_error(self):
        result = CliRunner().invoke(main, ["no-such-command"])
        assert result.exit_code == 2

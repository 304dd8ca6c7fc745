import json

import numpy as np
import pytest

from calibrank.bvn import read_policy
from calibrank.cli import main

from _oracles import random_doubly_stochastic

PROBLEM = {
    "scores": [4.0, 3.0, 2.0, 1.0],
    "categories": [[1, 0], [0, 1], [1, 0], [0, 1]],
    "target": [0.5, 0.5],
    "lambda": 0.5,
    "k": 2,
    "position_weight_kind": "log",
}


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(PROBLEM))
    return path


class TestSweepCommand:
    def test_writes_csv(self, tmp_path, capsys):
        config = tmp_path / "sweep.cfg"
        config.write_text(
            "category_source = synthetic\nsynthetic_users = 3\nn = 10\nk = 4\n"
            "synthetic_categories = 3\nlambda_grid = 0,1\nseed = 1\n"
        )
        out = tmp_path / "curve.csv"
        code = main(["sweep", "--config", str(config), "--output", str(out)])
        assert code == 0
        assert out.exists()
        assert "wrote 2 rows" in capsys.readouterr().out
        header = out.read_text().splitlines()[0]
        assert header.startswith("lambda,mean_relevance")

    def test_stdout_when_no_output(self, capsys):
        code = main(
            [
                "sweep",
                "--category-source",
                "synthetic",
                "--synthetic-users",
                "2",
                "--n",
                "8",
                "--k",
                "3",
                "--lambda-grid",
                "0.5",
                "--seed",
                "2",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2

    def test_bad_config_is_an_error(self, tmp_path, capsys):
        config = tmp_path / "sweep.cfg"
        config.write_text("method = gradient_descent\n")
        assert main(["sweep", "--config", str(config)]) == 1
        assert "error:" in capsys.readouterr().err


class TestCalibrateCommand:
    def test_prints_ranking_and_writes_policy(self, problem_file, tmp_path, capsys):
        policy_path = tmp_path / "policy.txt"
        code = main(
            [
                "calibrate",
                "--problem",
                str(problem_file),
                "--lam",
                "0.0",
                "--seed",
                "7",
                "--policy-out",
                str(policy_path),
            ]
        )
        assert code == 0
        out_lines = capsys.readouterr().out.splitlines()
        assert len(out_lines) == 2  # one line per slot
        assert out_lines[0] == "1 0"  # top score wins slot 1 at lam = 0
        assert out_lines[1] == "2 1"
        policy = read_policy(policy_path)
        assert len(policy) == 1

    def test_invalid_problem_fails(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        payload = dict(PROBLEM)
        payload["lambda"] = 3.0
        path.write_text(json.dumps(payload))
        assert main(["calibrate", "--problem", str(path)]) == 1
        assert "lambda" in capsys.readouterr().err


class TestDecomposeCommand:
    def test_square_matrix_file(self, tmp_path, capsys):
        matrix = random_doubly_stochastic(np.random.default_rng(5), 6)
        matrix_path = tmp_path / "matrix.txt"
        np.savetxt(matrix_path, matrix)
        out_path = tmp_path / "policy.txt"
        assert main(["decompose", "--matrix", str(matrix_path), "--output", str(out_path)]) == 0
        policy = read_policy(out_path)
        recon = np.zeros_like(matrix)
        for theta, perm in policy.components:
            recon[perm.assignment, np.arange(6)] += theta
        assert np.abs(recon - matrix).max() < 1e-6

    def test_partial_matrix_is_augmented(self, tmp_path):
        matrix = random_doubly_stochastic(np.random.default_rng(6), 5)[:, :3]
        matrix_path = tmp_path / "partial.txt"
        np.savetxt(matrix_path, matrix)
        out_path = tmp_path / "policy.txt"
        assert main(["decompose", "--matrix", str(matrix_path), "--output", str(out_path)]) == 0
        policy = read_policy(out_path)
        assert len(policy.components[0][1]) == 5


class TestValidateCommand:
    def test_clean_problem(self, problem_file, capsys):
        assert main(["validate", "--problem", str(problem_file)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_violations_reported_with_exit_one(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        payload = dict(PROBLEM)
        payload["target"] = [0.9, 0.0]
        path.write_text(json.dumps(payload))
        assert main(["validate", "--problem", str(path)]) == 1

    def test_data_files(self, tmp_path, capsys):
        inter = tmp_path / "inter.csv"
        inter.write_text("user,item,rating\n1,1,4\n1,2,4\n1,3,2\n1,4,4\n1,5,1\n")
        assert main(["validate", "--interactions", str(inter)]) == 0
        broken = tmp_path / "broken.csv"
        broken.write_text("user,item,rating\n1,x,4\n")
        assert main(["validate", "--interactions", str(broken)]) == 1


class TestBenchCommand:
    def test_smoke(self, capsys):
        code = main(
            [
                "bench",
                "--category-source",
                "synthetic",
                "--synthetic-users",
                "2",
                "--n",
                "10",
                "--k",
                "4",
                "--lambda-grid",
                "0.5",
                "--bench-methods",
                "excalibr_reduced,score_sort",
                "--seed",
                "3",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "excalibr_reduced" in out and "score_sort" in out

import json

import pytest

from dirreg_experiments.cli import (
    EXIT_INPUT,
    EXIT_NEGATIVE,
    EXIT_NO_COUNTEREXAMPLE,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    NO_COUNTEREXAMPLE,
    main,
)
from dirreg_experiments.documents import MODE_ENV


def lambda_json(xis, etas, k):
    return {
        "schema": 1,
        "n": len(xis[0]),
        "m": len(etas[0]),
        "k": k,
        "points": [{"xi": list(xi), "eta": list(eta)} for xi, eta in zip(xis, etas)],
    }


@pytest.fixture(autouse=True)
def no_mode_override(monkeypatch):
    monkeypatch.delenv(MODE_ENV, raising=False)


@pytest.fixture
def coordinate_file(write_json):
    document = lambda_json([(1, 0), (0, 1)], [(1,), (1,)], 1)
    return str(write_json("coordinate.json", document))


@pytest.fixture
def collinear_file(write_json):
    document = lambda_json([(1, 0), (2, 0)], [(1,), (1,)], 1)
    return str(write_json("collinear.json", document))


@pytest.fixture
def xy_file(write_json):
    xis = [(1, 0), (0, 1), (1, 1)]
    return str(write_json("xy.json", lambda_json(xis, [(1,)] * 3, 2)))


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    report = json.loads(captured.out) if captured.out else None
    return code, report, captured.err


def test_coordinate_pairs_are_determining(capsys, coordinate_file):
    code, report, _ = run(capsys, "analyze", "--lambda", coordinate_file)
    assert code == EXIT_OK
    result = report["result"]
    assert result["verdict"] == "determining"
    assert result["stability_B"] == "1/1"
    assert result["selection"] == [0, 1]
    assert result["determinant"]["value"] in ("1/1", "-1/1")
    assert report["command"] == "analyze"
    assert report["input_digest"].startswith("sha256:")
    assert report["input"]["points"][0]["xi"] == ["1/1", "0/1"]


def test_collinear_set_gets_a_certificate(capsys, collinear_file):
    code, report, _ = run(capsys, "analyze", "--lambda", collinear_file)
    assert code == EXIT_NEGATIVE
    result = report["result"]
    assert result["verdict"] == "not_determining"
    assert result["certificate"]["coefficients"] == {"0,1|1": "1/1"}
    assert result["residual"] == "0/1"


def test_float_mode_from_environment(capsys, monkeypatch, coordinate_file):
    monkeypatch.setenv(MODE_ENV, "float")
    code, report, _ = run(capsys, "analyze", "--lambda", coordinate_file)
    assert code == EXIT_OK
    assert report["result"]["stability_B"] == pytest.approx(1.0)
    assert "value" not in report["result"]["determinant"]


def test_reports_are_reproducible(tmp_path, xy_file):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for out in (first, second):
        assert main(["analyze", "--lambda", xy_file, "--out", str(out)]) == EXIT_OK
    a = json.loads(first.read_text(encoding="utf-8"))
    b = json.loads(second.read_text(encoding="utf-8"))
    assert a["arguments"].pop("out") != b["arguments"].pop("out")
    assert a == b
    assert first.read_bytes().endswith(b"}\n")


def test_identical_invocations_give_identical_bytes(tmp_path, xy_file):
    out = tmp_path / "report.json"
    main(["analyze", "--lambda", xy_file, "--out", str(out)])
    before = out.read_bytes()
    main(["analyze", "--lambda", xy_file, "--out", str(out)])
    assert out.read_bytes() == before


def test_maxvol_selection(capsys, xy_file):
    code, report, _ = run(capsys, "analyze", "--lambda", xy_file, "--select", "maxvol")
    assert code == EXIT_OK
    assert sorted(report["result"]["selection"]) == [0, 1, 2]


def test_malformed_input_exits_with_two(capsys, write_json):
    path = write_json(
        "bad.json", {"n": 2, "m": 1, "k": 1, "points": [{"xi": [1], "eta": [1]}]}
    )
    code, report, err = run(capsys, "analyze", "--lambda", str(path))
    assert code == EXIT_INPUT
    assert report is None
    assert "points[0].xi" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze"],
        ["analyze", "--lambda", "x.json", "--select", "random"],
        ["reconstruct", "--lambda", "x.json"],
        ["weights", "--family", "gevrey", "--values", "w.json"],
        ["--mode", "decimal", "analyze", "--lambda", "x.json"],
        [],
    ],
)
def test_usage_errors_exit_with_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "dirreg" in capsys.readouterr().out


def test_reconstruct_from_data(capsys, write_json, xy_file):
    data = write_json("data.json", {"values": {"0": 0, "1": 0, "2": "2/1"}})
    code, report, _ = run(capsys, "reconstruct", "--lambda", xy_file, "--data", str(data))
    assert code == EXIT_OK
    result = report["result"]
    assert result["partials"] == {"0,2|1": "0/1", "1,1|1": "1/1", "2,0|1": "0/1"}
    assert result["error_bound"] == "exact"
    assert result["point"] == ["0/1", "0/1"]


def test_reconstruct_with_missing_values(capsys, write_json, xy_file):
    data = write_json("data.json", {"values": {"0": 0, "2": 2}})
    code, _, err = run(capsys, "reconstruct", "--lambda", xy_file, "--data", str(data))
    assert code == EXIT_INPUT
    assert "[1]" in err


def test_reconstruct_polynomial(capsys, xy_file):
    code, report, _ = run(
        capsys,
        "reconstruct",
        "--lambda",
        xy_file,
        "--poly",
        "x1*x2 - 1/2*x1^2",
        "--point",
        "1,2",
    )
    assert code == EXIT_OK
    result = report["result"]
    assert result["partials"] == {"0,2|1": "0/1", "1,1|1": "1/1", "2,0|1": "-1/1"}
    assert result["error_bound"] == "exact"


def test_reconstruct_polynomial_by_differencing(capsys, xy_file):
    code, report, _ = run(
        capsys,
        "reconstruct",
        "--lambda",
        xy_file,
        "--poly",
        "x1*x2",
        "--point",
        "1/3,-1",
        "--h",
        "1/8",
    )
    assert code == EXIT_OK
    assert report["result"]["partials"]["1,1|1"] == "1/1"


def test_reconstruct_polynomial_errors(capsys, xy_file):
    code, _, err = run(
        capsys, "reconstruct", "--lambda", xy_file, "--poly", "x1 + $", "--point", "0,0"
    )
    assert code == EXIT_INPUT
    assert "offset 5" in err
    code, _, _ = run(capsys, "reconstruct", "--lambda", xy_file, "--poly", "x1*x2")
    assert code == EXIT_USAGE
    code, _, _ = run(
        capsys, "reconstruct", "--lambda", xy_file, "--poly", "x1; x2", "--point", "0,0"
    )
    assert code == EXIT_INPUT


def test_reconstruct_on_a_negative_verdict(capsys, write_json, collinear_file):
    data = write_json("data.json", {"values": {"0": 1, "1": 2}})
    code, report, _ = run(
        capsys, "reconstruct", "--lambda", collinear_file, "--data", str(data)
    )
    assert code == EXIT_NEGATIVE
    assert "partials" not in report["result"]


def test_no_counterexample_for_determining_sets(capsys, tmp_path, coordinate_file):
    report_path = tmp_path / "analyze.json"
    main(["analyze", "--lambda", coordinate_file, "--out", str(report_path)])
    code, report, err = run(capsys, "counterexample", "--from-report", str(report_path))
    assert code == EXIT_NO_COUNTEREXAMPLE
    assert report is None
    assert NO_COUNTEREXAMPLE in err


def test_order_k_counterexample_from_report(capsys, tmp_path, collinear_file):
    report_path = tmp_path / "analyze.json"
    main(["analyze", "--lambda", collinear_file, "--out", str(report_path)])
    code, report, _ = run(capsys, "counterexample", "--from-report", str(report_path))
    assert code == EXIT_OK
    result = report["result"]
    assert result["kind"] == "order_k"
    assert result["blowup"]["passed"] and result["tameness"]["passed"]
    assert len(result["blowup"]["table"]) == 10


def test_order_k_counterexample_from_phi(capsys, write_json):
    phi = write_json(
        "phi.json", {"n": 2, "m": 1, "k": 1, "coefficients": {"0,1|1": "1/1"}}
    )
    code, report, err = run(
        capsys, "counterexample", "--phi", str(phi), "--radii", "1e-3,1e-6"
    )
    assert code == EXIT_OK
    assert "tameness" not in report["result"]
    assert "tameness not checked" in err


def test_rank_one_counterexample_from_report(capsys, tmp_path, collinear_file):
    report_path = tmp_path / "rank1.json"
    argv = ["rank1", "--lambda", collinear_file, "--out", str(report_path)]
    assert main(argv) == EXIT_NEGATIVE
    witness = json.loads(report_path.read_text(encoding="utf-8"))["result"]["witness"]
    assert witness["v"] == ["1/1"]
    code, report, _ = run(
        capsys, "counterexample", "--from-report", str(report_path), "--profile", "abs"
    )
    assert code == EXIT_OK
    result = report["result"]
    assert result["kind"] == "rank_one"
    assert result["directional_vanishing"] and result["non_convergent"]


def test_rank_one_witness_needs_the_direction_set(capsys, write_json):
    uv = write_json("uv.json", {"u": [0, 1], "v": [1]})
    code, _, _ = run(capsys, "counterexample", "--uv", str(uv))
    assert code == EXIT_USAGE


def test_rank_one_epsilon(capsys, write_json):
    xis = [(1, 0), (1, 0), (0, 1), (0, 1)]
    etas = [(1, 0), (0, 1), (1, 0), (0, 1)]
    path = write_json("pairs.json", lambda_json(xis, etas, 1))
    code, report, _ = run(
        capsys, "rank1", "--lambda", str(path), "--epsilon-l", "1", "--grid", "16"
    )
    assert code == EXIT_OK
    result = report["result"]
    assert result["verdict"] == "determining1"
    assert result["minimal_subset"] == [0, 1, 2, 3]
    assert 0.98 <= result["epsilon"]["value"] <= 1.02


def test_weights(capsys, write_json):
    code, report, _ = run(
        capsys, "weights", "--family", "gevrey", "--nu", "2", "--K", "50"
    )
    assert code == EXIT_OK
    assert report["result"]["C"] == pytest.approx(4.0)
    ones = write_json("ones.json", {"values": [1] * 11})
    code, report, _ = run(capsys, "weights", "--values", str(ones))
    assert code == EXIT_NEGATIVE
    assert report["result"]["conditions"]["lower_bound"]["first_failure"] == 2


def test_undersized_set_is_not_determining(capsys, write_json):
    path = write_json("small.json", lambda_json([(1, 0), (0, 1)], [(1,), (1,)], 2))
    code, report, _ = run(capsys, "analyze", "--lambda", str(path))
    assert code == EXIT_NEGATIVE
    assert report["result"]["size"] < report["result"]["dimension"]


def test_witness_file_with_weierstrass_profile(capsys, write_json, collinear_file):
    profile = {"name": "weierstrass"}
    uv = write_json("uv.json", {"u": [0, 1], "v": [1], "profile": profile})
    code, report, _ = run(
        capsys, "counterexample", "--uv", str(uv), "--lambda", collinear_file
    )
    assert code == EXIT_OK
    assert report["result"]["directional_vanishing"]
    assert report["result"]["profile"] == {"name": "weierstrass"}


def test_rank1_minimal_subset_drops_duplicates(capsys, write_json):
    xis = [(1, 0), (0, 1), (1, 0), (0, 1)]
    etas = [(1,), (1,), (1,), (1,)]
    path = write_json("dup.json", lambda_json(xis, etas, 1))
    code, report, _ = run(capsys, "rank1", "--lambda", str(path))
    assert code == EXIT_OK
    assert report["result"]["minimal_subset"] == [2, 3]


def test_factorial_weights_pass_at_equality(capsys):
    code, report, _ = run(capsys, "weights", "--family", "factorial")
    assert code == EXIT_OK
    assert report["result"]["K"] == 50
    assert report["result"]["conditions"]["lower_bound"]["passed"]


def test_witness_file_with_custom_profile(capsys, write_json, collinear_file):
    profile = {"name": "custom", "knots": [[-1, 1], [0, 0], [1, 2]]}
    uv = write_json("uv.json", {"u": [0, 1], "v": [1], "profile": profile})
    code, report, _ = run(
        capsys,
        "counterexample",
        "--uv",
        str(uv),
        "--lambda",
        collinear_file,
        "--profile",
        "custom",
    )
    assert code == EXIT_OK
    assert report["result"]["profile"]["name"] == "custom"
    assert report["result"]["directional_vanishing"]


def test_custom_profile_needs_knots(capsys, write_json, tmp_path, collinear_file):
    report_path = tmp_path / "rank1.json"
    argv = ["rank1", "--lambda", collinear_file, "--out", str(report_path)]
    assert main(argv) == EXIT_NEGATIVE
    code, _, err = run(
        capsys, "counterexample", "--from-report", str(report_path), "--profile", "custom"
    )
    assert code == EXIT_USAGE
    assert "custom" in err
    uv = write_json("uv.json", {"u": [0, 1], "v": [1]})
    code, _, _ = run(
        capsys,
        "counterexample",
        "--uv",
        str(uv),
        "--lambda",
        collinear_file,
        "--profile",
        "custom",
    )
    assert code == EXIT_USAGE


def test_numeric_failure_has_its_own_exit_code(capsys, monkeypatch, xy_file):
    def failing(lam):
        raise ArithmeticError("elimination broke down")

    monkeypatch.setattr("dirreg_experiments.cli.is_determining", failing)
    code, report, err = run(capsys, "analyze", "--lambda", xy_file)
    assert code == EXIT_NUMERIC
    assert report is None
    assert "numeric failure: elimination broke down" in err

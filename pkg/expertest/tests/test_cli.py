from typing import Iterator
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
import json
import shutil
import tempfile
import pytest
from expertest.cli import cli
from expertest.config import load_config
from expertest.scenarios import MANIFEST_NAME, run_scenario
from expertest.util import NonConvergence

CONFIGS = Path(__file__).parent / "configs"


@contextmanager
def make_tempdir() -> Iterator[Path]:
    """Run a block in a temp directory and remove it afterwards."""
    d = Path(tempfile.mkdtemp())
    yield d
    shutil.rmtree(str(d))


def run_golden(scenario: str, out: Path, **overrides):
    config = load_config(CONFIGS / f"{scenario}.yml", {"out": str(out), **overrides})
    manifest = run_scenario(config)
    data = json.loads((out / f"{scenario}.json").read_text(encoding="utf8"))
    return manifest, data


@pytest.mark.parametrize(
    "scenario", ["merge", "example1", "bdtest", "partition", "manipulate", "game"]
)
def test_run_scenario_writes_artifacts(scenario):
    with make_tempdir() as d:
        manifest, _ = run_golden(scenario, d)
        assert (d / f"{scenario}.json").exists()
        assert (d / f"{scenario}.csv").exists()
        stored = json.loads((d / MANIFEST_NAME).read_text(encoding="utf8"))
        assert stored["scenario"] == scenario
        assert stored["artifacts"] == manifest.artifacts
        assert stored["config"]["scenario"] == scenario
        assert stored["mode"] == "rational"
        assert not list(d.glob(".*.tmp"))


def test_run_example1():
    with make_tempdir() as d:
        manifest, data = run_golden("example1", d)
        assert [p["gap"] for p in data["points"]] == ["1/2"] * 9
        assert all(p["agrees"] for p in data["points"])
        rows = (d / "example1.csv").read_text(encoding="utf8").splitlines()
        assert rows[0] == "t,history,gap,surrogate_prob,p_inf_prob"
        assert rows[1] == "0,,1/2,1,1"
        assert "1/2" in manifest.summary


def test_run_example1_float_mode():
    with make_tempdir() as d:
        _, data = run_golden("example1", d, mode="float")
        assert all(p["gap"] == pytest.approx(0.5) for p in data["points"])


def test_run_bdtest():
    with make_tempdir() as d:
        _, data = run_golden("bdtest", d)
        times = {o["label"]: o["rejection_time"] for o in data["opinions"]}
        assert times == {"fair": 5, "biased": 11}
        assert all(o["controlled"] for o in data["opinions"])
        assert data["witness"] == {"cylinder": "0" * 11, "pass_prob": "0"}


MIXED_CORPUS = "\n".join(
    ["scenario: bdtest", "opinions:"]
    + [f"  b{k}: {{kind: bernoulli, p: 0.{k}}}" for k in range(1, 10)]
    + [
        '  sticky: {kind: markov, initial: ["1/2", "1/2"], '
        'transition: [["3/4", "1/4"], ["1/3", "2/3"]]}',
        "  mix:",
        "    kind: mixture",
        "    components:",
        '      - {weight: "1/2", opinion: {kind: bernoulli, p: "1/3"}}',
        '      - {weight: "1/2", opinion: {kind: bernoulli, p: "2/3"}}',
        'bdtest: {epsilon: "1/20", reference: "(01)"}',
    ]
)


def test_run_bdtest_mixed_corpus():
    with make_tempdir() as d:
        config_path = d / "bdtest.yml"
        config_path.write_text(MIXED_CORPUS + "\n", encoding="utf8")
        run_scenario(load_config(config_path, {"out": str(d / "out")}))
        data = json.loads((d / "out" / "bdtest.json").read_text(encoding="utf8"))
        assert len(data["opinions"]) == 11
        assert all(Fraction(o["type1_error"]) < Fraction(1, 20) for o in data["opinions"])
        assert all(o["controlled"] for o in data["opinions"])
        cylinder = data["witness"]["cylinder"]
        assert cylinder == ("01" * len(cylinder))[: len(cylinder)]
        assert data["witness"]["pass_prob"] == "0"


def test_run_partition():
    with make_tempdir() as d:
        manifest, data = run_golden("partition", d)
        assert len(data["partitions"]) == 4
        assert all(p["total"] == "1" for p in data["partitions"])
        assert manifest.summary.startswith("fair (epsilon=1/4)")


def test_run_merge():
    with make_tempdir() as d:
        _, data = run_golden("merge", d)
        assert data["p"] == "P"
        assert len(data["curve"]["points"]) == 41
        assert data["abs_continuity"]["violations"] == []
        assert data["bd_property"]["consistent"] is True


def test_run_manipulate():
    with make_tempdir() as d:
        manifest, data = run_golden("manipulate", d)
        assert data["certified"] is True
        assert data["horizon"] == 4
        rows = (d / "manipulate.csv").read_text(encoding="utf8").splitlines()
        assert rows[0] == "history,pass_prob"
        assert len(rows) == 17
        assert "certified True" in manifest.summary


def test_run_game():
    with make_tempdir() as d:
        _, data = run_golden("game", d)
        assert data["solution"]["value"] == pytest.approx(0.5, abs=1e-9)
        assert (d / "game.txt").read_text(encoding="utf8") == "1.0 0.0\n0.0 1.0\n"


@pytest.mark.parametrize("scenario", ["merge", "manipulate", "partition"])
def test_reruns_are_identical(scenario):
    with make_tempdir() as d:
        run_golden(scenario, d / "first")
        run_golden(scenario, d / "second")
        for suffix in ("json", "csv"):
            first = (d / "first" / f"{scenario}.{suffix}").read_bytes()
            second = (d / "second" / f"{scenario}.{suffix}").read_bytes()
            assert first == second


def test_uncertified_run_keeps_diagnostics():
    with make_tempdir() as d:
        config_path = d / "manipulate.yml"
        config_path.write_text(
            "scenario: manipulate\nmanipulate: {horizon: 4, max_iters: 1}\n", encoding="utf8"
        )
        config = load_config(config_path, {"out": str(d / "out")})
        with pytest.raises(NonConvergence):
            run_scenario(config)
        assert (d / "out" / "manipulate.json").exists()
        assert not (d / "out" / MANIFEST_NAME).exists()


def test_cli_game(capsys):
    with make_tempdir() as d:
        cli.run(["", "game", "--config", str(CONFIGS / "game.yml"), "--out", str(d)])
        assert (d / MANIFEST_NAME).exists()
        captured = capsys.readouterr()
        assert "Game value 0.5" in captured.out


def test_cli_matrix_file(capsys):
    with make_tempdir() as d:
        (d / "pennies.txt").write_text("# pennies\n1 0\n0 1\n", encoding="utf8")
        config_path = d / "game.yml"
        config_path.write_text("game: {matrix_file: pennies.txt}\n", encoding="utf8")
        cli.run(["", "game", "-c", str(config_path), "-o", str(d / "out"), "--quiet"])
        data = json.loads((d / "out" / "game.json").read_text(encoding="utf8"))
        assert data["solution"]["value"] == pytest.approx(0.5, abs=1e-9)
        assert capsys.readouterr().out == ""


def test_cli_mode_override():
    with make_tempdir() as d:
        config = str(CONFIGS / "example1.yml")
        cli.run(["", "example1", "--config", config, "--out", str(d), "--mode", "float", "-q"])
        manifest = json.loads((d / MANIFEST_NAME).read_text(encoding="utf8"))
        assert manifest["mode"] == "float"


@pytest.mark.parametrize(
    "command,config_text,code",
    [
        ("game", None, 3),
        ("game", "scenario: merge\n", 3),
        ("partition", "opinions: {unit: {kind: bernoulli, p: 0}}\npartition: {max_depth: 5}\n", 12),
        ("manipulate", "manipulate: {horizon: 3, max_iters: 1}\n", 13),
        ("bdtest", "opinions: {a: {kind: bernoulli, p: 0.5}}\nbdtest: {reference: '(0)', max_depth: 3}\n", 12),
        ("bdtest", "opinions: {a: {kind: bernoulli, p: 0.5}}\nbdtest: {corpus: [a, a]}\n", 3),
    ],
)
def test_cli_exit_codes(command, config_text, code, capsys):
    with make_tempdir() as d:
        args = ["", command, "--out", str(d / "out")]
        if config_text is not None:
            config_path = d / "config.yml"
            config_path.write_text(config_text, encoding="utf8")
            args.extend(["--config", str(config_path)])
        with pytest.raises(SystemExit) as excinfo:
            cli.run(args)
        assert excinfo.value.code == code
        assert "Error: " in capsys.readouterr().err

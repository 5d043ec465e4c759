"""Run one configured scenario and write its artifacts.

Every scenario writes <scenario>.json and <scenario>.csv into the output
directory, then manifest.json once everything else is on disk.
"""
from typing import Any, Callable, Dict, List
from dataclasses import dataclass, field
from pathlib import Path
import csv
import io
import json
import logging
import time

import numpy as np

from .about import __version__
from .config import ScenarioConfig
from .game import MatrixGame, solve_matrix_game
from .manipulation import Strategy, double_oracle_manipulate, pass_prob
from .manipulation import verify_nonmanipulable
from .measures import BINARY, ReferencePath, cylinder_prob, make_example1_surrogate
from .merging import CurveMethod, abs_continuity_report, bd_property_report
from .merging import example1_gap, merging_curve
from .testing import build_bd_test, empty_test, epsilon_cylinder_partition
from .testing import rejection_time, tail_rejection_test, type1_error
from .util import ConfigInvalid, NonConvergence, NumberMode
from .util import format_history, format_number, to_json_number

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class ScenarioResult:
    data: Dict[str, Any]
    rows: List[List[Any]]
    summary: str = ""
    extra: Dict[str, str] = field(default_factory=dict)


@dataclass
class RunManifest:
    scenario: str
    config: Dict[str, Any]
    artifacts: List[str]
    duration: float
    version: str
    mode: str
    summary: str = ""

    def to_json(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "artifacts": self.artifacts,
            "duration": self.duration,
            "version": self.version,
            "mode": self.mode,
        }


def write_atomic(path: Path, text: str) -> Path:
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("w", encoding="utf8", newline="") as f:
        f.write(text)
    tmp.replace(path)
    return path


def to_json_text(data: Any) -> str:
    return json.dumps(data, indent=2, default=str) + "\n"


def to_csv_text(rows: List[List[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _write_result(out: Path, scenario: str, result: ScenarioResult) -> List[str]:
    files = {
        f"{scenario}.json": to_json_text(result.data),
        f"{scenario}.csv": to_csv_text(result.rows),
        **result.extra,
    }
    for name, text in files.items():
        write_atomic(out / name, text)
    return list(files)


def run_scenario(config: ScenarioConfig) -> RunManifest:
    if config.out is None:
        raise ConfigInvalid("out", "no output directory: pass --out or set 'out'")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("Running %s scenario in %s mode", config.scenario, config.mode.value)
    start = time.perf_counter()
    try:
        result = RUNNERS[config.scenario](config)
    except NonConvergence as e:
        # Keep the diagnostics of an uncertified run, but no manifest
        if e.report is not None:
            _write_result(out, config.scenario, _manipulation_result(e.report))
        raise
    artifacts = _write_result(out, config.scenario, result)
    manifest = RunManifest(
        scenario=config.scenario,
        config=config.to_dict(),
        artifacts=artifacts,
        duration=time.perf_counter() - start,
        version=__version__,
        mode=config.mode.value,
        summary=result.summary,
    )
    write_atomic(out / MANIFEST_NAME, to_json_text(manifest.to_json()))
    logger.info("Wrote %s to %s", ", ".join(artifacts + [MANIFEST_NAME]), out)
    return manifest


def run_merge(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    P, Q = config.opinion(p["p"]), config.opinion(p["q"])
    method = CurveMethod(p["method"])
    curve = merging_curve(
        P, Q, p["t_max"], p["lookahead"], p["threshold"], method,
        n_paths=p["n_paths"], seed=config.seed,
    )
    report = abs_continuity_report(P, Q, p["abs_depth"])
    data: Dict[str, Any] = {
        "p": P.label,
        "q": Q.label,
        "curve": curve.to_json(),
        "abs_continuity": report.to_json(),
    }
    summary = [
        f"TV_{p['lookahead']} of {P.label} vs {Q.label} at t={p['t_max']}: "
        f"mean {format_number(curve.points[-1].mean)}, "
        f"exceedance {format_number(curve.points[-1].exceedance)}",
        f"Q << P up to depth {p['abs_depth']}: {not report.violations}",
    ]
    if p["candidates"]:
        bd = bd_property_report(
            P,
            [config.opinion(name) for name in p["candidates"]],
            t_max=p["t_max"],
            L=p["lookahead"],
            threshold=p["threshold"],
            d=p["abs_depth"],
            method=method,
            n_paths=p["n_paths"],
            seed=config.seed,
        )
        data["bd_property"] = bd.to_json()
        summary.append(f"Consistent with the merging property: {bd.consistent}")
    return ScenarioResult(data, curve.to_csv_rows(), "\n".join(summary))


def run_example1(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    N, K, mode = p["N"], p["K"], config.mode
    reference = ReferencePath.parse(str(p["reference"]), BINARY)
    surrogate = make_example1_surrogate(N, K, mode)
    rows: List[List[Any]] = [["t", "history", "gap", "surrogate_prob", "p_inf_prob"]]
    points = []
    for t in range(N + 1):
        history = reference.head(t)
        gap = example1_gap(N, K, t, history, mode)
        prob = cylinder_prob(surrogate.opinion, history)
        p_inf = cylinder_prob(surrogate.p_infinity, history)
        points.append(
            {
                "t": t,
                "history": format_history(history),
                "gap": to_json_number(gap),
                "surrogate_prob": to_json_number(prob),
                "p_inf_prob": to_json_number(p_inf),
                "agrees": prob == p_inf,
            }
        )
        rows.append([t, format_history(history), *(to_json_number(x) for x in (gap, prob, p_inf))])
    data = {
        "N": N,
        "K": K,
        "reference": str(reference),
        "opinion": surrogate.opinion.to_spec(),
        "points": points,
    }
    gaps = sorted({point["gap"] for point in points}, key=str)
    summary = f"Gap on 'ones infinitely often' for t=0..{N}: {', '.join(map(str, gaps))}"
    return ScenarioResult(data, rows, summary)


def run_bdtest(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    reference = ReferencePath.parse(str(p["reference"]), config.alphabet_obj)
    test = build_bd_test(reference, p["epsilon"], p["max_depth"])
    corpus = config.corpus(p["corpus"])
    eps = config.mode.coerce(p["epsilon"])
    rows: List[List[Any]] = [["opinion", "rejection_time", "cylinder", "type1_error"]]
    opinions = []
    for opinion in corpus:
        t = rejection_time(opinion, reference, eps, p["max_depth"])
        error = type1_error(test, opinion)
        cylinder = format_history(reference.head(t))
        opinions.append(
            {
                "label": opinion.label,
                "rejection_time": t,
                "cylinder": cylinder,
                "type1_error": to_json_number(error),
                "controlled": error < eps,
            }
        )
        rows.append([opinion.label, t, cylinder, to_json_number(error)])
    strategy = Strategy.uniform(corpus, config.mode)
    witness = verify_nonmanipulable(test, strategy, reference)
    passed = pass_prob(strategy, test, witness)
    data = {
        "test": test.label,
        "epsilon": to_json_number(eps),
        "reference": str(reference),
        "opinions": opinions,
        "witness": {"cylinder": format_history(witness), "pass_prob": to_json_number(passed)},
    }
    summary = (
        f"{test.label}: uniform strategy over {len(corpus)} opinions is refuted on "
        f"'{format_history(witness)}' (pass probability {format_number(passed)})"
    )
    return ScenarioResult(data, rows, summary)


def run_partition(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    rows: List[List[Any]] = [["opinion", "epsilon", "cell", "prob"]]
    partitions = []
    trees = []
    for opinion in config.corpus(p["corpus"]):
        for epsilon in p["epsilons"]:
            partition = epsilon_cylinder_partition(opinion, epsilon, p["max_depth"])
            partitions.append({**partition.to_json(), "total": to_json_number(partition.total)})
            trees.append(partition.format_tree())
            eps = to_json_number(partition.epsilon)
            for cell, prob in zip(partition.cells, partition.probs):
                rows.append([opinion.label, eps, format_history(cell), to_json_number(prob)])
    return ScenarioResult({"partitions": partitions}, rows, "\n".join(trees))


def _manipulation_result(report: Any) -> ScenarioResult:
    summary = (
        f"{report.test_label} at horizon {report.horizon}: value {report.value:.6f}, "
        f"min pass probability {float(report.min_pass_prob):.6f}, "
        f"certified {report.certified} after {report.iterations} iterations"
    )
    return ScenarioResult(report.to_json(), report.to_csv_rows(), summary)


def run_manipulate(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    horizon = p["horizon"]
    if p["test"] == "tail":
        test = tail_rejection_test(horizon, p["epsilon"])
    else:
        test = empty_test(p["epsilon"])
    initial = None
    if p["initial"] != "uniform":
        initial = [config.opinion(name) for name in p["initial"]]
    report = double_oracle_manipulate(
        test,
        horizon,
        p["epsilon"],
        p["delta"],
        max_iters=p["max_iters"],
        tol=NumberMode.float.coerce(p["tol"]),
        alphabet=config.alphabet_obj,
        initial_menu=initial,
    )
    return _manipulation_result(report)


def run_game(config: ScenarioConfig) -> ScenarioResult:
    p = config.params
    if p["payoffs"] is not None:
        game = MatrixGame(np.array(p["payoffs"], dtype=np.float64))
    else:
        game = MatrixGame.from_text(config.resolve(str(p["matrix_file"])).read_text("utf8"))
    solution = solve_matrix_game(
        game, NumberMode.float.coerce(p["tol"]), p["method"], p["max_iters"]
    )
    rows: List[List[Any]] = [["player", "index", "label", "prob"]]
    for player, labels, strategy in (
        ("row", game.row_labels, solution.row_strategy),
        ("col", game.col_labels, solution.col_strategy),
    ):
        for i, (label, prob) in enumerate(zip(labels, strategy)):
            rows.append([player, i, label, float(prob)])
    data = {"game": game.to_json(), "solution": solution.to_json()}
    summary = f"Game value {solution.value:.12g} (duality gap {solution.duality_gap:.3g})"
    return ScenarioResult(data, rows, summary, extra={"game.txt": game.to_text()})


RUNNERS: Dict[str, Callable[[ScenarioConfig], ScenarioResult]] = {
    "merge": run_merge,
    "example1": run_example1,
    "bdtest": run_bdtest,
    "partition": run_partition,
    "manipulate": run_manipulate,
    "game": run_game,
}

from typing import Optional
from pathlib import Path
import logging
import sys

from radicli import Arg, ExistingFilePath, Radicli

from .about import __version__
from .config import load_config
from .scenarios import run_scenario
from .util import ERRORS, ConfigInvalid, ExpertestError, NumberMode

HELP = """Testing strategic experts: merging diagnostics, cylinder tests and
manipulation games. Each command runs one scenario from a YAML config and
writes JSON and CSV artifacts plus a manifest."""


def handle_error(e: ExpertestError) -> int:
    print(f"Error: {e.message}", file=sys.stderr)
    return e.exit_code


# Every class is registered, since only direct subclasses get expanded
cli = Radicli(
    prog="expertest",
    help=HELP,
    version=__version__,
    errors={cls: handle_error for cls in ERRORS},
)


def setup_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run(
    scenario: str,
    config: Optional[Path],
    out: Optional[Path],
    seed: Optional[int],
    mode: Optional[NumberMode],
    quiet: bool,
) -> None:
    setup_logging(quiet)
    if config is None:
        raise ConfigInvalid("config", "pass a config file with --config")
    overrides = {
        "out": str(out) if out is not None else None,
        "seed": seed,
        "mode": mode.value if mode is not None else None,
    }
    scenario_config = load_config(config, overrides, scenario=scenario)
    manifest = run_scenario(scenario_config)
    if not quiet:
        print(manifest.summary)


def _args():
    return dict(
        config=Arg("--config", "-c", help="Scenario config file (YAML)"),
        out=Arg("--out", "-o", help="Output directory, overrides the config"),
        seed=Arg("--seed", help="Random seed, overrides the config"),
        mode=Arg("--mode", help="Number mode, overrides the config"),
        quiet=Arg("--quiet", "-q", help="Only log warnings and errors"),
    )


@cli.command("merge", **_args())
def merge(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Merging curve and absolute-continuity report for two opinions."""
    run("merge", config, out, seed, mode, quiet)


@cli.command("example1", **_args())
def example1(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Non-merging gap of the truncated dyadic mixture."""
    run("example1", config, out, seed, mode, quiet)


@cli.command("bdtest", **_args())
def bdtest(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Cylinder test along a reference path: rejection times, type I errors
    and the refuting cylinder of the uniform strategy."""
    run("bdtest", config, out, seed, mode, quiet)


@cli.command("partition", **_args())
def partition(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Epsilon-cylinder partitions of the configured opinions."""
    run("partition", config, out, seed, mode, quiet)


@cli.command("manipulate", **_args())
def manipulate(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Find a strategy that passes a finite-horizon test on every path."""
    run("manipulate", config, out, seed, mode, quiet)


@cli.command("game", **_args())
def game(
    config: Optional[ExistingFilePath] = None,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    mode: Optional[NumberMode] = None,
    quiet: bool = False,
):
    """Solve a zero-sum matrix game."""
    run("game", config, out, seed, mode, quiet)

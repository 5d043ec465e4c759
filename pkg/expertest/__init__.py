from .about import __version__
from .measures import Alphabet, BINARY, Opinion, IID, TimeInhomogeneousIID, DyadicIID
from .measures import Markov, BayesMixture, TableKernel, ReferencePath
from .measures import next_distribution, cylinder_prob, condition, posterior_weights
from .measures import cylinder_table, sample_path, make_example1_surrogate
from .measures import iid, bernoulli, from_spec
from .merging import CurveMethod, MergingCurve, AbsContinuityReport, tv_lookahead
from .merging import merging_curve, abs_continuity_report, example1_gap
from .merging import bd_property_report
from .testing import RejectionRegion, CylinderPartition, Test, normalize_region
from .testing import region_prob, epsilon_cylinder_partition, build_bd_test
from .testing import tail_rejection_test, empty_test, type1_error, rejection_time
from .game import MatrixGame, GameSolution, solve_matrix_game, brute_force_value
from .game import best_row_response, best_col_response
from .manipulation import Strategy, ManipulationReport, pass_prob, build_game
from .manipulation import verify_nonmanipulable, nature_to_opinion, lightest_cells_opinion
from .manipulation import double_oracle_manipulate
from .config import ScenarioConfig, parse_config, load_config, serialize_config
from .scenarios import RunManifest, run_scenario
from .util import NumberMode, ExpertestError, ConfigInvalid, ConditioningOnNullEvent
from .util import EnumerationTooLarge, AtomDetected, NonConvergence
from .util import RegionDeeperThanHorizon, UndecidedMembership, PreconditionViolated
from .util import InvalidTest, enumerate_histories, parse_history, format_history

# fmt: off
__all__ = [
    "__version__", "Alphabet", "BINARY", "Opinion", "IID", "TimeInhomogeneousIID",
    "DyadicIID", "Markov", "BayesMixture", "TableKernel", "ReferencePath",
    "next_distribution", "cylinder_prob", "condition", "posterior_weights",
    "cylinder_table", "sample_path", "make_example1_surrogate", "iid", "bernoulli",
    "from_spec", "CurveMethod", "MergingCurve", "AbsContinuityReport",
    "tv_lookahead", "merging_curve", "abs_continuity_report", "example1_gap",
    "bd_property_report", "RejectionRegion", "CylinderPartition", "Test",
    "normalize_region", "region_prob", "epsilon_cylinder_partition",
    "build_bd_test", "tail_rejection_test", "empty_test", "type1_error",
    "rejection_time", "MatrixGame", "GameSolution", "solve_matrix_game",
    "brute_force_value", "best_row_response", "best_col_response", "Strategy",
    "ManipulationReport", "pass_prob", "build_game", "verify_nonmanipulable",
    "nature_to_opinion", "lightest_cells_opinion", "double_oracle_manipulate", "ScenarioConfig",
    "parse_config", "load_config", "serialize_config", "RunManifest",
    "run_scenario", "NumberMode", "ExpertestError", "ConfigInvalid",
    "ConditioningOnNullEvent", "EnumerationTooLarge", "AtomDetected",
    "NonConvergence", "RegionDeeperThanHorizon", "UndecidedMembership",
    "PreconditionViolated", "InvalidTest", "enumerate_histories",
    "parse_history", "format_history",
]
# fmt: on

"""hierlearn: class-incremental hierarchical classification over frozen
features, built from one-vs-all linear SVM banks and a fixed-budget
rehearsal memory.

The pieces compose bottom-up: :mod:`~hierlearn.features` defines the data
model and file formats, :mod:`~hierlearn.svm` the calibrated binary
classifiers, :mod:`~hierlearn.hierarchy` the coarse-to-fine banks,
:mod:`~hierlearn.memory` the rehearsal store, :mod:`~hierlearn.trainer`
the incremental protocol, :mod:`~hierlearn.metrics` the scoring, and
:mod:`~hierlearn.synth` generates data shaped like the target problem.
"""

from .errors import (
    CorruptionError,
    DegenerateProblemError,
    DuplicateClassError,
    FormatError,
    GenerationError,
    HierlearnError,
    ParseError,
    TaxonomyError,
    ValidationError,
)
from .features import (
    Dataset,
    FeatureRecord,
    TaskStream,
    concat,
    load_binary,
    load_csv,
    partition_tasks,
    save_binary,
    save_csv,
)
from .hierarchy import HierarchicalModel, HierPrediction
from .memory import (
    Exemplar,
    HardCase,
    MemoryStore,
    equal_split,
    herd_select,
    select_hard_cases,
)
from .metrics import (
    CohortRow,
    EvalReport,
    ForgettingTable,
    evaluate,
    forgetting_breakdown,
    format_report,
    format_table,
)
from .svm import CalibratedSvm, FitInfo, SolverParams, SvmProblem, calibrate, train
from .synth import PRESETS, SynthSpec, generate, generate_with_centers, split_by_track
from .taxonomy import Taxonomy
from .trainer import (
    TaskSummary,
    TrainConfig,
    TrainReport,
    run_joint_oracle,
    run_stream,
    save_report,
)

__version__ = "0.1.0"

__all__ = [
    "CalibratedSvm",
    "CohortRow",
    "CorruptionError",
    "Dataset",
    "DegenerateProblemError",
    "DuplicateClassError",
    "EvalReport",
    "Exemplar",
    "FeatureRecord",
    "FitInfo",
    "ForgettingTable",
    "FormatError",
    "GenerationError",
    "HardCase",
    "HierPrediction",
    "HierarchicalModel",
    "HierlearnError",
    "MemoryStore",
    "PRESETS",
    "ParseError",
    "SolverParams",
    "SvmProblem",
    "SynthSpec",
    "TaskStream",
    "TaskSummary",
    "TaxonomyError",
    "Taxonomy",
    "TrainConfig",
    "TrainReport",
    "ValidationError",
    "calibrate",
    "concat",
    "equal_split",
    "evaluate",
    "forgetting_breakdown",
    "format_report",
    "format_table",
    "generate",
    "generate_with_centers",
    "herd_select",
    "load_binary",
    "load_csv",
    "partition_tasks",
    "run_joint_oracle",
    "run_stream",
    "save_binary",
    "save_csv",
    "save_report",
    "select_hard_cases",
    "split_by_track",
    "train",
]

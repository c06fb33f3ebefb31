"""Online feature selection for streaming telemetry.

Finds a small, stable set of features from a sample stream by growing
a top-k ranking over doubling sample counts, then supports forest-based
prediction, teacher/student drift detection and re-selection after drift.
"""

from .core import (
    DEFAULT_K_VALUES,
    DEFAULT_T_CHECKPOINTS,
    FeatureCatalog,
    GridPoint,
    Sample,
    SampleCache,
    SearchSpace,
    SelectedFeatureSet,
    TraceWindow,
    append_sample,
    prefix,
)
from .drift import (
    MODES,
    DriftDetector,
    DriftTimeline,
    PageHinkleyState,
    compare_modes,
    drift_pipeline,
    observe,
    page_hinkley_replay,
    page_hinkley_update,
    train_teacher_student,
)
from .errors import *  # noqa: F401,F403
from .harness import (
    InformativeSpec,
    Scenario,
    ScenarioReport,
    SyntheticTrace,
    emit_report,
    load_trace,
    run_scenario,
    synth_trace,
    write_trace,
)
from .predictor import ForestModel, nmae, offline_eval, online_eval, predict, train_forest
from .preprocess import clean_missing, minmax_scale, preprocess, variance_filter
from .ranking import RankedList, RankerConfig, rank, rank_arr, rank_ls, top_k
from .search import (
    OsfsConfig,
    OsfsResult,
    grid_walk,
    next_grid_point,
    osfs_arr_sim_ksmall,
    osfs_run,
)
from .stability import (
    SelectionHistory,
    StabilityState,
    frequency_stability,
    frequency_stable,
    representation_vector,
    set_similarity,
    similarity_stable,
)

__version__ = "0.1.0"

"""stackcast: wavelet-denoised stacked ensemble forecasting for daily
price series, with technical-indicator feature engineering and three
feature selectors, for both price regression and up/down classification.
"""

from .exceptions import (
    ConfigurationError,
    DependencyError,
    DivergenceError,
    DomainError,
    EnsembleError,
    ImputationError,
    ParseError,
    SchemaError,
    ShapeError,
    SizeError,
    StackcastError,
    StructureError,
)
from .frame import (
    INTERVALS,
    FeatureFrame,
    SplitSpec,
    TimeSeries,
    chronological_split,
    interpolate_missing,
    load_csv,
    make_labels,
    make_regression_targets,
)
from .outliers import IsolationForestDetector, isolation_forest_filter
from .wavelet import (
    DenoiseConfig,
    DwtDecomposition,
    WaveletDenoiser,
    denoise,
    dwt_forward,
    dwt_inverse,
)
from .indicators import IndicatorExpander, IndicatorSpec, default_grid, expand
from .forest import RandomForest, TreeNode, forest_importance, tree_importance
from .featsel import (
    Chi2Selector,
    ContingencyTable,
    EmbeddedSelector,
    RFESelector,
    SelectionResult,
    chi2_scores,
    chi2_select,
    chi2_statistic,
    embedded_select,
    rfe,
)
from .metrics import (
    ConfusionCounts,
    accuracy,
    confusion,
    f1_score,
    mae,
    mape,
    precision,
    recall,
    rmse,
    roc_auc,
    roc_curve,
    specificity,
)
from .neural import (
    Adam,
    ModelSpec,
    TrainedModel,
    attention,
    bce_loss,
    gru_step,
    indrnn_step,
    logcosh_loss,
    lstm_step,
    mse_loss,
    positional_encoding,
    probsparse_attention,
    query_dispersion,
    train,
)
from .stack import StackedEnsemble, combine_regression, combine_vote, fit_ensemble
from .pipeline import RunConfig, load_config, run_pipeline

__version__ = "0.1.0"

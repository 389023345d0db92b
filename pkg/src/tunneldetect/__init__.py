"""Lexicographical DNS tunneling detection with a character-level 1D-CNN.

Typical flow: generate (or load) a labeled corpus, train, evaluate at a
decision threshold, then score real names or resolver logs. The `cli`
module exposes the same pipeline as a command-line tool.
"""

__version__ = "0.1.0"

from .datagen import (
    CorpusSpec,
    DomainSample,
    build_corpus,
    desk_scale_spec,
    full_scale_spec,
    read_corpus,
    split_train_test,
    write_corpus,
)
from .evaluation import (
    MetricsReport,
    Prediction,
    classify,
    compute_metrics,
    export_scatter,
    per_tool_breakdown,
    predict_names,
    predict_samples,
)
from .model_store import load, save
from .network import (
    DEFAULT_HYPERPARAMS,
    Hyperparams,
    ModelParams,
    backward,
    bce_loss,
    forward,
    init_params,
)
from .tokenizer import Vocabulary, build_vocabulary, encode_domain
from .training import (
    TrainConfig,
    count_parameters,
    default_grid,
    grid_search,
    kfold_cross_validate,
    train,
)

"""Coarse-grained primary MSC subject classification toolkit.

Assigns the two-digit primary subject number to article records from title,
abstract text, and reference-derived MSC codes; evaluates predictions with
support-weighted metrics; and serves a trained model over HTTP.
"""

from .classifier import (
    Hyperparams,
    TrainedModel,
    load_model,
    predict,
    predict_proba,
    ref1_vote,
    save_model,
    train,
    train_variant,
)
from .corpus import (
    ArticleRecord,
    MscCode,
    PredictionRecord,
    parse_msc_code,
    parse_ref_mscs,
    read_articles,
    read_predictions,
    split_corpus,
    write_articles,
    write_predictions,
)
from .evaluation import (
    class_metrics,
    confusion,
    evaluate_predictions,
    kfold_cv,
    normalized_entropy,
    pr_curve,
    threshold_analysis,
    weighted_metrics,
)
from .features import (
    MethodVariant,
    Vocabulary,
    compose_source,
    encode,
    fit_vocabulary,
    strip_math,
    tokenize,
    variant,
)

__version__ = "0.1.0"

"""stylepipe: style-extrapolation preprocessing and fragment classifiers."""

__version__ = "0.1.0"

from .data import FragmentDataset, ManifestEntry, read_manifest  # noqa: F401
from .features import TinyExtractor, build_feature_extractor  # noqa: F401
from .losses import (  # noqa: F401
    LossConfig,
    auto_style_loss,
    content_loss,
    cross_entropy,
    gram_matrix,
    gram_style_discrepancy,
    masked_content_loss,
    style_extrapolation_loss,
)
from .models import (  # noqa: F401
    CnnBaseline,
    ResidualExtrapolator,
    StyleClassifier,
    build_classifier,
    build_cnn_baseline,
    build_extrapolator,
    count_parameters,
    zero_decoder,
)
from .train import (  # noqa: F401
    TrainConfig,
    predict_to_csv,
    train_classifier,
    train_extrapolator,
)

"""Cross-modal hashing for long-tail multi-label data.

Library layout:

- ``nn``          dense-layer substrate with manual backprop and SGD
- ``datagen``     synthetic Zipf long-tail two-modality datasets
- ``affinity``    pairwise similarity, Hausdorff label affinity, prototype
                  Laplacian regularizer
- ``hsic``        Hilbert-Schmidt independence criterion and gradient
- ``autoencoder`` individuality-commonality autoencoder (phase 1)
- ``meta``        direct-feature projectors, selectors, meta-feature fusion
- ``hashing``     likelihood loss, sign update, phase-2 trainer, ablations
- ``retrieval``   query encoding, Hamming ranking, MAP, head/tail breakdown
- ``store``       bit-exact dataset/checkpoint/codes/report file formats
- ``experiment``  end-to-end orchestration helpers
- ``verify``      gradient-check and oracle harness (also `tailhash check-grad`)
- ``cli``         command-line interface
"""

from .datagen import Dataset, LongTailSpec, generate, mu_from_if, split, zipf_counts
from .experiment import RunConfig, TrainedModel, evaluate_model, train_full
from .hashing import VARIANTS, HashHyper, Variant
from .retrieval import EvalReport, mean_average_precision

__all__ = [
    "Dataset", "LongTailSpec", "generate", "mu_from_if", "split",
    "zipf_counts", "RunConfig", "TrainedModel", "evaluate_model",
    "train_full", "VARIANTS", "HashHyper", "Variant", "EvalReport",
    "mean_average_precision",
]

__version__ = "0.1.0"

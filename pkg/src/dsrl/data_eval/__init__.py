"""Synthetic data, feature-file IO and ranking metrics."""

from .featurefile import (
    FeatureSequence,
    load_split,
    read_feature_file,
    read_manifest,
    write_feature_file,
    write_manifest,
)
from .metrics import average_precision, roc_auc
from .synth import SynthSpec, Taxonomy, make_taxonomy, synth_generate

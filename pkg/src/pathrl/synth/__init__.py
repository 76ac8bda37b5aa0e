"""Synthetic cohort construction: generation, labeling, degradation, persistence."""

from .anemia import carve_inconclusive, derive_features, generate_anemia, label_with_tree, make_anemia_dataset
from .degrade import DegradationSpec, degrade
from .io import read_csv, write_csv
from .lupus import LupusCriteria, generate_lupus, load_criteria, make_lupus_dataset, score_lupus
from .penalty import PenaltyWeightTable, compute_penalty_weight, load_penalty_table
from .splits import Splits, split

__all__ = [
    "DegradationSpec",
    "LupusCriteria",
    "PenaltyWeightTable",
    "Splits",
    "carve_inconclusive",
    "compute_penalty_weight",
    "degrade",
    "derive_features",
    "generate_anemia",
    "generate_lupus",
    "label_with_tree",
    "load_criteria",
    "load_penalty_table",
    "make_anemia_dataset",
    "make_lupus_dataset",
    "read_csv",
    "score_lupus",
    "split",
    "write_csv",
]

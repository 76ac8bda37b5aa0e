"""Deterministic train/validation/test partitioning.

80/20 train/test, then a tenth of the training part becomes validation.
Validation and test must always come from the clean dataset: degradation is
applied to the returned train split afterwards, never before splitting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..schema import Dataset


@dataclass
class Splits:
    train: Dataset
    validation: Dataset
    test: Dataset


def split(dataset: Dataset, seed: int = 0, test_fraction: float = 0.2,
          validation_fraction: float = 0.1) -> Splits:
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    n_val = int(round(validation_fraction * (n - n_test)))
    test_idx = order[:n_test]
    val_idx = order[n_test:n_test + n_val]
    train_idx = order[n_test + n_val:]
    return Splits(
        train=dataset.subset(train_idx),
        validation=dataset.subset(val_idx),
        test=dataset.subset(test_idx),
    )

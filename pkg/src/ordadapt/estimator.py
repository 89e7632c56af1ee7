"""Scikit-learn style front end over the training loop.

`WeakOrdinalDomainAdapter.fit` consumes one list of `Sequence` objects mixing
both domains, splits them by domain flag, holds out one target subject for
validation-based model selection, and trains per the configured adaptation
mode. After fitting, frames go in as plain [n, D] arrays: `predict` returns
ordinal levels, `predict_proba` the softmax rows behind them, and
`predict_intensity` the continuous regression output.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .metrics import pcc
from .network import Network, NetworkConfig
from .training import TrainConfig, fit, predict_intensity, predict_levels
from .validation import as_float_matrix, as_label_vector, check_sequences, split_domains


class WeakOrdinalDomainAdapter(BaseEstimator):
    """Ordinal sequence labeler trained from two domains with weak target labels.

    Parameters mirror `TrainConfig` plus the network sizes.
    validation_subject picks the held-out target subject for early stopping;
    None means the highest-numbered one. The held-out subject is excluded
    from training whenever at least one other target subject remains.
    """

    def __init__(self, lr=0.001, momentum=0.9, weight_decay=1e-5, epochs=60,
                 source_batch=4, target_batch=2, anneal_factor=0.5,
                 anneal_every=5, anneal_after=20, gamma=10.0, patience=10,
                 window=64, stride=8, sigma=0.3, levels=6,
                 encoding="gaussian", pooling="adaptive", mode="adversarial",
                 steps_per_epoch=0, feature_units=16, feature_hidden=32,
                 domain_hidden=8, validation_subject=None, seed=0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.source_batch = source_batch
        self.target_batch = target_batch
        self.anneal_factor = anneal_factor
        self.anneal_every = anneal_every
        self.anneal_after = anneal_after
        self.gamma = gamma
        self.patience = patience
        self.window = window
        self.stride = stride
        self.sigma = sigma
        self.levels = levels
        self.encoding = encoding
        self.pooling = pooling
        self.mode = mode
        self.steps_per_epoch = steps_per_epoch
        self.feature_units = feature_units
        self.feature_hidden = feature_hidden
        self.domain_hidden = domain_hidden
        self.validation_subject = validation_subject
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        names = [f.name for f in dataclasses.fields(TrainConfig)]
        return TrainConfig(**{n: getattr(self, n) for n in names})

    def fit(self, X, y=None):
        """Train on a list of Sequence objects; y is ignored.

        Source sequences contribute frame-level supervision; target
        sequences contribute only bag weak labels (their frame labels are
        read for validation scoring alone).
        """
        sequences = check_sequences(X)
        source, target = split_domains(sequences)
        config = self._train_config()
        if not target:
            raise ValueError("fit needs at least one target-domain sequence "
                             "for validation scoring")
        subjects = sorted({s.subject_id for s in target})
        held_out = self.validation_subject
        if held_out is None:
            held_out = subjects[-1]
        elif held_out not in subjects:
            raise ValueError(f"validation_subject {held_out} not among "
                             f"target subjects {subjects}")
        validation = [s for s in target if s.subject_id == held_out]
        training = [s for s in target if s.subject_id != held_out]
        if not training:
            training = validation  # single-subject cohort: no split possible
        input_dim = sequences[0].frames.shape[1]
        network = Network(NetworkConfig(
            input_dim=input_dim, feature_dim=self.feature_units,
            feature_hidden=self.feature_hidden, domain_hidden=self.domain_hidden,
            levels=self.levels, seed=self.seed))
        state = fit(config, source, training, validation, network=network)
        self.network_ = state.network
        self.state_ = state
        self.history_ = state.history
        self.n_features_in_ = input_dim
        self.classes_ = np.arange(self.levels)
        return self

    def predict(self, X) -> np.ndarray:
        """Per-frame ordinal level for an [n, D] frame array."""
        check_is_fitted(self, "network_")
        frames = as_float_matrix(X)
        return predict_levels(self.network_, frames)

    def predict_proba(self, X) -> np.ndarray:
        """Per-frame level probabilities, one softmax row per frame."""
        check_is_fitted(self, "network_")
        frames = as_float_matrix(X)
        return self.network_.forward_target(frames).data

    def predict_intensity(self, X) -> np.ndarray:
        """Per-frame continuous intensity from the regression head."""
        check_is_fitted(self, "network_")
        frames = as_float_matrix(X)
        return predict_intensity(self.network_, frames)

    def score(self, X, y) -> float:
        """Pearson correlation between predicted levels and y over frames.

        NaN when either series is constant, matching the metric contract.
        """
        check_is_fitted(self, "network_")
        frames = as_float_matrix(X)
        y = as_label_vector(y, n=frames.shape[0])
        return pcc(y, self.predict(frames))

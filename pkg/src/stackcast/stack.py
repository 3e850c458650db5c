"""Heterogeneous model stack: members train independently on the same
data and their outputs combine by arithmetic mean (regression) or
majority vote over thresholded probabilities (classification).
"""

from __future__ import annotations

import json
import os

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError, DivergenceError, EnsembleError
from .neural.model import ModelSpec, TrainedModel, train

__all__ = [
    "combine_regression",
    "combine_vote",
    "default_roster",
    "StackedEnsemble",
    "fit_ensemble",
]

DEFAULT_KINDS = ("lstm", "gru", "indrnn", "transformer", "dense")


def combine_regression(preds) -> np.ndarray:
    """Per-sample arithmetic mean over member predictions (rows)."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] == 0:
        raise ConfigurationError(
            f"need a (members, samples) matrix with members >= 1, got shape {preds.shape}"
        )
    return preds.mean(axis=0)


def combine_vote(probs, threshold: float = 0.5) -> np.ndarray:
    """Majority vote over thresholded probabilities.

    A member votes 1 when its probability exceeds ``threshold``; the
    combined class is 1 only on a strict majority, so an exact tie with
    an even member count resolves to 0.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ConfigurationError(
            f"need a (members, samples) matrix with members >= 1, got shape {probs.shape}"
        )
    votes = (probs > threshold).sum(axis=0)
    return (votes > probs.shape[0] / 2.0).astype(np.int64)


def default_roster(task: str, lookback: int, hidden: tuple = (64,)) -> list[ModelSpec]:
    """One member of each kind, the stock five-model stack."""
    return [
        ModelSpec(kind=kind, task=task, hidden=hidden, lookback=lookback, name=f"{kind}-{i}")
        for i, kind in enumerate(DEFAULT_KINDS)
    ]


class StackedEnsemble(BaseEstimator):
    """Train and combine a roster of sequence models.

    Parameters
    ----------
    specs : list of ModelSpec or "default"
        Member roster. "default" builds one member of each kind.
    task : str
        "regression" or "classification"; every member must agree.
    lookback, hidden : window length and hidden sizes for the default roster.
    epochs, batch, lr, clip_norm : training hyperparameters shared by all
        members.
    seed : int
        Base seed; members without an explicit seed get a distinct
        deterministic seed derived from it.
    """

    def __init__(
        self,
        specs="default",
        task="regression",
        lookback=30,
        hidden=(64,),
        epochs=100,
        batch=64,
        lr=0.001,
        clip_norm=5.0,
        seed=0,
    ):
        self.specs = specs
        self.task = task
        self.lookback = lookback
        self.hidden = hidden
        self.epochs = epochs
        self.batch = batch
        self.lr = lr
        self.clip_norm = clip_norm
        self.seed = seed

    def _resolve_specs(self) -> list[ModelSpec]:
        if self.specs == "default":
            return default_roster(self.task, self.lookback, tuple(self.hidden))
        specs = list(self.specs)
        if not specs:
            raise ConfigurationError("ensemble roster is empty")
        tasks = {s.task for s in specs}
        if len(tasks) > 1:
            raise ConfigurationError(f"members mix tasks {sorted(tasks)}")
        if tasks != {self.task}:
            raise ConfigurationError(
                f"ensemble task '{self.task}' does not match member task {tasks}"
            )
        return specs

    def fit(self, windows, targets):
        specs = self._resolve_specs()
        self.members_ = []
        for i, spec in enumerate(specs):
            member_seed = spec.seed if spec.seed is not None else self.seed + 7919 * (i + 1)
            try:
                fitted = train(
                    spec,
                    windows,
                    targets,
                    epochs=self.epochs,
                    batch=self.batch,
                    lr=self.lr,
                    seed=member_seed,
                    clip_norm=self.clip_norm,
                )
            except DivergenceError as exc:
                raise EnsembleError(f"member '{spec.label}' failed: {exc}") from exc
            self.members_.append(fitted)
        return self

    def _check_fitted(self):
        if not hasattr(self, "members_"):
            raise ConfigurationError("ensemble is not fitted; call fit() first")

    def predict_members(self, windows) -> np.ndarray:
        """Raw member outputs, shape (members, samples)."""
        self._check_fitted()
        return np.stack([m.predict(windows) for m in self.members_])

    def predict(self, windows) -> np.ndarray:
        """Combined prediction: mean price or majority-vote class."""
        member_preds = self.predict_members(windows)
        if self.task == "classification":
            return combine_vote(member_preds)
        return combine_regression(member_preds)

    def predict_score(self, windows) -> np.ndarray:
        """Mean member probability; the ranking score used for AUC."""
        self._check_fitted()
        if self.task != "classification":
            raise ConfigurationError("predict_score applies to classification only")
        return self.predict_members(windows).mean(axis=0)

    @property
    def member_labels(self) -> list[str]:
        self._check_fitted()
        return [m.spec.label for m in self.members_]

    # -- persistence ---------------------------------------------------------

    def save(self, directory: str):
        self._check_fitted()
        os.makedirs(directory, exist_ok=True)
        names = []
        for i, member in enumerate(self.members_):
            name = f"member{i:02d}_{member.spec.kind}"
            member.save(directory, name)
            names.append(name)
        manifest = {
            "task": self.task,
            "lookback": self.lookback,
            "epochs": self.epochs,
            "batch": self.batch,
            "lr": self.lr,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "members": names,
        }
        with open(os.path.join(directory, "ensemble.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "StackedEnsemble":
        path = os.path.join(directory, "ensemble.json")
        with open(path) as fh:
            manifest = json.load(fh)
        members = [TrainedModel.load(directory, name) for name in manifest["members"]]
        ensemble = cls(
            specs=[m.spec for m in members],
            task=manifest["task"],
            lookback=manifest["lookback"],
            epochs=manifest["epochs"],
            batch=manifest["batch"],
            lr=manifest["lr"],
            clip_norm=manifest["clip_norm"],
            seed=manifest["seed"],
        )
        ensemble.members_ = members
        return ensemble


def fit_ensemble(windows, targets, specs="default", **config) -> StackedEnsemble:
    """Functional entry point mirroring :class:`StackedEnsemble`.

    When an explicit roster is given its (unique) task is adopted unless
    the caller passes one; mixed-task rosters are a configuration error.
    """
    if specs != "default" and "task" not in config:
        tasks = {s.task for s in specs}
        if len(tasks) != 1:
            raise ConfigurationError(f"members mix tasks {sorted(tasks)}")
        config["task"] = tasks.pop()
    return StackedEnsemble(specs=specs, **config).fit(windows, targets)

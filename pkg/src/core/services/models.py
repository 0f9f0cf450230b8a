"""Pointwise classifiers behind a uniform train/predict contract."""
import warnings
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional

import numpy as np
from loguru import logger
from sklearn.base import BaseEstimator, clone
from sklearn.dummy import DummyClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier

from src.config.settings import get_settings_instance
from src.core.services.simulate import derive_seed
from src.utils.exceptions import NotFittedError, ValidationError

VAR_FLOOR = 1e-9

ModelFactory = Callable[[int], "Classifier"]


class Classifier(ABC):
    """Pointwise classifier: predictions use only each sample's own features."""

    name: str = "classifier"

    def __init__(self) -> None:
        self._classes: Optional[np.ndarray] = None

    @property
    def is_trained(self) -> bool:
        return self._classes is not None

    @property
    def classes(self) -> np.ndarray:
        if self._classes is None:
            raise NotFittedError(f"{self.name} has not been trained")
        return self._classes

    def train(self, features: np.ndarray, labels: np.ndarray) -> "Classifier":
        features = np.atleast_2d(np.asarray(features, dtype=float))
        labels = np.asarray(labels)
        if features.shape[0] != labels.shape[0] or features.shape[0] == 0:
            raise ValidationError("train needs matching, nonempty features and labels")
        self._fit(features, labels)
        self._classes = np.unique(labels)
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if not self.is_trained:
            raise NotFittedError(f"{self.name} must be trained before predict")
        return self._predict(np.atleast_2d(np.asarray(features, dtype=float)))

    @abstractmethod
    def _fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        ...

    @abstractmethod
    def _predict(self, features: np.ndarray) -> np.ndarray:
        ...


class SklearnClassifier(Classifier):
    """Adapter around a scikit-learn estimator template."""

    def __init__(self, name: str, estimator: BaseEstimator) -> None:
        super().__init__()
        self.name = name
        self._template = estimator
        self.estimator: Optional[BaseEstimator] = None
        self.degraded = False

    def _fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        estimator = clone(self._template)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            estimator.fit(features, labels)
        self.degraded = any(issubclass(w.category, ConvergenceWarning) for w in caught)
        if self.degraded:
            logger.warning(f"{self.name} did not converge; keeping current parameters")
        self.estimator = estimator

    def _predict(self, features: np.ndarray) -> np.ndarray:
        return self.estimator.predict(features)


class KNNClassifier(SklearnClassifier):
    """Euclidean k-nearest neighbors with majority vote; ties go to the smallest class."""

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValidationError("k must be at least 1")
        super().__init__("knn", KNeighborsClassifier(n_neighbors=k, weights="uniform", metric="euclidean"))
        self.k = k
        self._n_train = 0

    def _fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        self._n_train = features.shape[0]
        if self.k > self._n_train:
            # defer the failure to predict time
            self.estimator = None
            return
        super()._fit(features, labels)

    def _predict(self, features: np.ndarray) -> np.ndarray:
        if self.k > self._n_train:
            raise ValidationError(f"k = {self.k} exceeds the {self._n_train} training samples")
        return super()._predict(features)


class GaussianNBClassifier(SklearnClassifier):
    """Gaussian naive Bayes with per-feature variances floored at 1e-9."""

    def __init__(self) -> None:
        super().__init__("gaussian_nb", GaussianNB(var_smoothing=0.0))

    def _fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        super()._fit(features, labels)
        self.estimator.var_ = np.maximum(self.estimator.var_, VAR_FLOOR)


def decision_tree(max_depth: Optional[int] = None, min_samples_split: int = 2, seed: int = 0) -> Classifier:
    """CART tree with Gini impurity; unlimited depth by default."""
    return SklearnClassifier(
        "tree",
        DecisionTreeClassifier(
            criterion="gini",
            max_depth=max_depth,
            min_samples_split=min_samples_split,
            random_state=seed % 2 ** 32,
        ),
    )


def knn(k: Optional[int] = None, seed: int = 0) -> Classifier:
    """k-nearest neighbors; deterministic, so ``seed`` is unused."""
    return KNNClassifier(k if k is not None else get_settings_instance().knn_k)


def logistic(learning_rate: Optional[float] = None, max_iter: int = 1000, seed: int = 0) -> Classifier:
    """Binary cross-entropy logistic regression with intercept.

    Without a learning rate the full-batch L-BFGS solver is used; with one,
    constant-step stochastic gradient descent.
    """
    if learning_rate is None:
        estimator = LogisticRegression(max_iter=max_iter, random_state=seed % 2 ** 32)
    else:
        estimator = SGDClassifier(
            loss="log_loss",
            penalty=None,
            learning_rate="constant",
            eta0=learning_rate,
            max_iter=max_iter,
            tol=1e-6,
            random_state=seed % 2 ** 32,
        )
    return SklearnClassifier("logistic", estimator)


def gaussian_nb() -> Classifier:
    return GaussianNBClassifier()


def dummy(seed: int = 0) -> Classifier:
    """Predicts by sampling the training label marginal."""
    return SklearnClassifier("dummy", DummyClassifier(strategy="stratified", random_state=seed % 2 ** 32))


MODEL_BUILDERS: Dict[str, Callable[[int], Classifier]] = {
    "dummy": lambda seed: dummy(seed=seed),
    "knn": lambda seed: knn(seed=seed),
    "tree": lambda seed: decision_tree(seed=seed),
    "logistic": lambda seed: logistic(seed=seed),
    "gaussian_nb": lambda seed: gaussian_nb(),
}

MODEL_ALIASES = {
    "decision_tree": "tree",
    "decisiontree": "tree",
    "kneighbors": "knn",
    "gaussiannb": "gaussian_nb",
}


def canonical_model_name(name: str) -> str:
    key = name.strip().lower()
    key = MODEL_ALIASES.get(key, key)
    if key not in MODEL_BUILDERS:
        raise ValidationError(f"Unknown model '{name}'. Available: {sorted(MODEL_BUILDERS)}")
    return key


def build_model(name: str, seed: int = 0) -> Classifier:
    return MODEL_BUILDERS[canonical_model_name(name)](seed)


def model_factory(name: str, seed: int = 0) -> ModelFactory:
    """Fold index -> fresh, identically configured model seeded from (seed, fold)."""
    key = canonical_model_name(name)

    def make(fold_index: int) -> Classifier:
        return MODEL_BUILDERS[key](derive_seed(seed, fold_index + 1))

    return make

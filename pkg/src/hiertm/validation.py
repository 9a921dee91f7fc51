"""Input coercion and checks shared by the estimator classes."""

from __future__ import annotations

from .corpus import Collection, CorpusSet, merge


def as_corpus(X) -> CorpusSet:
    """Accept a CorpusSet, a Collection, or a list of Collections."""
    if isinstance(X, CorpusSet):
        return X
    if isinstance(X, Collection):
        return merge([X])
    if isinstance(X, (list, tuple)) and X and all(isinstance(c, Collection) for c in X):
        return merge(list(X))
    raise TypeError(
        "expected a CorpusSet, a Collection, or a non-empty list of Collections, "
        f"got {type(X).__name__}"
    )


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )

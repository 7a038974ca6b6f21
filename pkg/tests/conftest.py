import numpy as np
import pytest

from mcploc import RandomStream
from mcploc.scores import ScoreFamily


def naive_randomized_rank(scores, target_index, theta):
    """Direct evaluation of the rank formula, independent of the library path."""
    target = scores[target_index - 1]
    gt = sum(1 for s in scores if s > target)
    eq = sum(1 for s in scores if s == target)
    return (gt + theta * eq) / len(scores)


def naive_ks_uniform(values, eps=1e-9):
    """Brute-force sup_z |F_hat(z) - z| over the grid {v} and {v - eps}."""
    values = list(values)
    m = len(values)
    best = 0.0
    for v in values:
        for z in (v, v - eps):
            fhat = sum(1 for x in values if x <= z) / m
            best = max(best, abs(fhat - max(0.0, min(1.0, z))))
    return best


class MirroredStream:
    """Couples the rank thetas of a reversed-data run to a forward run:
    the left stream becomes the forward right stream reversed, and vice
    versa. Only the keys the matrix computation uses are supported."""

    def __init__(self, base, n):
        self.base = base
        self.n = n

    def uniforms(self, m, *key):
        assert m == self.n
        if key == ("rank", "left"):
            return self.base.uniforms(self.n, "rank", "right")[::-1].copy()
        if key == ("rank", "right"):
            return self.base.uniforms(self.n, "rank", "left")[::-1].copy()
        raise KeyError(key)


class SwappedFamily(ScoreFamily):
    """left/right exchanged; the mirror image of a family."""

    def __init__(self, inner):
        self.inner = inner
        self.name = f"swapped-{inner.name}"
        self.adaptive = inner.adaptive
        self.pointwise = inner.pointwise

    def left(self, x, bag, ctx):
        return self.inner.right(x, bag, ctx)

    def right(self, x, bag, ctx):
        return self.inner.left(x, bag, ctx)

    def bind(self, data):
        return _SwappedScorer(self, self.inner.bind(data))


class _SwappedScorer:
    def __init__(self, family, inner_scorer):
        self.family = family
        self.data = inner_scorer.data
        self.inner = inner_scorer

    def pointwise_left(self):
        return self.inner.pointwise_right()

    def pointwise_right(self):
        return self.inner.pointwise_left()

    def left_scores(self, r, t):
        return self.inner.right_scores(r, t)  # pragma: no cover - pointwise used

    def right_scores(self, r, t):
        return self.inner.left_scores(r, t)  # pragma: no cover - pointwise used


def kolmogorov_quantile(p, lo=0.0, hi=5.0, tol=1e-10):
    """Inverse of the limiting KS CDF by bisection (test-side oracle)."""
    from mcploc import kolmogorov_cdf

    while hi - lo > tol:
        mid = (lo + hi) / 2
        if kolmogorov_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


@pytest.fixture
def rng():
    return RandomStream(20240809)

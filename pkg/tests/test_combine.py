import math

import numpy as np
import pytest

from mcploc import (
    ConfigurationError,
    Dataset,
    RandomStream,
    build_null_table,
    candidate_pvalues,
    combine_bonferroni,
    combine_fisher,
    combine_min,
    confidence_set,
    gaussian_density_pair,
    generate,
    identity_family,
    kde_family,
    ks_uniform_distance,
    localize,
    oracle_lr_family,
)
from mcploc.combine import CandidatePValues, default_combiner, result_dict


class TestCombiners:
    def test_min_boundary(self):
        assert combine_min(1.0, 1.0) == 1.0

    def test_min_formula(self):
        assert combine_min(0.5, 0.9) == pytest.approx(0.75)

    def test_min_uniform_for_independent_uniforms(self):
        gen = np.random.default_rng(1)
        out = [combine_min(a, b) for a, b in gen.random((100_000, 2))]
        assert ks_uniform_distance(out) < 0.01

    def test_fisher_boundary(self):
        assert combine_fisher(1.0, 1.0) == 1.0

    def test_fisher_closed_form(self):
        # inputs e^-1 give statistic 4; chi-square(4) survival there is 3e^-2
        assert combine_fisher(math.exp(-1), math.exp(-1)) == pytest.approx(
            3 * math.exp(-2), rel=1e-12
        )

    def test_fisher_small_in_small_out(self):
        assert combine_fisher(1e-6, 1e-6) < 1e-9
        # zero input is floored at 1e-300 before the log, so the
        # statistic stays finite and the output collapses but never NaNs
        assert 0.0 <= combine_fisher(0.0, 0.5) < 1e-200

    def test_fisher_uniform_for_independent_uniforms(self):
        gen = np.random.default_rng(2)
        out = [combine_fisher(a, b) for a, b in gen.random((100_000, 2))]
        assert ks_uniform_distance(out) < 0.01

    def test_bonferroni_formula(self):
        assert combine_bonferroni(0.5, 0.3) == pytest.approx(0.6)

    def test_bonferroni_clamped(self):
        assert combine_bonferroni(0.6, 0.7) == 1.0

    def test_bonferroni_valid_under_comonotone_dependence(self):
        # worst-case dependence: both sides equal; P(p <= alpha) must stay
        # at or below alpha
        gen = np.random.default_rng(3)
        u = gen.random(100_000)
        p = np.minimum(2 * u, 1.0)
        for alpha in (0.05, 0.1):
            rate = float(np.mean(p <= alpha))
            se = math.sqrt(alpha * (1 - alpha) / u.size)
            assert rate <= alpha + 3 * se

    def test_default_combiner_tracks_adaptivity(self):
        assert default_combiner(identity_family()) == "minimum"
        assert default_combiner(kde_family()) == "bonferroni"


class TestConfidenceSet:
    def test_members_hull_estimate(self):
        pv = CandidatePValues(np.array([0.2, 0.8, 0.9, 0.01, 0.3]), "minimum")
        cs = confidence_set(pv, 0.25)
        assert cs.members == [2, 3, 5]
        assert cs.hull == (2, 5)
        assert cs.point_estimate == 3
        assert cs.contains_n  # member 5 is the last candidate t = n

    def test_tie_breaks_to_smallest_index(self):
        pv = CandidatePValues(np.array([0.5, 0.9, 0.9]), "minimum")
        assert confidence_set(pv, 0.1).point_estimate == 2

    def test_contains_n(self):
        pv = CandidatePValues(np.array([0.01, 0.9]), "minimum")
        assert confidence_set(pv, 0.05).contains_n

    def test_empty_set(self):
        pv = CandidatePValues(np.array([0.01, 0.02]), "minimum")
        cs = confidence_set(pv, 0.5)
        assert cs.members == [] and cs.hull is None

    def test_alpha_validated(self):
        pv = CandidatePValues(np.array([0.5, 0.5]), "minimum")
        for bad in (0.0, 1.0, -1.0):
            with pytest.raises(ConfigurationError):
                confidence_set(pv, bad)

    def test_members_recomputable_from_pvalues(self, rng):
        data = Dataset(rng.generator("d").normal(size=40))
        pv, cs = localize(data, identity_family(), 0.2, rng, B=100)
        assert cs.members == [t for t in range(1, 41) if pv.values[t - 1] > 0.2]


class TestLocalize:
    def _data(self, seed=0, n=60, xi=24):
        return generate("gaussian", n, xi, RandomStream(seed).substream("g"), delta=2.0)

    def test_tiny_alpha_keeps_every_candidate(self):
        data = self._data()
        _, cs = localize(data, identity_family(), 1e-12, RandomStream(1), B=50)
        assert cs.members == list(range(1, 61))

    def test_adaptive_family_rejects_independence_combiners(self):
        data = self._data()
        for combiner in ("minimum", "fisher"):
            with pytest.raises(ConfigurationError):
                localize(data, kde_family(), 0.05, RandomStream(1), combiner=combiner, B=20)

    def test_unknown_inputs_rejected(self):
        data = self._data()
        with pytest.raises(ConfigurationError):
            localize(data, identity_family(), 0.05, RandomStream(1), combiner="sum", B=20)
        with pytest.raises(ConfigurationError):
            localize(data, identity_family(), 0.05, RandomStream(1), test_method="bogus", B=20)

    def test_monotone_nesting(self):
        data = self._data(seed=5)
        pv = candidate_pvalues(data, identity_family(), RandomStream(2), B=200)
        sets = [set(confidence_set(pv, a).members) for a in (0.01, 0.05, 0.2, 0.5)]
        for bigger, smaller in zip(sets, sets[1:]):
            assert smaller <= bigger

    def test_known_changepoint_excludes_n(self):
        data = self._data(seed=6)
        pv, cs = localize(
            data, identity_family(), 1e-9, RandomStream(3), B=50, known_changepoint=True
        )
        assert pv.values[-1] == 0.0
        assert not cs.contains_n
        assert cs.members == list(range(1, 60))

    def test_oracle_family_localizes_strong_change(self):
        fam = oracle_lr_family(gaussian_density_pair(2.0))
        hits = 0
        widths = []
        table = build_null_table(80, 400, RandomStream(9).substream("null-table"))
        for i in range(25):
            data = generate("gaussian", 80, 32, RandomStream(100 + i), delta=2.0)
            _, cs = localize(
                data, fam, 0.05, RandomStream(200 + i), B=400, null_table=table
            )
            hits += 32 in cs.members
            widths.append(len(cs.members))
        assert hits >= 20  # coverage target 0.95, wide band for 25 runs
        assert 5 < np.mean(widths) < 40

    def test_asymptotic_backend_end_to_end(self):
        data = self._data(seed=7, n=120, xi=48)
        fam = oracle_lr_family(gaussian_density_pair(2.0))
        pv, cs = localize(data, fam, 0.05, RandomStream(4), test_method="asymptotic")
        assert 48 in cs.members or abs(cs.point_estimate - 48) <= 10

    def test_hybrid_backend_end_to_end(self):
        data = self._data(seed=8)
        pv, cs = localize(
            data, identity_family(), 0.05, RandomStream(5), test_method="hybrid", B=100
        )
        assert pv.values.shape == (60,)

    def test_permutation_backend_end_to_end(self):
        data = self._data(seed=9, n=24, xi=10)
        pv, cs = localize(
            data, identity_family(), 0.05, RandomStream(6),
            test_method="permutation", B=40,
        )
        assert np.all((pv.values >= 0) & (pv.values <= 1))

    def test_uniformity_of_pvalue_at_true_changepoint(self):
        # non-adaptive family + minimum combiner: p at the changepoint is
        # exactly uniform; fresh table per replication
        fam = oracle_lr_family(gaussian_density_pair(1.0))
        reps, n, xi = 300, 40, 16
        draws = np.empty(reps)
        for i in range(reps):
            rng = RandomStream(7000 + i)
            data = generate("gaussian", n, xi, rng.substream("gen"), delta=1.0)
            pv = candidate_pvalues(data, fam, rng.substream("mcp"), B=150)
            draws[i] = pv.values[xi - 1]
        assert ks_uniform_distance(draws) < 0.08


class TestResultDict:
    def test_schema(self, rng):
        data = Dataset(rng.generator("d").normal(size=12))
        pv, cs = localize(data, identity_family(), 0.05, rng, B=30)
        out = result_dict(pv, cs, seed=11, config={"score": "identity"})
        assert set(out) == {
            "alpha", "p_values", "members", "hull", "point_estimate",
            "contains_n", "config", "seed",
        }
        assert out["seed"] == 11
        assert len(out["p_values"]) == 12

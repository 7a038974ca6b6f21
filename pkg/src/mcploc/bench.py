"""Synthetic benchmarks: data generators, the coverage/width/bias harness
with power-curve export, and a Monte-Carlo check that the likelihood-ratio
score maximizes the expected normalized conformal rank.

Aggregation uses exact compensated sums keyed by trial index, so reports
are identical regardless of worker count.
"""

import concurrent.futures
import itertools
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .combine import candidate_pvalues, confidence_set
from .core import Dataset, RandomStream
from .errors import ConfigurationError, McplocError
from .scores import (
    cauchy_density_pair,
    classifier_family,
    ClassProbTable,
    gaussian_density_pair,
    identity_family,
    kde_family,
    oracle_lr_family,
)
from .testing import DEFAULT_B, get_or_build_null_table

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "generate",
    "make_score_family",
    "run_experiment",
    "load_config",
    "np_power_oracle",
    "np_rank_expectation",
    "NpOracleReport",
]

DISTRIBUTIONS = ("gaussian", "cauchy", "none")
SCORE_SPECS = ("identity", "oracle-gaussian", "oracle-cauchy", "kde")


def generate(distribution, n, xi, rng, delta=1.0):
    """Draws with the first xi points pre-change and the rest post-change.

    gaussian: N(-delta, 1) then N(+delta, 1); cauchy: Cauchy(-delta, 1)
    then Cauchy(+delta, 1); none: all pre-change (requires xi = n). xi = n
    always means no change occurs.
    """
    if not 1 <= xi <= n:
        raise ConfigurationError(f"changepoint {xi} outside [1, {n}]")
    g = rng.generator("data")
    if distribution == "none" and xi != n:
        raise ConfigurationError("distribution 'none' requires xi = n")
    if distribution in ("gaussian", "none"):
        draws = g.normal(size=n)
    elif distribution == "cauchy":
        draws = g.standard_cauchy(size=n)
    else:
        raise ConfigurationError(f"unknown distribution {distribution!r}")
    shift = np.where(np.arange(1, n + 1) <= xi, -delta, delta)
    return Dataset(draws + shift)


def make_score_family(spec, delta=1.0, probs=None):
    """Resolve a score-spec string to a family.

    "oracle-gaussian"/"oracle-cauchy" take the location shift ``delta``;
    "classifier" needs a ClassProbTable (or a path to one).
    """
    if spec == "identity":
        return identity_family()
    if spec == "oracle-gaussian":
        return oracle_lr_family(gaussian_density_pair(delta))
    if spec == "oracle-cauchy":
        return oracle_lr_family(cauchy_density_pair(delta))
    if spec == "kde":
        return kde_family()
    if spec == "classifier":
        if probs is None:
            raise ConfigurationError("classifier scores need a probability table")
        if not isinstance(probs, ClassProbTable):
            probs = ClassProbTable.from_csv(probs)
        return classifier_family(probs)
    raise ConfigurationError(f"unknown score spec {spec!r}")


@dataclass
class ExperimentConfig:
    n: int = 100
    xi: int = 40
    distribution: str = "gaussian"
    delta: float = 1.0
    score: str = "oracle-gaussian"
    alphas: tuple = (0.05, 0.5)
    combiner: str = None
    test_method: str = "empirical"
    B: int = DEFAULT_B
    trials: int = 200
    seed: int = 0
    workers: int = 1
    power_alpha: float = 0.05

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(f"unknown distribution {self.distribution!r}")
        if self.score not in SCORE_SPECS:
            raise ConfigurationError(f"unsupported bench score {self.score!r}")

    def echo(self):
        out = dict(self.__dict__)
        out["alphas"] = list(self.alphas)
        out.pop("workers")  # execution detail, not part of the statistical config
        return out


def load_config(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "alphas" in raw:
        raw["alphas"] = tuple(float(a) for a in raw["alphas"])
    return ExperimentConfig(**raw)


@dataclass
class AlphaSummary:
    alpha: float
    avg_width: float
    width_se: float
    coverage: float
    coverage_err: float


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    trials_ok: int
    rows: list
    bias: float
    bias_se: float
    mad: float
    mad_se: float
    power: dict = field(repr=False)
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {
            "config": self.config,
            "seed": self.seed,
            "trials_ok": self.trials_ok,
            "rows": [row.__dict__ for row in self.rows],
            "bias": self.bias,
            "bias_se": self.bias_se,
            "mad": self.mad,
            "mad_se": self.mad_se,
            "failures": [{"trial": i, "error": msg} for i, msg in self.failures],
        }

    def summary_csv(self):
        lines = ["alpha,avg_width,width_se,coverage,coverage_err,bias,bias_se,mad,mad_se,trials"]
        for row in self.rows:
            lines.append(
                f"{row.alpha:.17g},{row.avg_width:.17g},{row.width_se:.17g},"
                f"{row.coverage:.17g},{row.coverage_err:.17g},"
                f"{self.bias:.17g},{self.bias_se:.17g},{self.mad:.17g},{self.mad_se:.17g},"
                f"{self.trials_ok}"
            )
        return "\n".join(lines) + "\n"

    def power_csv(self, alpha):
        curve = self.power[alpha]
        lines = ["t,rejection_rate"]
        for t, rate in enumerate(curve, start=1):
            lines.append(f"{t},{rate:.17g}")
        return "\n".join(lines) + "\n"


def _mean_se(values):
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


def run_experiment(config, null_table=None):
    """Run ``trials`` seeded localizations and aggregate coverage, width,
    point-estimator bias/MAD and the per-candidate rejection curve.

    Trial-level errors are recorded in the report, not raised. p-values are
    level-free, so every alpha is evaluated from one run per trial.
    """
    rng = RandomStream(config.seed)
    family = make_score_family(config.score, delta=config.delta)
    table = null_table
    if table is None and config.test_method in ("empirical", "hybrid"):
        table = get_or_build_null_table(
            config.n, config.B, rng.substream("null-table"), workers=config.workers
        )

    def one_trial(i):
        trng = rng.substream("trial", i)
        data = generate(config.distribution, config.n, config.xi, trng, delta=config.delta)
        pv = candidate_pvalues(
            data, family, trng.substream("mcp"),
            test_method=config.test_method, combiner=config.combiner,
            B=config.B, null_table=table,
        )
        return pv

    results = {}
    failures = []
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(one_trial, i): i for i in range(config.trials)}
            for fut in concurrent.futures.as_completed(futures):
                i = futures[fut]
                try:
                    results[i] = fut.result()
                except McplocError as exc:
                    failures.append((i, str(exc)))
    else:
        for i in range(config.trials):
            try:
                results[i] = one_trial(i)
            except McplocError as exc:
                failures.append((i, str(exc)))
    failures.sort()

    ok_indices = sorted(results)
    trials_ok = len(ok_indices)
    if trials_ok == 0:
        raise ConfigurationError("every trial failed; see report failures")

    deviations = []
    abs_deviations = []
    widths = {a: [] for a in config.alphas}
    covers = {a: [] for a in config.alphas}
    reject_counts = np.zeros(config.n)
    for i in ok_indices:
        pv = results[i]
        est = int(np.argmax(pv.values)) + 1
        deviations.append(float(est - config.xi))
        abs_deviations.append(abs(float(est - config.xi)))
        reject_counts += pv.values <= config.power_alpha
        for a in config.alphas:
            cs = confidence_set(pv, a)
            widths[a].append(float(len(cs.members)))
            covers[a].append(1.0 if config.xi in cs.members else 0.0)

    rows = []
    for a in config.alphas:
        avg_w, w_se = _mean_se(widths[a])
        cov = math.fsum(covers[a]) / trials_ok
        cov_err = math.sqrt(cov * (1.0 - cov) / trials_ok)
        rows.append(AlphaSummary(a, avg_w, w_se, cov, cov_err))

    bias, bias_se = _mean_se(deviations)
    mad, mad_se = _mean_se(abs_deviations)
    return ExperimentReport(
        config=config.echo(),
        seed=config.seed,
        trials_ok=trials_ok,
        rows=rows,
        bias=bias,
        bias_se=bias_se,
        mad=mad,
        mad_se=mad_se,
        power={a: reject_counts / trials_ok for a in [config.power_alpha]},
        failures=failures,
    )


def _validate_masses(masses, label):
    arr = np.asarray(masses, dtype=float)
    if arr.ndim != 1 or not 1 <= arr.shape[0] <= 8:
        raise ConfigurationError(f"{label} must put mass on 1..8 atoms")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"{label} masses must be nonnegative and sum to 1")
    return arr


@dataclass
class NpOracleRow:
    score_id: str
    mean: float
    delta: float
    delta_se: float


@dataclass
class NpOracleReport:
    n: int
    trials: int
    lr_mean: float
    rows: list

    def min_delta_margin(self):
        """min over scores of (delta + 2 se); nonnegative means no score
        significantly beat the likelihood ratio."""
        return min(row.delta + 2.0 * row.delta_se for row in self.rows)

    def to_dict(self):
        return {
            "n": self.n,
            "trials": self.trials,
            "lr_mean": self.lr_mean,
            "rows": [row.__dict__ for row in self.rows],
        }


def _rank_functional(score_values, x_ref, x_new, thetas):
    s_ref = score_values[x_ref]
    s_new = score_values[x_new][:, None]
    lt = (s_ref < s_new).astype(float)
    eq = (s_ref == s_new).astype(float)
    return np.mean(lt + thetas * eq, axis=1)


def np_power_oracle(q_masses, r_masses, n, trials, rng, scores=None, n_scores=50):
    """Monte-Carlo comparison of the likelihood-ratio score against others.

    Samples X_1..X_n ~ R and X_{n+1} ~ Q, evaluates the normalized rank of
    s(X_{n+1}) among the rest for the likelihood-ratio score and for each
    challenger, and reports the paired difference with its standard error.
    Common random draws are shared across scores, so any score that is a
    monotone distortion of the likelihood ratio ties it exactly.
    """
    q = _validate_masses(q_masses, "Q")
    r = _validate_masses(r_masses, "R")
    if q.shape != r.shape:
        raise ConfigurationError("Q and R must share one atom set")
    if not 1 <= n <= 12:
        raise ConfigurationError(f"the oracle is sized for n <= 12, got {n}")
    k = q.shape[0]
    s_star = q / np.maximum(r, 1e-300)

    if scores is None:
        scores = rng.generator("scores").normal(size=(n_scores, k))
    x_ref = rng.generator("x-ref").choice(k, size=(trials, n), p=r)
    x_new = rng.generator("x-new").choice(k, size=trials, p=q)
    thetas = rng.generator("theta").random((trials, n))

    t_star = _rank_functional(s_star, x_ref, x_new, thetas)
    lr_mean = math.fsum(t_star) / trials
    rows = []
    for idx, s in enumerate(scores):
        t_s = _rank_functional(np.asarray(s, dtype=float), x_ref, x_new, thetas)
        mean = math.fsum(t_s) / trials
        diff = t_star - t_s
        delta, delta_se = _mean_se(diff.tolist())
        rows.append(NpOracleRow(f"s{idx}", mean, delta, delta_se))
    return NpOracleReport(n=n, trials=trials, lr_mean=lr_mean, rows=rows)


def np_rank_expectation(q_masses, r_masses, n, score_values):
    """Exact E[T_n[s]] by enumerating every outcome; the independent oracle
    for the Monte-Carlo estimates (expected theta contribution is 1/2)."""
    q = _validate_masses(q_masses, "Q")
    r = _validate_masses(r_masses, "R")
    s = np.asarray(score_values, dtype=float)
    k = q.shape[0]
    if k ** (n + 1) > 2_000_000:
        raise ConfigurationError("enumeration too large; reduce atoms or n")
    terms = []
    for outcome in itertools.product(range(k), repeat=n + 1):
        ref, new = outcome[:n], outcome[n]
        prob = q[new] * math.prod(r[a] for a in ref)
        if prob == 0.0:
            continue
        t = math.fsum(
            (1.0 if s[a] < s[new] else 0.0) + (0.5 if s[a] == s[new] else 0.0) for a in ref
        ) / n
        terms.append(prob * t)
    return math.fsum(terms)

"""Nonparametric test battery for comparing solution populations.

Four hypotheses drive the comparison: generated code carries fewer smells
per kLOC (H1) and lower cognitive complexity per kLOC (H2) than user code,
and its runtime/memory percentile ranks sit above the 50th percentile
(H3 resources, H4 time).  Mann-Whitney U covers the two-sample questions,
a one-sample Wilcoxon signed-rank the percentile ones, with Spearman rank
correlation and Cohen's d as supporting measures.

Small samples get exact p-values: the permutation distributions are built
by integer dynamic programming over doubled midranks, so tied data stays
exact.  Larger samples use the usual normal approximations with tie and
continuity corrections.  All tests are one-sided by default because every
hypothesis is directional; pass ``two_sided=True`` in the config to
override.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from itertools import permutations
from statistics import fmean

from scipy.stats import t as _student_t

from .metrics import MetricRecord

EXACT_LIMIT_MANN_WHITNEY = 12  # pooled size at or under this enumerates
EXACT_LIMIT_WILCOXON = 20  # non-zero differences at or under this
EXACT_LIMIT_SPEARMAN = 8  # paired length at or under this

DEFAULT_ALPHA = 0.05
BONFERRONI_CORRECTIONS = 4


class StatsError(Exception):
    """Base for statistics-domain failures."""


class DegenerateSample(StatsError):
    """Every pooled value identical; no rank test can discriminate."""


class AllZeroDifferences(StatsError):
    """Signed-rank sample equals the null point exactly, everywhere."""


class LengthMismatch(StatsError):
    """Paired sequences of different lengths."""


class ConstantSequence(StatsError):
    """A correlation input with zero rank variance."""


class ZeroVariance(StatsError):
    """Effect size undefined: pooled variance is zero."""


class EmptyIntersection(StatsError):
    """No problem is covered by both record sets."""


class Alternative(Enum):
    LESS = "Less"
    GREATER = "Greater"
    TWO_SIDED = "TwoSided"


class Method(Enum):
    MANN_WHITNEY_U = "MannWhitneyU"
    WILCOXON_SIGNED_RANK = "WilcoxonSignedRank"
    SPEARMAN_RHO = "SpearmanRho"


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: Method
    alternative: Alternative
    n1: int
    n2: int
    exact: bool
    note: str | None = None


# --------------------------------------------------------------------------
# Ranking helpers


def midranks(values) -> list[float]:
    """1-based ranks with ties assigned the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _doubled(ranks) -> list[int]:
    # Midranks are multiples of 1/2; doubling keeps the DP in integers.
    return [round(2 * r) for r in ranks]


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2))


# --------------------------------------------------------------------------
# Mann-Whitney U


def _subset_sum_counts(doubled: list[int], size: int) -> list[int]:
    """counts[s] = number of ``size``-subsets with doubled-rank sum s."""
    top = sum(doubled)
    table = [[0] * (top + 1) for _ in range(size + 1)]
    table[0][0] = 1
    for d in doubled:
        for chosen in range(min(size, len(doubled)), 0, -1):
            prev = table[chosen - 1]
            row = table[chosen]
            for s in range(top - d, -1, -1):
                if prev[s]:
                    row[s + d] += prev[s]
    return table[size]


def mann_whitney_u(
    a, b, alternative: Alternative = Alternative.LESS
) -> TestResult:
    """Rank-sum test of two independent samples.

    The statistic is U for the first sample.  Pooled sizes up to
    ``EXACT_LIMIT_MANN_WHITNEY`` get the exact permutation p-value; larger
    samples use the normal approximation with tie and continuity
    corrections.
    """
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    pooled = list(a) + list(b)
    if all(v == pooled[0] for v in pooled):
        raise DegenerateSample(
            "all values identical across both samples"
        )
    ranks = midranks(pooled)
    u1 = sum(ranks[:n1]) - n1 * (n1 + 1) / 2
    exact = n1 + n2 <= EXACT_LIMIT_MANN_WHITNEY
    if exact:
        p = _mwu_exact_p(ranks, n1, u1, alternative)
    else:
        p = _mwu_approx_p(ranks, n1, n2, u1, alternative)
    return TestResult(
        statistic=u1,
        p_value=p,
        method=Method.MANN_WHITNEY_U,
        alternative=alternative,
        n1=n1,
        n2=n2,
        exact=exact,
    )


def _mwu_exact_p(ranks, n1: int, u1: float, alternative: Alternative) -> float:
    doubled = _doubled(ranks)
    counts = _subset_sum_counts(doubled, n1)
    offset = n1 * (n1 + 1)  # doubled min-rank-sum term
    u2_obs = round(2 * u1)
    center = n1 * (len(ranks) - n1)  # doubled mean: 2·(n1·n2/2)
    favorable = 0
    total = 0
    for s, ways in enumerate(counts):
        if not ways:
            continue
        u2 = s - offset
        total += ways
        if alternative is Alternative.LESS:
            hit = u2 <= u2_obs
        elif alternative is Alternative.GREATER:
            hit = u2 >= u2_obs
        else:
            hit = abs(u2 - center) >= abs(u2_obs - center)
        if hit:
            favorable += ways
    return favorable / total


def _subset_sum_moments(ranks, size: int) -> tuple[float, float]:
    """Exact second/fourth central moments of a random subset's rank sum.

    Standard finite-population sampling identities over the centered rank
    power sums; the third moment vanishes because a midrank multiset is
    symmetric under rank reflection.
    """
    n = len(ranks)
    mean = fmean(ranks)
    centered = [r - mean for r in ranks]
    p_sq = sum(v * v for v in centered)
    p_qu = sum(v**4 for v in centered)
    inc1 = size / n
    inc2 = inc1 * (size - 1) / (n - 1)
    inc3 = inc2 * (size - 2) / (n - 2)
    inc4 = inc3 * (size - 3) / (n - 3) if n > 3 else 0.0
    m2 = (inc1 - inc2) * p_sq
    m4 = (
        inc1 * p_qu
        - 4 * inc2 * p_qu
        + 3 * inc2 * (p_sq * p_sq - p_qu)
        + 6 * inc3 * (2 * p_qu - p_sq * p_sq)
        + inc4 * (3 * p_sq * p_sq - 6 * p_qu)
    )
    return m2, m4


def _edgeworth_cdf(z: float, excess_kurtosis: float) -> float:
    """Normal CDF refined by the symmetric fourth-moment Edgeworth term."""
    density = math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    value = _phi(z) - excess_kurtosis / 24 * (z**3 - 3 * z) * density
    return min(1.0, max(0.0, value))


def _mwu_approx_p(ranks, n1, n2, u1, alternative: Alternative) -> float:
    m2, m4 = _subset_sum_moments(ranks, n1)
    if m2 <= 0:
        raise DegenerateSample("tie structure leaves zero variance")
    sigma = math.sqrt(m2)
    kurt = m4 / (m2 * m2) - 3
    mean = n1 * n2 / 2
    if alternative is Alternative.LESS:
        return _edgeworth_cdf((u1 - mean + 0.5) / sigma, kurt)
    if alternative is Alternative.GREATER:
        return _edgeworth_cdf(-(u1 - mean - 0.5) / sigma, kurt)
    z = max(0.0, (abs(u1 - mean) - 0.5)) / sigma
    return min(1.0, 2 * (1 - _edgeworth_cdf(z, kurt)))


# --------------------------------------------------------------------------
# Wilcoxon signed-rank


def _signed_sum_counts(doubled: list[int]) -> list[int]:
    """counts[s] = number of sign patterns with positive-part sum s."""
    top = sum(doubled)
    counts = [0] * (top + 1)
    counts[0] = 1
    for d in doubled:
        for s in range(top - d, -1, -1):
            if counts[s]:
                counts[s + d] += counts[s]
    return counts


def wilcoxon_signed_rank(
    sample, mu0: float, alternative: Alternative = Alternative.GREATER
) -> TestResult:
    """One-sample signed-rank test against the point ``mu0``.

    Differences equal to zero are discarded before ranking.  The statistic
    is W+, the sum of midranks of the positive differences.
    """
    if not sample:
        raise ValueError("sample must be non-empty")
    diffs = [x - mu0 for x in sample if x != mu0]
    if not diffs:
        raise AllZeroDifferences(f"every value equals {mu0}")
    n = len(diffs)
    ranks = midranks([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    exact = n <= EXACT_LIMIT_WILCOXON
    if exact:
        p = _wilcoxon_exact_p(ranks, w_plus, alternative)
    else:
        p = _wilcoxon_approx_p(ranks, w_plus, alternative)
    return TestResult(
        statistic=w_plus,
        p_value=p,
        method=Method.WILCOXON_SIGNED_RANK,
        alternative=alternative,
        n1=n,
        n2=0,
        exact=exact,
    )


def _wilcoxon_exact_p(ranks, w_plus: float, alternative: Alternative) -> float:
    doubled = _doubled(ranks)
    counts = _signed_sum_counts(doubled)
    w2_obs = round(2 * w_plus)
    center = sum(doubled) // 2  # doubled distribution is symmetric here
    favorable = 0
    total = 0
    for s, ways in enumerate(counts):
        if not ways:
            continue
        total += ways
        if alternative is Alternative.GREATER:
            hit = s >= w2_obs
        elif alternative is Alternative.LESS:
            hit = s <= w2_obs
        else:
            hit = abs(s - center) >= abs(w2_obs - center)
        if hit:
            favorable += ways
    return favorable / total


def _wilcoxon_approx_p(ranks, w_plus: float, alternative: Alternative) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    variance = sum(r * r for r in ranks) / 4  # tie-corrected by midranks
    sigma = math.sqrt(variance)
    if alternative is Alternative.GREATER:
        return _phi(-(w_plus - mean - 0.5) / sigma)
    if alternative is Alternative.LESS:
        return _phi((w_plus - mean + 0.5) / sigma)
    z = max(0.0, abs(w_plus - mean) - 0.5) / sigma
    return min(1.0, 2 * (1 - _phi(z)))


# --------------------------------------------------------------------------
# Spearman rank correlation


def spearman_rho(
    x, y, alternative: Alternative = Alternative.TWO_SIDED
) -> TestResult:
    """Pearson correlation of midranks with permutation or t-based p."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} points")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 paired points")
    rx = midranks(x)
    ry = midranks(y)
    if len(set(rx)) == 1 or len(set(ry)) == 1:
        raise ConstantSequence("a sequence with no rank variation")
    rho = _pearson(rx, ry)
    exact = n <= EXACT_LIMIT_SPEARMAN
    if exact:
        p = _spearman_exact_p(rx, ry, rho, alternative)
    else:
        p = _spearman_approx_p(rho, n, alternative)
    return TestResult(
        statistic=rho,
        p_value=p,
        method=Method.SPEARMAN_RHO,
        alternative=alternative,
        n1=n,
        n2=n,
        exact=exact,
    )


def _pearson(xs, ys) -> float:
    mx = fmean(xs)
    my = fmean(ys)
    num = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    den = math.sqrt(
        sum((a - mx) ** 2 for a in xs) * sum((b - my) ** 2 for b in ys)
    )
    return num / den


_PERMUTATION_SLACK = 1e-9


def _spearman_exact_p(rx, ry, rho, alternative: Alternative) -> float:
    # Denominators are permutation-invariant, so comparing cross products
    # is equivalent to comparing correlations and much cheaper.
    mx = fmean(rx)
    my = fmean(ry)
    cx = [r - mx for r in rx]
    cy = tuple(r - my for r in ry)
    dot_obs = sum(a * b for a, b in zip(cx, cy))
    favorable = 0
    total = 0
    for perm in permutations(cy):
        dot = sum(a * b for a, b in zip(cx, perm))
        total += 1
        if alternative is Alternative.GREATER:
            hit = dot >= dot_obs - _PERMUTATION_SLACK
        elif alternative is Alternative.LESS:
            hit = dot <= dot_obs + _PERMUTATION_SLACK
        else:
            hit = abs(dot) >= abs(dot_obs) - _PERMUTATION_SLACK
        if hit:
            favorable += 1
    return favorable / total


def _spearman_approx_p(rho: float, n: int, alternative: Alternative) -> float:
    if 1 - rho * rho <= 1e-12:
        t_stat = math.inf if rho > 0 else -math.inf
    else:
        t_stat = rho * math.sqrt((n - 2) / (1 - rho * rho))
    df = n - 2
    if alternative is Alternative.GREATER:
        return float(_student_t.sf(t_stat, df))
    if alternative is Alternative.LESS:
        return float(_student_t.sf(-t_stat, df))
    return float(min(1.0, 2 * _student_t.sf(abs(t_stat), df)))


# --------------------------------------------------------------------------
# Effect size


def cohens_d(a, b) -> float:
    """Standardized mean difference with a pooled (n−1)-weighted sd."""
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ValueError("need at least 2 values per sample")
    ma = fmean(a)
    mb = fmean(b)
    v1 = sum((v - ma) ** 2 for v in a) / (n1 - 1)
    v2 = sum((v - mb) ** 2 for v in b) / (n2 - 1)
    pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
    if pooled <= 0:
        raise ZeroVariance("pooled variance is zero")
    return (ma - mb) / math.sqrt(pooled)


def cohens_d_one_sample(sample, mu0: float) -> float:
    """Mean shift from ``mu0`` in units of the sample's own sd.

    Convention note: for percentile-rank hypotheses this is computed on
    (value − mu0) against zero, not on the raw two-population layout.
    """
    if len(sample) < 2:
        raise ValueError("need at least 2 values")
    shifted = [v - mu0 for v in sample]
    m = fmean(shifted)
    var = sum((v - m) ** 2 for v in shifted) / (len(shifted) - 1)
    if var <= 0:
        raise ZeroVariance("sample variance is zero")
    return m / math.sqrt(var)


def effect_band(d: float) -> str:
    """Magnitude label with thresholds at 0.2 / 0.5 / 0.8."""
    magnitude = abs(d)
    if magnitude < 0.2:
        return "negligible"
    if magnitude < 0.5:
        return "small"
    if magnitude < 0.8:
        return "medium"
    return "large"


# --------------------------------------------------------------------------
# Hypothesis battery


@dataclass(frozen=True)
class StatsConfig:
    alpha: float = DEFAULT_ALPHA
    corrections: int = BONFERRONI_CORRECTIONS
    two_sided: bool = False

    @property
    def alpha_adjusted(self) -> float:
        return self.alpha / self.corrections


@dataclass(frozen=True)
class HypothesisOutcome:
    hypothesis_id: str
    label: str
    test: TestResult
    effect_size_d: float | None
    alpha_adjusted: float
    accepted: bool


_RANK_NULL = 50.0


def _grouped_values(records, attr: str) -> dict[str, list[float]]:
    grouped: dict[str, list[float]] = defaultdict(list)
    for record in records:
        value = getattr(record, attr)
        if value is not None:
            grouped[record.problem_slug].append(value)
    return grouped


def _two_sample_inputs(generated, user, attr: str):
    """Generated values and per-problem user means over the shared problems.

    Values are sorted before any float reduction so results are bit-stable
    across input orderings.
    """
    gen_by_slug = _grouped_values(generated, attr)
    user_by_slug = _grouped_values(user, attr)
    common = sorted(set(gen_by_slug) & set(user_by_slug))
    if not common:
        raise EmptyIntersection(f"no shared problems carry {attr}")
    gen_sample = [v for slug in common for v in sorted(gen_by_slug[slug])]
    user_means = [fmean(sorted(user_by_slug[slug])) for slug in common]
    return gen_sample, user_means


def _flat_values(records, attr: str) -> list[float]:
    out = [getattr(r, attr) for r in records]
    return sorted(v for v in out if v is not None)


def _degenerate(method: Method, alternative: Alternative, n1: int, n2: int,
                note: str) -> TestResult:
    return TestResult(
        statistic=0.0,
        p_value=1.0,
        method=method,
        alternative=alternative,
        n1=n1,
        n2=n2,
        exact=True,
        note=note,
    )


def run_battery(
    generated: list[MetricRecord],
    user: list[MetricRecord],
    config: StatsConfig | None = None,
) -> list[HypothesisOutcome]:
    """The four-hypothesis comparison, Bonferroni-adjusted as a family.

    H1/H2 compare generated per-kLOC smell and complexity figures against
    per-problem user means over the problems both sides solved (one-sided:
    generated lower).  H3/H4 test generated memory and runtime percentile
    ranks against the 50th percentile (one-sided: above).  Effect sizes are
    attached only to accepted hypotheses; degenerate data yields p = 1 and
    an explanatory note instead of an error.
    """
    if config is None:
        config = StatsConfig()
    adjusted = config.alpha_adjusted
    outcomes: list[HypothesisOutcome] = []

    two_sample_plan = [
        ("H1", "quality", "smells_per_kloc"),
        ("H2", "understandability", "complexity_per_kloc"),
    ]
    for hid, label, attr in two_sample_plan:
        gen_sample, user_means = _two_sample_inputs(generated, user, attr)
        alternative = (
            Alternative.TWO_SIDED if config.two_sided else Alternative.LESS
        )
        try:
            result = mann_whitney_u(gen_sample, user_means, alternative)
        except DegenerateSample:
            result = _degenerate(
                Method.MANN_WHITNEY_U, alternative,
                len(gen_sample), len(user_means),
                "all values identical across both samples",
            )
        accepted = result.p_value < adjusted
        effect = None
        if accepted:
            try:
                effect = cohens_d(gen_sample, user_means)
            except (ValueError, ZeroVariance):
                effect = None
        outcomes.append(HypothesisOutcome(
            hypothesis_id=hid,
            label=label,
            test=result,
            effect_size_d=effect,
            alpha_adjusted=adjusted,
            accepted=accepted,
        ))

    rank_plan = [
        ("H3", "resources", "memory_rank"),
        ("H4", "time", "runtime_rank"),
    ]
    for hid, label, attr in rank_plan:
        ranks = _flat_values(generated, attr)
        alternative = (
            Alternative.TWO_SIDED if config.two_sided else Alternative.GREATER
        )
        if not ranks:
            result = _degenerate(
                Method.WILCOXON_SIGNED_RANK, alternative, 0, 0,
                "no rank data",
            )
        else:
            try:
                result = wilcoxon_signed_rank(ranks, _RANK_NULL, alternative)
            except AllZeroDifferences:
                result = _degenerate(
                    Method.WILCOXON_SIGNED_RANK, alternative, 0, 0,
                    f"every rank equals {_RANK_NULL:g}",
                )
        accepted = result.p_value < adjusted
        effect = None
        if accepted:
            try:
                effect = cohens_d_one_sample(ranks, _RANK_NULL)
            except (ValueError, ZeroVariance):
                effect = None
        outcomes.append(HypothesisOutcome(
            hypothesis_id=hid,
            label=label,
            test=result,
            effect_size_d=effect,
            alpha_adjusted=adjusted,
            accepted=accepted,
        ))

    return outcomes

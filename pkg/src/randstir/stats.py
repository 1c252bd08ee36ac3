"""Goodness-of-fit tests and rate fitting used by the verification harness.

All tests report a statistic and a fixed-level threshold rather than a
p-value; ``pass`` means the statistic is below the threshold.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import chi2

ALPHA = 1e-3


@dataclass(frozen=True)
class GofResult:
    statistic: float
    threshold: float
    passed: bool
    n_samples: int
    name: str = ""

    def as_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: statistic={self.statistic:.6g} threshold={self.threshold:.6g} n={self.n_samples}"


def _result(stat, threshold, n, name):
    return GofResult(float(stat), float(threshold), bool(stat < threshold), int(n), name)


def poisson_pmf(lam, k):
    if lam <= 0 or k < 0:
        raise ValueError("need lam > 0 and k >= 0")
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def poisson_binned(lam, kmax):
    """Probabilities of ``0, 1, ..., kmax-1`` and of the tail ``>= kmax``."""
    head = [poisson_pmf(lam, k) for k in range(kmax)]
    return np.array(head + [max(0.0, 1.0 - math.fsum(head))])


def pool_bins(observed, expected_counts, min_expected=5.0):
    """Merge adjacent categories left to right until each has expected >= min_expected.

    A short final group is folded into the previous one.
    """
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected_counts):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if obs:
            obs[-1] += o_acc
            exp[-1] += e_acc
        else:
            obs.append(o_acc)
            exp.append(e_acc)
    return np.array(obs), np.array(exp)


def chi_square_gof(observed, expected, significance=ALPHA, name="chi-square"):
    """Pearson test of category counts against category probabilities.

    ``expected`` must be probabilities over the same categories as
    ``observed`` and sum to one.
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ValueError("observed and expected must have the same categories")
    total = observed.sum()
    if total < 1000:
        raise ValueError(f"need at least 1000 observations, got {total:g}")
    if abs(expected.sum() - 1) > 1e-9:
        raise ValueError("expected probabilities must sum to 1")
    obs, exp = pool_bins(observed, expected * total)
    if len(obs) < 2:
        raise ValueError("fewer than two pooled bins (zero degrees of freedom)")
    stat = np.sum((obs - exp) ** 2 / exp)
    return _result(stat, chi2.ppf(1 - significance, len(obs) - 1), total, name)


def ks_critical(significance=ALPHA):
    """Asymptotic Kolmogorov constant ``c(alpha)``; ``c(1e-3)`` is about 1.95."""
    return math.sqrt(-0.5 * math.log(significance / 2))


def ks_statistic(samples, cdf, significance=ALPHA, name="ks"):
    """One-sample Kolmogorov-Smirnov test against a vectorized ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    stat = max(np.max(i / n - f), np.max(f - (i - 1) / n))
    return _result(stat, ks_critical(significance) / math.sqrt(n), n, name)


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def two_sample_ks(a, b, significance=ALPHA, name="ks2"):
    """Two-sample Kolmogorov-Smirnov test with effective size ``ab/(a+b)``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / len(a)
    fb = np.searchsorted(b, pts, side="right") / len(b)
    stat = np.max(np.abs(fa - fb))
    m = len(a) * len(b) / (len(a) + len(b))
    return _result(stat, ks_critical(significance) / math.sqrt(m), min(len(a), len(b)), name)


def loglog_slope(xs, ys):
    """Least-squares line through ``(log x, log y)``: ``(slope, intercept, r2)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 3:
        raise ValueError("need at least three points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def poisson_count_gof(values, lam, significance=ALPHA, name="poisson"):
    """Chi-square test of integer ``values`` against Poisson(``lam``)."""
    values = np.asarray(values, dtype=np.int64)
    kmax = int(values.max()) + 1
    observed = np.bincount(values, minlength=kmax + 1)[: kmax + 1]
    return chi_square_gof(observed, poisson_binned(lam, kmax), significance, name)


def poisson_joint_gof(a, b, lam_a, lam_b, significance=ALPHA, name="poisson-joint"):
    """Chi-square test of pairs ``(a, b)`` against independent Poisson laws.

    Categories are ``0..kmax-1`` and ``>= kmax`` per coordinate, flattened
    row-major.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    observed = np.zeros((ka + 1, kb + 1))
    np.add.at(observed, (a, b), 1)
    expected = np.outer(poisson_binned(lam_a, ka), poisson_binned(lam_b, kb))
    return chi_square_gof(observed.ravel(), expected.ravel(), significance, name)

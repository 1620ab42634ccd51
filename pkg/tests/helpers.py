"""Shared oracles for the test-suite."""
import numpy as np
from scipy import stats


def poisson_gof_pvalue(samples, lam, min_expected=5.0):
    """Chi-square goodness of fit of integer samples against Poisson(lam).

    Bins are single values from 0 upward, with the left and right tails
    pooled until each pooled bin expects at least ``min_expected`` hits.
    """
    samples = np.asarray(samples)
    n = samples.size
    hi = int(max(samples.max(), stats.poisson.ppf(1 - 1e-12, lam))) + 1
    support = np.arange(hi + 1)
    probs = stats.poisson.pmf(support, lam)
    probs[-1] += stats.poisson.sf(hi, lam)
    observed = np.bincount(np.minimum(samples, hi), minlength=hi + 1).astype(float)
    exp_bins, obs_bins = [], []
    acc_e = acc_o = 0.0
    for e, o in zip(probs * n, observed):
        acc_e += e
        acc_o += o
        if acc_e >= min_expected:
            exp_bins.append(acc_e)
            obs_bins.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 and exp_bins:
        exp_bins[-1] += acc_e
        obs_bins[-1] += acc_o
    exp_bins, obs_bins = np.array(exp_bins), np.array(obs_bins)
    if exp_bins.size < 2:
        return 1.0
    return float(stats.chisquare(obs_bins, exp_bins * obs_bins.sum() / exp_bins.sum()).pvalue)


def two_sample_hist_pvalue(a, b):
    """Chi-square homogeneity test on the joint histogram of two integer samples."""
    a, b = np.asarray(a), np.asarray(b)
    hi = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=hi + 1)
    cb = np.bincount(b, minlength=hi + 1)
    keep = (ca + cb) >= 10
    table = np.vstack([np.append(ca[keep], ca[~keep].sum()), np.append(cb[keep], cb[~keep].sum())])
    table = table[:, table.sum(axis=0) > 0]
    return float(stats.chi2_contingency(table).pvalue)

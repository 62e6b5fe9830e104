"""Hot numeric kernels with a Numba fast path and a pure-NumPy fallback.

Random numbers are always drawn by the caller with a seeded
``numpy.random.Generator`` and passed in as arrays, so the backend switch
never changes the random stream.  The counting kernels are exact integer
reductions and give bit-identical results on both backends; the
floating-point kernels agree up to summation order (~1e-15 relative).
"""
import numpy as np

from ._backend import NUMBA_ENABLED


def _log1p_mixture_ratio_numpy(x, sent, mu):
    """ln(1 + sum_{s' != s} exp(-2 mu^2 - 2 mu (x_s - x_s'))) per sample.

    ``x`` is an (M, S) array of the real field quadratures at the symbol
    slots (each N(0, 1/2)); ``sent`` holds the sent-symbol index per sample.
    This is the log of S * P(E) / P(E|s) for the equal-weight Gaussian
    mixture, reduced to the coordinates on which the ratio depends.
    """
    m, _ = x.shape
    rows = np.arange(m)
    a = 2.0 * mu * x
    a = a - a[rows, sent][:, None] - 2.0 * mu * mu
    a[rows, sent] = -np.inf
    amax = np.maximum(np.max(a, axis=1), 0.0)
    total = np.exp(-amax) + np.sum(np.exp(a - amax[:, None]), axis=1)
    return amax + np.log(total)


def _count_argmax_hits_numpy(counts, target):
    """Number of rows whose strict unique maximum sits at column ``target``."""
    mx = counts.max(axis=1)
    unique = np.sum(counts == mx[:, None], axis=1) == 1
    return int(np.sum(unique & (counts[:, target] == mx) & (mx > 0)))


def _count_threshold_outcomes_numpy(counts, threshold, target):
    """(accepted, hits): frames with exactly one detector >= threshold."""
    over = counts >= threshold
    n_over = over.sum(axis=1)
    accepted = n_over == 1
    hits = accepted & over[:, target]
    return int(np.sum(accepted)), int(np.sum(hits))


if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True)
    def _log1p_mixture_ratio_numba(x, sent, mu):  # pragma: no cover - jitted
        m, s = x.shape
        out = np.empty(m)
        two_mu = 2.0 * mu
        off = 2.0 * mu * mu
        for i in range(m):
            base = two_mu * x[i, sent[i]] + off
            amax = 0.0
            for j in range(s):
                if j == sent[i]:
                    continue
                a = two_mu * x[i, j] - base
                if a > amax:
                    amax = a
            total = np.exp(-amax)
            for j in range(s):
                if j == sent[i]:
                    continue
                total += np.exp(two_mu * x[i, j] - base - amax)
            out[i] = amax + np.log(total)
        return out

    @njit(cache=True)
    def _count_argmax_hits_numba(counts, target):  # pragma: no cover - jitted
        m, s = counts.shape
        hits = 0
        for i in range(m):
            mx = counts[i, 0]
            ties = 1
            arg = 0
            for j in range(1, s):
                c = counts[i, j]
                if c > mx:
                    mx = c
                    ties = 1
                    arg = j
                elif c == mx:
                    ties += 1
            if ties == 1 and arg == target and mx > 0:
                hits += 1
        return hits

    @njit(cache=True)
    def _count_threshold_outcomes_numba(counts, threshold, target):  # pragma: no cover
        m, s = counts.shape
        accepted = 0
        hits = 0
        for i in range(m):
            n_over = 0
            winner = -1
            for j in range(s):
                if counts[i, j] >= threshold:
                    n_over += 1
                    winner = j
            if n_over == 1:
                accepted += 1
                if winner == target:
                    hits += 1
        return accepted, hits

    log1p_mixture_ratio = _log1p_mixture_ratio_numba
    count_argmax_hits = _count_argmax_hits_numba
    count_threshold_outcomes = _count_threshold_outcomes_numba
else:
    log1p_mixture_ratio = _log1p_mixture_ratio_numpy
    count_argmax_hits = _count_argmax_hits_numpy
    count_threshold_outcomes = _count_threshold_outcomes_numpy

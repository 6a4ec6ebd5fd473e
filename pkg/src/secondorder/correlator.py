"""Streaming intensity-correlation statistics.

Moment sums are kept per jackknife block so that accumulators merge exactly
(sums add) and standard errors come out of the same pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ShapeMismatchError

DEFAULT_BLOCKS = 50
_FIELDS = ("sum_IC", "sum_IT", "sum_ICIT", "sum_IC2", "sum_IT2")


@dataclass(frozen=True)
class CorrelationResult:
    mean_IC: np.ndarray
    mean_IT: np.ndarray
    fluct_corr: np.ndarray  # <dI_C dI_T>
    normalized: np.ndarray  # <dI_C dI_T> / (<I_C><I_T>), i.e. g2 - 1
    std_error: np.ndarray  # jackknife error of fluct_corr
    normalized_std_error: np.ndarray
    n: int

    def peak_normalized(self) -> tuple[np.ndarray, np.ndarray]:
        """``fluct_corr`` and its error divided by the maximum of ``fluct_corr``."""
        peak = float(np.max(self.fluct_corr))
        return self.fluct_corr / peak, self.std_error / abs(peak)


class CorrelationAccumulator:
    """Moment sums of ``(I_C, I_T)`` per scan point, split into jackknife blocks.

    Every sum array has shape ``(n_blocks, *shape)``; ``counts`` has shape
    ``(n_blocks,)``. ``n`` is the total number of samples.
    """

    def __init__(self, shape=(), n_blocks: int = DEFAULT_BLOCKS):
        self.shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        self.n_blocks = int(n_blocks)
        self.counts = np.zeros(self.n_blocks, dtype=np.int64)
        for name in _FIELDS:
            setattr(self, name, np.zeros((self.n_blocks,) + self.shape))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def copy(self) -> "CorrelationAccumulator":
        out = CorrelationAccumulator(self.shape, self.n_blocks)
        out.counts = self.counts.copy()
        for name in _FIELDS:
            setattr(out, name, getattr(self, name).copy())
        return out

    def add(self, I_C, I_T, block: int | None = None) -> "CorrelationAccumulator":
        """Add one sample. Without ``block`` samples are dealt round-robin."""
        I_C = np.broadcast_to(np.asarray(I_C, dtype=float), self.shape)
        I_T = np.broadcast_to(np.asarray(I_T, dtype=float), self.shape)
        if not (np.all(np.isfinite(I_C)) and np.all(np.isfinite(I_T))):
            raise ValueError("sample intensities must be finite")
        b = self.n % self.n_blocks if block is None else int(block) % self.n_blocks
        self.counts[b] += 1
        self.sum_IC[b] += I_C
        self.sum_IT[b] += I_T
        self.sum_ICIT[b] += I_C * I_T
        self.sum_IC2[b] += I_C * I_C
        self.sum_IT2[b] += I_T * I_T
        return self

    def add_batch(self, I_C, I_T, indices, outer: bool = False) -> "CorrelationAccumulator":
        """Add many samples; row ``r`` goes to block ``indices[r] % n_blocks``.

        With ``outer=True`` the rows are ``(n, nC)`` and ``(n, nT)`` intensity
        vectors and every ``(x_C, x_T)`` combination is accumulated, giving a
        ``(nC, nT)`` map.
        """
        I_C = np.asarray(I_C, dtype=float)
        I_T = np.asarray(I_T, dtype=float)
        blocks = np.asarray(indices, dtype=np.int64) % self.n_blocks
        for b in np.unique(blocks):
            sel = blocks == b
            c, t = I_C[sel], I_T[sel]
            self.counts[b] += int(sel.sum())
            if outer:
                nT = t.shape[1]
                nC = c.shape[1]
                self.sum_IC[b] += np.broadcast_to(c.sum(axis=0)[:, None], (nC, nT))
                self.sum_IT[b] += np.broadcast_to(t.sum(axis=0)[None, :], (nC, nT))
                self.sum_ICIT[b] += c.T @ t
                self.sum_IC2[b] += np.broadcast_to((c * c).sum(axis=0)[:, None], (nC, nT))
                self.sum_IT2[b] += np.broadcast_to((t * t).sum(axis=0)[None, :], (nC, nT))
            else:
                self.sum_IC[b] += c.sum(axis=0)
                self.sum_IT[b] += t.sum(axis=0)
                self.sum_ICIT[b] += (c * t).sum(axis=0)
                self.sum_IC2[b] += (c * c).sum(axis=0)
                self.sum_IT2[b] += (t * t).sum(axis=0)
        return self


def accumulate(acc: CorrelationAccumulator, sample, block: int | None = None) -> CorrelationAccumulator:
    """Add a :class:`~secondorder.speckle.DetectorSample` (anything with ``I_C``/``I_T``)."""
    return acc.add(sample.I_C, sample.I_T, block)


def merge(a: CorrelationAccumulator, b: CorrelationAccumulator) -> CorrelationAccumulator:
    if a.shape != b.shape or a.n_blocks != b.n_blocks:
        raise ShapeMismatchError(f"cannot merge accumulators of shape {a.shape}/{a.n_blocks} and {b.shape}/{b.n_blocks}")
    out = CorrelationAccumulator(a.shape, a.n_blocks)
    out.counts = a.counts + b.counts
    for name in _FIELDS:
        setattr(out, name, getattr(a, name) + getattr(b, name))
    return out


def tree_merge(accs: list[CorrelationAccumulator]) -> CorrelationAccumulator:
    """Deterministic pairwise reduction in list order."""
    if not accs:
        raise ValueError("nothing to merge")
    level = list(accs)
    while len(level) > 1:
        nxt = [merge(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _estimates(n, s_c, s_t, s_ct):
    mc = s_c / n
    mt = s_t / n
    cov = s_ct / n - mc * mt
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = cov / (mc * mt)
    return mc, mt, cov, norm


def finalize(acc: CorrelationAccumulator) -> CorrelationResult:
    """Means, fluctuation correlation, g2 - 1 and delete-a-block jackknife errors."""
    n = acc.n
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, have {n}")
    tot = {name: getattr(acc, name).sum(axis=0) for name in _FIELDS}
    mc, mt, cov, norm = _estimates(n, tot["sum_IC"], tot["sum_IT"], tot["sum_ICIT"])

    used = np.flatnonzero(acc.counts > 0)
    g = used.size
    if g >= 2:
        covs, norms = [], []
        for b in used:
            nb = n - acc.counts[b]
            _, _, c_b, n_b = _estimates(
                nb,
                tot["sum_IC"] - acc.sum_IC[b],
                tot["sum_IT"] - acc.sum_IT[b],
                tot["sum_ICIT"] - acc.sum_ICIT[b],
            )
            covs.append(c_b)
            norms.append(n_b)
        covs, norms = np.array(covs), np.array(norms)
        factor = (g - 1) / g
        se = np.sqrt(factor * np.sum((covs - covs.mean(axis=0)) ** 2, axis=0))
        with np.errstate(invalid="ignore"):  # zero mean intensity gives nan, as intended
            se_norm = np.sqrt(factor * np.sum((norms - norms.mean(axis=0)) ** 2, axis=0))
    else:
        se = np.full_like(cov, np.nan)
        se_norm = np.full_like(cov, np.nan)
    return CorrelationResult(mc, mt, cov, norm, se, se_norm, n)


def bucket_integrate(result, axis: int = 1, weights=None) -> np.ndarray:
    """Sum the fluctuation correlation over the T-detector axis.

    ``result`` is a :class:`CorrelationResult` or a plain ``(x_C, x_T)`` array.
    ``weights`` (quadrature weights along the summed axis) default to 1.
    """
    vals = result.fluct_corr if isinstance(result, CorrelationResult) else np.asarray(result, dtype=float)
    if weights is None:
        return vals.sum(axis=axis)
    return np.tensordot(vals, np.asarray(weights, dtype=float), axes=([axis], [0]))

"""Evaluation of the discrete convolution ``p^n = sum_k omega_{n-k} e^k``.

Two engines share one interface:

* :class:`DirectConvolution` keeps the whole history and sums it exactly.
* :class:`BlockLadder` is the fast-and-oblivious variant.  The most recent
  lags are summed exactly from a short head buffer.  Older inputs are grouped
  into chunks of ``B**l`` steps; for the lag window ``(B**l, 2 B**(l+1))`` of
  level ``l`` the weights are represented by a Talbot-contour quadrature of
  the transfer function,

      omega_m ~ 2 Re sum_j g_j R_j**(m-1),   R_j = (2 + lam_j tau) / (2 - lam_j tau),

  so each chunk is summarized by one state vector per contour node that is
  advanced by ``y <- R_j y`` every step.  Memory grows like
  ``K (2B + 1) log_B(n)`` vectors instead of ``n``.

Both engines work on vectors restricted to the nodes of one material region;
:class:`RegionConvolution` assembles the per-region engines into nodal
vectors.

The contour representation assumes the transfer function is analytic off the
negative real axis (true for Debye sums, singular at ``-1/tau_i``) and decays
at infinity.  Accuracy is checked against the weight table when a ladder is
built.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .weights import WeightError, WeightTable

# Talbot contour lam(theta) = (K / t) (sigma + mu (theta cot theta + i nu theta)).
TALBOT_SIGMA = 0.1
TALBOT_MU = 0.4
TALBOT_NU = 0.6


class FocqAccuracyWarning(RuntimeWarning):
    """Estimated contour quadrature error exceeds the configured tolerance."""


def direct_convolve(weights: WeightTable, history: np.ndarray, n: int) -> np.ndarray:
    """``p^n = sum_{k=0}^n omega_{n-k} e^k`` for ``history[k] = e^k``."""
    w = weights.weights
    if n + 1 > w.size:
        raise WeightError(f"weight table has {w.size} entries, step {n} needs {n + 1}")
    history = np.asarray(history)
    if history.shape[0] < n + 1:
        raise ValueError("history shorter than requested step")
    return w[n::-1] @ history[: n + 1]


class DirectConvolution:
    """Exact engine over a stored history of region vectors."""

    def __init__(self, weights: WeightTable, size: int):
        self.table = weights
        self.w = weights.weights
        self.size = size
        self.history = np.zeros((self.w.size, size))
        self.count = 0
        self._cache = None

    @property
    def stored_vectors(self) -> int:
        return self.count

    def append(self, e) -> None:
        if self.count >= self.w.size:
            raise WeightError(
                f"weight table exhausted after {self.w.size} steps; enlarge n_weights"
            )
        if self._cache is None or self._cache[0] != self.count:
            self._cache = (self.count, self.memory())
        self.history[self.count] = e
        self.count += 1

    def memory(self) -> np.ndarray:
        """``sum_{k<n} omega_{n-k} e^k`` with ``n`` the number of appended vectors."""
        n = self.count
        if n == 0:
            return np.zeros(self.size)
        if n >= self.w.size:
            raise WeightError(f"weight table has {self.w.size} entries, step {n} needs {n + 1}")
        out = self.w[n:0:-1] @ self.history[:n]
        self._cache = (n, out)
        return out

    def query(self) -> np.ndarray:
        """Full convolution ``p^n`` at the latest appended step (lag 0 included)."""
        if self.count == 0:
            raise RuntimeError("query before first append")
        return direct_convolve(self.table, self.history, self.count - 1)


def talbot_contour(n_nodes: int, t: float, sigma=TALBOT_SIGMA, mu=TALBOT_MU, nu=TALBOT_NU):
    """Upper-half nodes and weights of a Talbot contour tuned to time ``t``.

    Returns ``(lam, w)`` with ``(1/2 pi i) int f(lam) dlam ~ 2 Re sum_j w_j f(lam_j)``
    for integrands with ``f(conj lam) = conj f(lam)``.  Midpoint rule in theta.
    """
    theta = (np.arange(n_nodes) + 0.5) * np.pi / n_nodes
    cot = 1.0 / np.tan(theta)
    scale = n_nodes / t
    lam = scale * (sigma + mu * (theta * cot + 1j * nu * theta))
    dlam = scale * mu * (cot - theta / np.sin(theta) ** 2 + 1j * nu)
    w = dlam * (np.pi / n_nodes) / (2j * np.pi)
    return lam, w


@dataclass
class _Level:
    index: int
    span: int          # chunk length B**l
    ratio: np.ndarray  # R_j, shape (K,)
    gain: np.ndarray   # g_j, shape (K,)
    chunks: dict       # chunk index -> complex state array (K, size)
    error_estimate: float = 0.0


class BlockLadder:
    """Fast-and-oblivious convolution with logarithmic memory.

    Parameters
    ----------
    transfer : callable
        ``K(lam) = eps0 chi(lam)``, vectorized over complex arrays.
    weights : WeightTable
        Exact weights; used for the head buffer and to estimate the contour
        error of every level.
    size : int
        Length of the vectors being convolved.
    horizon : int
        Maximum number of appends.  All levels are created up front because
        a level has to accumulate its first chunk from step 0 on.
    base : int
        Block growth factor ``B >= 2``.
    contour_nodes : int
        Stored (upper half-plane) quadrature nodes per level, ``K``.
    tolerance : float
        Accepted estimate of the relative error; exceeding it sets
        :attr:`degraded` and emits :class:`FocqAccuracyWarning`.
    min_lag : int, optional
        Lags below the first level start are summed exactly.  Defaults to
        ``2 * contour_nodes``; the trapezoidal factor ``R**m`` is only close
        to ``exp(m tau lam)`` on the contour once ``m`` is a few times ``K``.
    """

    def __init__(
        self,
        transfer: Callable,
        weights: WeightTable,
        size: int,
        horizon: int,
        base: int = 2,
        contour_nodes: int = 24,
        tolerance: float = 1e-6,
        min_lag: int | None = None,
    ):
        if base < 2 or int(base) != base:
            raise ValueError("base must be an integer >= 2")
        if contour_nodes < 1:
            raise ValueError("need at least one contour node")
        self.tau = weights.tau_step
        self.w = weights.weights
        self.table = weights
        self.size = int(size)
        self.base = int(base)
        self.contour_nodes = int(contour_nodes)
        self.tolerance = float(tolerance)
        self.horizon = int(horizon)
        min_lag = 2 * self.contour_nodes if min_lag is None else int(min_lag)

        first = 1
        while self.base**first < min_lag:
            first += 1
        self.first_level = first
        # the head holds lags up to 2 B**first - 1
        if self.w.size < min(2 * self.base**first, self.horizon + 1):
            raise WeightError("weight table too short for the exact head buffer")

        self.levels: list[_Level] = []
        lvl = first
        while 2 * self.base ** (lvl) <= self.horizon:
            self.levels.append(self._make_level(transfer, lvl))
            lvl += 1
        self.head = np.zeros((2 * self.base**first, self.size))
        self.head_start = 0  # step index of head[0]
        self.count = 0
        self._cache = None
        self.peak_stored = 0
        self.error_estimate = self._estimate_error()
        self.degraded = self.error_estimate > self.tolerance
        if self.degraded:
            warnings.warn(
                f"contour quadrature error estimate {self.error_estimate:.2e} exceeds "
                f"tolerance {self.tolerance:.1e}",
                FocqAccuracyWarning,
                stacklevel=2,
            )

    # -- construction -------------------------------------------------------

    def _make_level(self, transfer, lvl) -> _Level:
        span = self.base**lvl
        t_end = 2 * self.base ** (lvl + 1) * self.tau
        lam, w = talbot_contour(self.contour_nodes, t_end)
        lt = lam * self.tau
        ratio = (2.0 + lt) / (2.0 - lt)
        gain = w * np.asarray(transfer(lam)) * 4.0 * self.tau / (2.0 - lt) ** 2
        return _Level(lvl, span, ratio, gain, {})

    def contour_weights(self, level: _Level, lags: np.ndarray) -> np.ndarray:
        """Weights reproduced by the contour quadrature of ``level``."""
        powers = level.ratio[None, :] ** (np.asarray(lags)[:, None] - 1)
        return 2.0 * np.real(powers @ level.gain)

    def _estimate_error(self) -> float:
        """Sum over levels of ``sum_m |omega~_m - omega_m|`` over the level's lag
        window, relative to ``sum_m |omega_m|``.  Bounds the convolution error
        relative to ``||omega||_1 max|e|``."""
        norm = np.sum(np.abs(self.w[: self.horizon + 1]))
        if norm == 0:
            return 0.0
        total = 0.0
        for level in self.levels:
            lo = level.span + 1
            hi = min(2 * self.base * level.span - 1, self.horizon, self.w.size - 1)
            if hi < lo:
                continue
            lags = np.arange(lo, hi + 1)
            diff = np.sum(np.abs(self.contour_weights(level, lags) - self.w[lags]))
            level.error_estimate = diff / norm
            total += level.error_estimate
        return total

    # -- bookkeeping --------------------------------------------------------

    def _boundary(self, lvl: int, t: int) -> int:
        span = self.base**lvl
        return max(0, span * (t // span - 1))

    @property
    def stored_vectors(self) -> int:
        """Nodal vectors currently held (complex contour states count once)."""
        head = self.count - self.head_start
        states = sum(len(level.chunks) for level in self.levels) * self.contour_nodes
        return head + states

    def append(self, e) -> None:
        if self.count >= self.horizon:
            raise WeightError(f"ladder horizon of {self.horizon} steps exceeded")
        if self._cache is None or self._cache[0] != self.count:
            self.memory()
        self._last_memory = self._cache[1]
        e = np.asarray(e, dtype=float)
        k = self.count
        for level in self.levels:
            for state in level.chunks.values():
                state *= level.ratio[:, None]
            c = k // level.span
            if c not in level.chunks:
                level.chunks[c] = np.zeros((self.contour_nodes, self.size), dtype=complex)
            level.chunks[c] += e[None, :]

        # head buffer: keep inputs from the first-level boundary on
        if k - self.head_start >= self.head.shape[0]:
            raise AssertionError("head buffer overflow")
        self.head[k - self.head_start] = e
        self.count += 1
        self._prune()
        self.peak_stored = max(self.peak_stored, self.stored_vectors)

    def _prune(self) -> None:
        t = self.count
        new_start = self._boundary(self.first_level, t)
        if new_start > self.head_start:
            shift = new_start - self.head_start
            kept = t - new_start
            self.head[:kept] = self.head[shift : shift + kept]
            self.head[kept:] = 0.0
            self.head_start = new_start
        for i, level in enumerate(self.levels):
            upper = self.levels[i + 1].index if i + 1 < len(self.levels) else None
            lower_edge = self._boundary(upper, t) if upper is not None else 0
            for c in [c for c in level.chunks if (c + 1) * level.span <= lower_edge]:
                del level.chunks[c]

    # -- evaluation ---------------------------------------------------------

    def memory(self) -> np.ndarray:
        """``sum_{k<n} omega_{n-k} e^k`` for ``n`` = number of appends."""
        t = self.count
        out = np.zeros(self.size)
        self._cache = (t, out)
        if t == 0:
            return out
        start = self.head_start
        lags = t - np.arange(start, t)
        out += self.w[lags] @ self.head[: t - start]
        for i, level in enumerate(self.levels):
            hi = self._boundary(level.index, t)
            upper = self.levels[i + 1].index if i + 1 < len(self.levels) else None
            lo = self._boundary(upper, t) if upper is not None else 0
            if hi <= lo:
                continue
            acc = None
            for c in range(lo // level.span, hi // level.span):
                acc = level.chunks[c].copy() if acc is None else acc + level.chunks[c]
            out += 2.0 * np.real(level.gain @ acc)
        self._cache = (t, out)
        return out

    def query(self) -> np.ndarray:
        """Full convolution ``p^n`` at the latest appended step (lag 0 included)."""
        if self.count == 0:
            raise RuntimeError("query before first append")
        return self.w[0] * self.head[self.count - 1 - self.head_start] + self._last_memory


class RegionConvolution:
    """Per-region engines assembled into nodal vectors."""

    def __init__(self, n_nodes: int, parts: Sequence[tuple[np.ndarray, object]]):
        self.n_nodes = n_nodes
        self.parts = list(parts)

    @property
    def stored_vectors(self) -> int:
        return sum(engine.stored_vectors for _, engine in self.parts)

    @property
    def degraded(self) -> bool:
        return any(getattr(engine, "degraded", False) for _, engine in self.parts)

    def append(self, e: np.ndarray) -> None:
        for nodes, engine in self.parts:
            engine.append(e[nodes])

    def memory(self) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        for nodes, engine in self.parts:
            out[nodes] = engine.memory()
        return out

    def query(self) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        for nodes, engine in self.parts:
            out[nodes] = engine.query()
        return out

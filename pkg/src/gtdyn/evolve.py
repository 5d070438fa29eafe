"""Continuous-time semigroup Q_t = exp(t L) by uniformization, and path sampling.

Since Q = L + I is (sub)stochastic the uniformization rate is exactly 1:
Q_t = sum_k e^{-t} t^k / k! Q^k. Paths are sampled with a Poisson(t) number
of Q-jumps (self-loops included).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, lgamma, log
from typing import Sequence

import numpy as np

from .generators import KernelMatrix, _as_array, transition_entries
from .links import link_column, project_link
from .signatures import Signature, SignatureBox, enumerate_box, enumerate_interlacing
from .toeplitz import _range_states, _reach
from .voiculescu import OmegaPoint


class TruncationExitError(RuntimeError):
    """A sampled path left the finite box; ``path`` holds the part inside it."""

    def __init__(self, message: str, path: list):
        super().__init__(message)
        self.path = path


def poisson_weights(t: float, tol: float = 1e-12) -> np.ndarray:
    """e^{-t} t^k / k! for k = 0..K, K the first index with upper tail below ``tol``."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0:
        return np.ones(1)
    w = []
    k = 0
    while True:
        p = exp(-t + k * log(t) - lgamma(k + 1))
        w.append(p)
        # sum_{j>k} p_j <= p_{k+1} / (1 - t/(k+2)) once k + 2 > t
        if k + 2 > 2 * t:
            nxt = p * t / (k + 1)
            if nxt / (1 - t / (k + 2)) < tol:
                break
        k += 1
    return np.array(w)


@dataclass(frozen=True)
class Semigroup:
    """Q_t built from ``base``; ``kernel`` is the resulting transition matrix."""

    base: KernelMatrix = field(repr=False)
    t: float
    terms: int
    tol: float
    kernel: KernelMatrix = field(repr=False)


def uniformize(Q: KernelMatrix, t: float, tol: float = 1e-12) -> Semigroup:
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    Q = Q.transition()
    if not Q.is_square:
        raise ValueError("uniformization needs a square kernel")
    w = poisson_weights(t, tol)
    P = Q.entries
    term = np.eye(len(Q.box))
    out = w[0] * term
    for k in range(1, len(w)):
        term = term @ P
        out += w[k] * term
    meta = dict(Q.meta, t=t, terms=len(w), tol=tol)
    return Semigroup(Q, t, len(w), tol, KernelMatrix(Q.box, out, "transition", (), meta))


def semigroup_at(Q: KernelMatrix, t: float, tol: float = 1e-12) -> KernelMatrix:
    """Q_t = e^{-t} sum_k t^k/k! Q^k, truncated once the Poisson tail is below ``tol``."""
    return uniformize(Q, t, tol).kernel


def propagate(P0: np.ndarray, Q: KernelMatrix, t: float, tol: float = 1e-12) -> np.ndarray:
    """Row vector P0 Q_t, by the same series acting on vectors."""
    Q = Q.transition()
    w = poisson_weights(t, tol)
    v = np.asarray(P0, dtype=float).copy()
    out = w[0] * v
    for k in range(1, len(w)):
        v = v @ Q.entries
        out += w[k] * v
    return out


@dataclass(frozen=True)
class EvolvedMeasure:
    box: SignatureBox
    probs: np.ndarray = field(repr=False)
    initial_mass: float
    mass: float

    @property
    def deficit(self) -> float:
        """Mass that left the box along the way."""
        return self.initial_mass - self.mass


def evolve_measure(P0, Q_t: KernelMatrix) -> EvolvedMeasure:
    """P0 Q_t. ``P0`` is a vector on the box or a mapping signature -> probability."""
    box = Q_t.box
    if isinstance(P0, dict):
        vec = np.zeros(len(box))
        for lam, p in P0.items():
            if tuple(lam) not in box:
                raise ValueError(f"initial measure charges {tuple(lam)}, outside the kernel box")
            vec[box.index(lam)] += p
    else:
        vec = np.asarray(P0, dtype=float)
        if vec.shape != (len(box),):
            raise ValueError(f"measure of length {vec.shape} does not match box of size {len(box)}")
    if not Q_t.is_square:
        raise ValueError("evolve_measure needs a square kernel")
    out = vec @ Q_t.transition().entries
    return EvolvedMeasure(box, out, float(vec.sum()), float(out.sum()))


# ---------------------------------------------------------------------------
# rows of Q_t through powers of omega


def mixture_reach(omega: OmegaPoint, N: int, q, weights: np.ndarray, tol: float = 1e-12) -> tuple[int, int]:
    """Offsets covering sum_k weights[k] Q^k(lam, .) up to about ``tol`` of mass."""
    lo, hi = 0, 0
    K = len(weights)
    for k in range(1, K):
        budget = tol / (K * weights[k])
        if budget >= 1:
            continue
        a, b = _reach(omega.power(k), N, q, float(budget))
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


def _power_box(omega: OmegaPoint, N: int, w: np.ndarray, lams: np.ndarray, q, tol: float) -> SignatureBox:
    lo, hi = mixture_reach(omega, N, q, w, tol)
    return enumerate_box(N, int(lams.min()) + lo, int(lams.max()) + hi)


def _mixture_rows(omega, N, q, lams: np.ndarray, cols: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = np.zeros((len(lams), len(cols)))
    for k, pk in enumerate(weights):
        if pk == 0:
            continue
        if k == 0:
            for i, lam in enumerate(lams):
                out[i, np.all(cols == lam, axis=1)] += pk
            continue
        qk, _ = transition_entries(omega.power(k), N, q, lams, cols)
        out += pk * qk
    return out


def semigroup_rows(
    omega: OmegaPoint,
    N: int,
    q: float | None,
    rows: Sequence[Signature],
    t: float,
    tol: float = 1e-12,
    box: SignatureBox | None = None,
) -> tuple[SignatureBox, np.ndarray]:
    """Rows of Q_t from Q^k = Q[omega^k] (the k-th power of a character is a character).

    Returns the column box and a (len(rows), len(box)) array. No dense powers
    are formed, so wide one-step displacements stay affordable.
    """
    w = poisson_weights(t, tol)
    lams = _as_array(list(rows))
    if box is None:
        box = _power_box(omega, N, w, lams, q, tol)
    return box, _mixture_rows(omega, N, q, lams, _as_array(box.states), w)


@dataclass
class TimeIntertwineReport:
    defect: float
    rows_checked: int
    min_mass: float
    span: tuple[int, int]


def intertwine_rows(
    omega: OmegaPoint, n: int, q: float | None, rows: Sequence[Signature], t: float | None, tol: float = 1e-12
) -> TimeIntertwineReport:
    """max |(Q_t^(n) Lambda - Lambda Q_t^(n-1))(lam, mu)| over the given level-n rows.

    ``t=None`` compares one Q-step instead of Q_t. Both sides are computed
    row by row on a common part range [lo, hi] without dense kernels;
    ``min_mass`` is the smallest row mass captured in that range, so
    1 - min_mass bounds what the comparison cannot see.
    """
    if n < 2:
        raise ValueError("intertwining needs n >= 2")
    w = np.array([0.0, 1.0]) if t is None else poisson_weights(t, tol)
    lams = _as_array(list(rows))
    a_hi, b_hi = mixture_reach(omega, n, q, w, tol)
    a_lo, b_lo = mixture_reach(omega, n - 1, q, w, tol)
    lo = int(lams.min()) + min(a_hi, a_lo)
    hi = int(lams.max()) + max(b_hi, b_lo)
    nus = _range_states(n, np.full(n, lo), np.full(n, hi))
    hi_rows = _mixture_rows(omega, n, q, lams, nus, w)
    defect, min_mass = 0.0, float(hi_rows.sum(axis=1).min())
    for i, lam in enumerate(rows):
        col_box, left = project_link(n, q, nus, hi_rows[i], lo, hi)
        mus = enumerate_interlacing(lam)
        lo_rows = _mixture_rows(omega, n - 1, q, _as_array(mus), _as_array(col_box.states), w)
        min_mass = min(min_mass, float(lo_rows.sum(axis=1).min()))
        lvals = np.array([link_column(n, q, np.array([lam]), mu)[0] for mu in mus])
        right = lvals @ lo_rows
        defect = max(defect, float(np.abs(left - right).max()))
    return TimeIntertwineReport(defect, len(rows), min_mass, (lo, hi))


# ---------------------------------------------------------------------------
# sampling


def _row_cdfs(Q: KernelMatrix) -> np.ndarray:
    return np.cumsum(np.clip(Q.transition().entries, 0.0, None), axis=1)


def sample_path(
    Q: KernelMatrix,
    start: Sequence[int],
    t_end: float,
    seed: int | np.random.SeedSequence | np.random.Generator,
    _cdfs: np.ndarray | None = None,
) -> list[tuple[float, Signature]]:
    """Right-continuous path on [0, t_end] as (jump time, state) pairs.

    A Poisson(t_end) number of jump times is drawn uniformly on [0, t_end] and
    each jump moves by one row of Q. Self-loops are recorded as jumps too.
    A row whose mass leaks out of the box can send the path outside; the
    leftover probability is treated as an exit.
    """
    if t_end < 0:
        raise ValueError(f"time must be nonnegative, got {t_end}")
    start = tuple(int(v) for v in start)
    box = Q.box
    if start not in box:
        raise ValueError(f"start {start} is outside the box")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdfs = _row_cdfs(Q) if _cdfs is None else _cdfs
    path = [(0.0, start)]
    k = int(rng.poisson(t_end)) if t_end > 0 else 0
    times = np.sort(rng.uniform(0.0, t_end, size=k))
    cur = box.index(start)
    for s in times:
        u = rng.random()
        cdf = cdfs[cur]
        if u >= cdf[-1]:
            raise TruncationExitError(
                f"path left the box at time {s:.6g} from {box.states[cur]}", path
            )
        cur = int(np.searchsorted(cdf, u, side="right"))
        path.append((float(s), box.states[cur]))
    return path


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Per-trajectory streams: child i of SeedSequence(seed)."""
    return np.random.SeedSequence(seed).spawn(n)


def sample_paths(
    Q: KernelMatrix, start: Sequence[int], t_end: float, n: int, seed: int
) -> list[list[tuple[float, Signature]]]:
    cdfs = _row_cdfs(Q)
    return [sample_path(Q, start, t_end, s, cdfs) for s in spawn_seeds(seed, n)]


def sample_endpoints(Q: KernelMatrix, start: Sequence[int], t_end: float, n: int, seed: int) -> np.ndarray:
    """Box indices of the endpoints of ``n`` independent paths (streams as in sample_paths)."""
    cdfs = _row_cdfs(Q)
    out = np.empty(n, dtype=np.int64)
    for i, s in enumerate(spawn_seeds(seed, n)):
        out[i] = Q.box.index(sample_path(Q, start, t_end, s, cdfs)[-1][1])
    return out

"""Markov generators on signatures of U(N) and U_q(N).

Two independent constructions:

* determinantal: ratio of (q-)dimensions times a Toeplitz-type minor of the
  coefficients phi_omega;
* fusion: tensor-product multiplicities weighted by the decomposition of the
  character into irreducibles (no phi_omega involved).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .signatures import Signature, SignatureBox
from .symfunc import (
    dim_u,
    log_dim_array,
    log_spec_q2,
    log_spec_q2_array,
    lr_coeffs,
    qdim,
    spec_q2,
)
from .voiculescu import (
    CoeffWindow,
    OmegaPoint,
    phi_eval_real,
    validate_q_case,
    window_for,
)

_CHUNK = 4_000_000


@dataclass(frozen=True)
class KernelMatrix:
    """Dense kernel with rows indexed by ``rows`` and columns by ``box``.

    ``kind`` is "generator", "transition" or "link". ``rows`` defaults to the
    box states (square matrix).
    """

    box: SignatureBox
    entries: np.ndarray = field(repr=False)
    kind: str
    rows: tuple[Signature, ...] = field(default=(), repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.rows:
            object.__setattr__(self, "rows", self.box.states)
        if self.entries.shape != (len(self.rows), len(self.box)):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match "
                f"{len(self.rows)} rows x {len(self.box)} columns"
            )

    @property
    def is_square(self) -> bool:
        return self.rows is self.box.states or tuple(self.rows) == self.box.states

    def _diag_positions(self) -> tuple[np.ndarray, np.ndarray]:
        r, c = [], []
        for i, lam in enumerate(self.rows):
            if lam in self.box:
                r.append(i)
                c.append(self.box.index(lam))
        return np.array(r, dtype=int), np.array(c, dtype=int)

    def transition(self) -> "KernelMatrix":
        if self.kind == "transition":
            return self
        if self.kind != "generator":
            raise ValueError(f"cannot turn a {self.kind} kernel into a transition matrix")
        e = self.entries.copy()
        r, c = self._diag_positions()
        e[r, c] += 1.0
        return KernelMatrix(self.box, e, "transition", self.rows, dict(self.meta))

    def generator(self) -> "KernelMatrix":
        if self.kind == "generator":
            return self
        if self.kind != "transition":
            raise ValueError(f"cannot turn a {self.kind} kernel into a generator")
        e = self.entries.copy()
        r, c = self._diag_positions()
        e[r, c] -= 1.0
        return KernelMatrix(self.box, e, "generator", self.rows, dict(self.meta))

    def row(self, lam: Sequence[int]) -> np.ndarray:
        return self.entries[self.rows.index(tuple(lam))]

    def entry(self, lam: Sequence[int], mu: Sequence[int]) -> float:
        return float(self.row(lam)[self.box.index(mu)])

    def row_deficits(self) -> np.ndarray:
        """1 - (transition row sum) for each row: mass leaving the box."""
        q = self.transition().entries
        return 1.0 - q.sum(axis=1)

    def restrict_rows(self, rows: Sequence[Signature]) -> "KernelMatrix":
        idx = [self.rows.index(tuple(r)) for r in rows]
        return KernelMatrix(self.box, self.entries[idx], self.kind, tuple(map(tuple, rows)), dict(self.meta))


def _as_array(sigs: Sequence[Signature]) -> np.ndarray:
    return np.array(sigs, dtype=np.int64).reshape(len(sigs), -1)


def toeplitz_minors(phi: CoeffWindow, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """det[phi(mu_j - j - lam_i + i)] for every (lam, mu) pair of ``rows`` x ``cols``."""
    R, N = rows.shape
    C = cols.shape[0]
    ar = np.arange(N)
    a = rows - ar
    b = cols - ar
    out = np.empty((R, C))
    step = max(1, _CHUNK // max(1, C * N * N))
    for s in range(0, R, step):
        idx = b[None, :, None, :] - a[s : s + step, None, :, None]
        mats = phi(idx)
        if N == 1:
            out[s : s + step] = mats[..., 0, 0]
        else:
            out[s : s + step] = np.linalg.det(mats)
    return out


def _needed_range(rows: np.ndarray, cols: np.ndarray) -> tuple[int, int]:
    N = rows.shape[1]
    lo = int(cols.min() - rows.max()) - (N - 1)
    hi = int(cols.max() - rows.min()) + (N - 1)
    return lo, hi


def _window(omega: OmegaPoint, rows: np.ndarray, cols: np.ndarray, window: CoeffWindow | None):
    lo, hi = _needed_range(rows, cols)
    if window is not None and window.covers(lo, hi):
        return window
    return window_for(omega, lo, hi)


def _finish(box, rows, q_entries, meta) -> KernelMatrix:
    gen = q_entries
    rows_t = tuple(rows)
    km = KernelMatrix(box, gen, "transition", rows_t, meta)
    return km.generator()


def transition_entries(
    omega: OmegaPoint,
    N: int,
    q: float | None,
    rows: np.ndarray,
    cols: np.ndarray,
    window: CoeffWindow | None = None,
) -> tuple[np.ndarray, CoeffWindow]:
    """Q(lam, mu) for arbitrary (R, N) and (C, N) signature arrays, plus the window used."""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, N)
    cols = np.asarray(cols, dtype=np.int64).reshape(-1, N)
    phi = _window(omega, rows, cols, window)
    minors = toeplitz_minors(phi, rows, cols)
    if q is None or q == 1:
        lg = log_dim_array(cols)[None, :] - log_dim_array(rows)[:, None]
    else:
        q = float(q)
        validate_q_case(omega, N, q)
        log_norm = float(np.sum([np.log(phi_eval_real(omega, q ** (-2 * i))) for i in range(N)]))
        lg = log_spec_q2_array(cols, q)[None, :] - log_spec_q2_array(rows, q)[:, None] - log_norm
    return np.exp(lg) * minors, phi


def _build(omega, N, q, box, rows, window, label) -> KernelMatrix:
    if box.N != N:
        raise ValueError(f"box level {box.N} differs from N={N}")
    rows = box.states if rows is None else tuple(map(tuple, rows))
    q_entries, phi = transition_entries(omega, N, q, _as_array(rows), _as_array(box.states), window)
    meta = {"route": "determinantal", "q": label, "N": N, "omega": omega.to_dict(),
            "window": [phi.n_min, phi.n_max], "window_tail": phi.tail_mass}
    return _finish(box, rows, q_entries, meta)


def generator_un(
    omega: OmegaPoint,
    N: int,
    box: SignatureBox,
    rows: Sequence[Signature] | None = None,
    window: CoeffWindow | None = None,
) -> KernelMatrix:
    """L(lam, mu) = dim(mu)/dim(lam) det[phi(mu_j - j - lam_i + i)] - delta."""
    return _build(omega, N, None, box, rows, window, "classical")


def phi_q_normalizer(omega: OmegaPoint, N: int, q: float) -> float:
    """prod_{i=1..N} Phi_omega(q^{-2(i-1)})."""
    return float(np.prod([phi_eval_real(omega, q ** (-2 * i)) for i in range(N)]))


def generator_uqn(
    omega: OmegaPoint,
    N: int,
    q: float,
    box: SignatureBox,
    rows: Sequence[Signature] | None = None,
    window: CoeffWindow | None = None,
) -> KernelMatrix:
    """L(lam, mu) = s_mu(1,..,q^{-2(N-1)}) / s_lam(..) det[...] / prod Phi(q^{-2(i-1)}) - delta."""
    if box.N != N:
        raise ValueError(f"box level {box.N} differs from N={N}")
    validate_q_case(omega, N, q)
    return _build(omega, N, float(q), box, rows, window, float(q))


def generator(omega, N, q, box, rows=None, window=None) -> KernelMatrix:
    """Dispatch on q: ``None`` (or 1) is the classical U(N) case."""
    if q is None or q == 1:
        return generator_un(omega, N, box, rows, window)
    return generator_uqn(omega, N, float(q), box, rows, window)


@lru_cache(maxsize=200_000)
def _lr_cached(alpha, gamma):
    return lr_coeffs(alpha, gamma)


def generator_fusion(
    weights: Mapping[Signature, float],
    N: int,
    q: float | None,
    box: SignatureBox,
    rows: Sequence[Signature] | None = None,
    partial: bool = False,
) -> KernelMatrix:
    """L(a, b) = d(b)/d(a) sum_g P(g) N^b_{a,g} / d(g) - delta, with d = qdim or dim.

    With ``partial`` the weights may be a truncation (total below 1) of an
    infinitely supported decomposition; only entries flagged by
    :func:`fusion_complete` are then exact.
    """
    weights = {tuple(k): float(v) for k, v in weights.items() if v != 0}
    if any(len(k) != N for k in weights):
        raise ValueError("fusion weights must all be signatures of length N")
    total = sum(weights.values())
    if (total > 1 + 1e-12) or (not partial and total < 1 - 1e-12):
        raise ValueError(f"fusion weights sum to {total}, not 1")
    classical = q is None or q == 1
    if classical:
        def d(lam):
            return float(dim_u(lam))
    else:
        qf = float(q)

        def d(lam):
            return float(qdim(lam, N, qf))

    rows = box.states if rows is None else tuple(map(tuple, rows))
    out = np.zeros((len(rows), len(box)))
    dgam = {g: d(g) for g in weights}
    for i, a in enumerate(rows):
        da = d(a)
        for g, p in weights.items():
            for b, c in _lr_cached(a, g).items():
                if b in box:
                    out[i, box.index(b)] += p * c / dgam[g] / da
    dcol = np.array([d(b) for b in box.states])
    out *= dcol[None, :]
    meta = {"route": "fusion", "q": "classical" if classical else float(q), "N": N}
    return _finish(box, rows, out, meta)


def fusion_complete(rows: Sequence[Signature], box: SignatureBox, w_lo: int, w_hi: int) -> np.ndarray:
    """Mask of entries (a, b) whose fusion sum only involves weights with parts in [w_lo, w_hi].

    N^b_{a,g} > 0 forces b_N - a_1 <= g_N and g_1 <= b_1 - a_N.
    """
    ra, ca = _as_array(rows), _as_array(box.states)
    g_lo = ca[None, :, -1] - ra[:, None, 0]
    g_hi = ca[None, :, 0] - ra[:, None, -1]
    return (g_lo >= w_lo) & (g_hi <= w_hi)


def q2_schur_measure(
    omega: OmegaPoint, k: int, q: float, box: SignatureBox, window: CoeffWindow | None = None
) -> np.ndarray:
    """P_k(lam) = det[phi(lam_i - i + j)] / prod Phi(q^{-2(i-1)}) * s_lam(1, q^-2, ...)."""
    if box.N != k:
        raise ValueError(f"box level {box.N} differs from k={k}")
    validate_q_case(omega, k, q)
    ca = _as_array(box.states)
    zero = np.zeros((1, k), dtype=np.int64)
    # det[phi(lam_i - i + j)] is the minor with rows lam and columns 0 after transposition
    phi = _window(omega, zero, ca, window)
    minors = toeplitz_minors(phi, zero, ca)[0]
    ls = np.array([log_spec_q2(c, q) for c in box.states])
    log_norm = float(np.sum([np.log(phi_eval_real(omega, q ** (-2 * i))) for i in range(k)]))
    return np.exp(ls - log_norm) * minors


def q2_schur_transform(P: np.ndarray, box: SignatureBox, q: float, z: Sequence[complex]) -> complex:
    """S(z; P) = sum P(lam) s_lam(z_1, q^-2 z_2, ...)/s_lam(1, q^-2, ...)."""
    from .symfunc import schur_eval

    N = box.N
    pts = [complex(z[i]) * q ** (-2 * i) for i in range(N)]
    total = 0j
    for p, lam in zip(P, box.states):
        if p == 0:
            continue
        total += p * schur_eval(lam, pts) / spec_q2(lam, N, q)
    return total

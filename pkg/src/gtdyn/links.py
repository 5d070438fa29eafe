"""Branching links between consecutive levels, the boundary kernels, and intertwining checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .generators import KernelMatrix, _as_array, _window, toeplitz_minors
from .signatures import Signature, SignatureBox, enumerate_interlacing
from .symfunc import dim_u, log_dim_array, log_dim_u, log_spec_q2, log_spec_q2_array, qdim
from .voiculescu import CoeffWindow, OmegaPoint


@dataclass(frozen=True)
class LinkMatrix:
    """Stochastic link from level n (rows) to level n-1 (columns).

    ``entries`` is a float array, or an object array of Fractions when exact.
    ``q`` is None for the classical link.
    """

    row_box: SignatureBox
    col_box: SignatureBox
    entries: np.ndarray = field(repr=False)
    q: object = None

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    def as_float(self) -> np.ndarray:
        return self.entries.astype(float)

    def row(self, lam: Sequence[int]) -> np.ndarray:
        return self.entries[self.row_box.index(lam)]

    def entry(self, lam, mu):
        return self.entries[self.row_box.index(lam), self.col_box.index(mu)]

    def complete_rows(self) -> np.ndarray:
        """Rows whose interlacing signatures all lie in the column box."""
        lo, hi = self.col_box.lo, self.col_box.hi
        return np.array([lam[-1] >= lo and lam[0] <= hi for lam in self.row_box.states])


def _check_levels(n: int, row_box: SignatureBox, col_box: SignatureBox) -> None:
    if n < 2:
        raise ValueError("links start at level 2")
    if row_box.N != n or col_box.N != n - 1:
        raise ValueError(
            f"link boxes must sit at levels {n} and {n - 1}, got {row_box.N} and {col_box.N}"
        )


def link_column(n: int, q, nus: np.ndarray, mu: Sequence[int]) -> np.ndarray:
    """Lambda(nu, mu) for every row nu of the (M, n) array ``nus`` and one mu (float)."""
    nus = np.asarray(nus, dtype=np.int64).reshape(-1, n)
    mu_a = np.asarray(mu, dtype=np.int64)
    mask = np.all((nus[:, :-1] >= mu_a) & (mu_a >= nus[:, 1:]), axis=1)
    out = np.zeros(len(nus))
    if not mask.any():
        return out
    sub = nus[mask]
    if q is None or q == 1:
        lg = log_dim_u(mu) - log_dim_array(sub)
    else:
        lg = (
            2 * (n - 1) * (sum(mu) - sub.sum(axis=1)) * np.log(float(q))
            + log_spec_q2(mu, float(q))
            - log_spec_q2_array(sub, float(q))
        )
    out[mask] = np.exp(lg)
    return out


def _link_float(n, q, row_box, col_box) -> np.ndarray:
    rows = _as_array(row_box.states)
    out = np.zeros((len(row_box), len(col_box)))
    for j, mu in enumerate(col_box.states):
        out[:, j] = link_column(n, q, rows, mu)
    return out


def link_un(n: int, row_box: SignatureBox, col_box: SignatureBox, exact: bool = False) -> LinkMatrix:
    """Lambda(lam, mu) = dim(mu)/dim(lam) if mu interlaces lam, else 0."""
    _check_levels(n, row_box, col_box)
    if not exact:
        return LinkMatrix(row_box, col_box, _link_float(n, None, row_box, col_box), None)
    out = np.full((len(row_box), len(col_box)), Fraction(0), dtype=object)
    for i, lam in enumerate(row_box.states):
        dl = dim_u(lam)
        for mu in enumerate_interlacing(lam):
            if mu in col_box:
                out[i, col_box.index(mu)] = Fraction(dim_u(mu), dl)
    return LinkMatrix(row_box, col_box, out, None)


def link_uqn(n: int, q, row_box: SignatureBox, col_box: SignatureBox) -> LinkMatrix:
    """Lambda(lam, mu) = q^{n|mu| - (n-1)|lam|} qdim_{n-1}(mu) / qdim_n(lam) for mu < lam.

    Exact (Fraction entries) when q is a Fraction; otherwise evaluated as
    q^{2(n-1)(|mu|-|lam|)} s_mu(1,..)/s_lam(1,..) in log space.
    """
    _check_levels(n, row_box, col_box)
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0,1), got {q}")
    if not isinstance(q, Fraction):
        return LinkMatrix(row_box, col_box, _link_float(n, q, row_box, col_box), q)
    out = np.full((len(row_box), len(col_box)), Fraction(0), dtype=object)
    for i, lam in enumerate(row_box.states):
        dl = qdim(lam, n, q)
        for mu in enumerate_interlacing(lam):
            if mu in col_box:
                e = n * sum(mu) - (n - 1) * sum(lam)
                out[i, col_box.index(mu)] = q**e * qdim(mu, n - 1, q) / dl
    return LinkMatrix(row_box, col_box, out, q)


def link(n: int, q, row_box: SignatureBox, col_box: SignatureBox, exact: bool = False) -> LinkMatrix:
    if q is None or q == 1:
        return link_un(n, row_box, col_box, exact)
    return link_uqn(n, q, row_box, col_box)


def boundary_link(
    omega: OmegaPoint, N: int, box: SignatureBox, window: CoeffWindow | None = None
) -> np.ndarray:
    """Lambda^infty_N(omega, lam) = dim(lam) det[phi(lam_i - i + j)] over the box."""
    if box.N != N:
        raise ValueError(f"box level {box.N} differs from N={N}")
    ca = _as_array(box.states)
    zero = np.zeros((1, N), dtype=np.int64)
    phi = _window(omega, zero, ca, window)
    minors = toeplitz_minors(phi, zero, ca)[0]
    dims = np.exp([log_dim_u(c) for c in box.states])
    return dims * minors


@dataclass
class IntertwineReport:
    defect: float
    rows_checked: int
    worst: tuple[Signature, Signature] | None


def verify_intertwine(
    Q_hi: KernelMatrix,
    Q_lo: KernelMatrix,
    L: LinkMatrix,
    interior_tol: float = 1e-12,
    rows: Sequence[Signature] | None = None,
) -> IntertwineReport:
    """max |(Q_n L - L Q_{n-1})(lam, mu)| over interior rows lam.

    A row is interior when its Q_hi mass inside the box is at least
    1 - interior_tol and every mu < lam has a row in Q_lo.
    """
    if Q_hi.box.N != L.row_box.N or Q_lo.box.N != L.col_box.N:
        raise ValueError("kernel levels do not match the link")
    if Q_hi.box.states != L.row_box.states or Q_lo.box.states != L.col_box.states:
        raise ValueError("kernel boxes do not match the link boxes")
    Lf = L.as_float()
    Qh = Q_hi.transition()
    Ql = Q_lo.transition()
    lo_rows = {r: i for i, r in enumerate(Ql.rows)}
    deficits = Qh.row_deficits()
    wanted = None if rows is None else {tuple(r) for r in rows}
    defect, checked, worst = 0.0, 0, None
    for i, lam in enumerate(Qh.rows):
        if wanted is not None and lam not in wanted:
            continue
        if deficits[i] > interior_tol:
            continue
        lrow = Lf[L.row_box.index(lam)]
        nz = np.nonzero(lrow)[0]
        if not all(L.col_box.states[j] in lo_rows for j in nz):
            continue
        left = Qh.entries[i] @ Lf
        right = sum(lrow[j] * Ql.entries[lo_rows[L.col_box.states[j]]] for j in nz)
        diff = np.abs(left - right)
        k = int(np.argmax(diff))
        checked += 1
        if diff[k] > defect:
            defect, worst = float(diff[k]), (lam, L.col_box.states[k])
    return IntertwineReport(defect, checked, worst)


def _log_link_scale(n: int, q, sigs: np.ndarray) -> np.ndarray:
    """log of the level factor d(sig) in Lambda(nu, mu) = d(mu) / d(nu) (q-weight included)."""
    if q is None or q == 1:
        return log_dim_array(sigs)
    return 2 * (n - 1) * sigs.sum(axis=1) * np.log(float(q)) + log_spec_q2_array(sigs, float(q))


def project_link(
    n: int, q, nus: np.ndarray, weights: np.ndarray, lo: int, hi: int
) -> tuple[SignatureBox, np.ndarray]:
    """(w Lambda)(mu) = sum_nu w(nu) Lambda(nu, mu) for every mu in the level-(n-1) box [lo, hi].

    The nu must have parts in [lo, hi]. For n <= 3 the interlacing sums are
    done with one-sided cumulative sums on a dense grid (no subtractions);
    larger n falls back to one column at a time.
    """
    from .signatures import enumerate_box

    nus = np.asarray(nus, dtype=np.int64).reshape(-1, n)
    weights = np.asarray(weights, dtype=float)
    col_box = enumerate_box(n - 1, lo, hi)
    mus = _as_array(col_box.states)
    if nus.size and (nus.min() < lo or nus.max() > hi):
        raise ValueError("level-n signatures leave the projection range")
    live = weights != 0
    nus, weights = nus[live], weights[live]
    out = np.zeros(len(mus))
    if len(nus) == 0:
        return col_box, out
    if n > 3:
        for j, mu in enumerate(col_box.states):
            out[j] = link_column(n, q, nus, mu) @ weights
        return col_box, out
    lw = np.log(np.abs(weights)) - _log_link_scale(n, q, nus)
    c = float(lw.max())
    W = hi - lo + 1
    grid = np.zeros((W,) * n)
    grid[tuple((nus - lo).T)] = np.sign(weights) * np.exp(lw - c)
    # suffix over nu_1 >= mu_1, prefix over nu_n <= mu_{n-1}
    S = np.flip(np.cumsum(np.flip(grid, 0), axis=0), 0)
    S = np.cumsum(S, axis=n - 1)
    m = mus - lo
    if n == 2:
        acc = S[m[:, 0], m[:, 0]]
    else:
        acc = np.zeros(len(mus))
        for d in range(W):
            mid = m[:, 1] + d
            ok = mid <= m[:, 0]
            acc[ok] += S[m[ok, 0], mid[ok], m[ok, 1]]
    out = np.exp(_log_link_scale(n, q, mus) + c) * acc
    return col_box, out

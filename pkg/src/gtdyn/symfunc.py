"""Schur Laurent polynomials, principal specializations and Littlewood-Richardson coefficients."""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import prod
from typing import Sequence

import numpy as np

from .signatures import Signature, format_signature, signature


class DegeneratePointError(ValueError):
    """Bialternant evaluation requested at coincident points."""


def _is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def bareiss_det(matrix: Sequence[Sequence]) -> Fraction:
    """Fraction-free Gaussian elimination; exact for int/Fraction entries."""
    a = [[Fraction(x) for x in row] for row in matrix]
    n = len(a)
    if n == 0:
        return Fraction(1)
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _complete_homogeneous(z: Sequence, kmax: int, exact: bool) -> list:
    """h_0..h_kmax of the variables z, by the division-free recurrence."""
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    h = [one] + [zero] * kmax
    for x in z:
        for k in range(1, kmax + 1):
            h[k] = h[k] + x * h[k - 1]
    return h


def _schur_jacobi_trudi(lam: Signature, z: Sequence, exact: bool):
    # s_lam = (z_1...z_N)^{lam_N} s_{lam - lam_N}, then det[h_{lam_i - i + j}]
    base = lam[-1]
    mu = [p - base for p in lam]
    n = len(mu)
    h = _complete_homogeneous(z, mu[0] + n, exact)
    zero = Fraction(0) if exact else 0.0

    def hk(k):
        return h[k] if k >= 0 else zero

    mat = [[hk(mu[i] - i + j) for j in range(n)] for i in range(n)]
    det = bareiss_det(mat) if exact else float(np.linalg.det(np.array(mat, dtype=float)))
    scale = prod(z) ** base if base >= 0 else 1 / prod(z) ** (-base)
    return det * scale


def schur_eval(lam: Sequence[int], z: Sequence, *, strict: bool = False, sep_tol: float = 1e-6):
    """Evaluate the Schur Laurent polynomial s_lam at the point ``z``.

    Rational input (ints / Fractions) gives an exact Fraction via the bialternant.
    Float input uses an LU determinant divided by the Vandermonde product; when
    two entries are closer than ``sep_tol`` (relative) the Jacobi-Trudi /
    divided-difference route is used instead, unless ``strict`` is set.
    """
    lam = signature(lam)
    n = len(lam)
    if len(z) != n:
        raise ValueError(f"need {n} variables, got {len(z)}")
    if any(x == 0 for x in z):
        raise ValueError("Laurent evaluation needs nonzero variables")
    exact = _is_exact(z)
    if exact:
        z = [Fraction(x) for x in z]
        if len(set(z)) < n:
            if strict:
                raise DegeneratePointError(f"coincident evaluation point {z}")
            return _schur_jacobi_trudi(lam, z, True)
        num = bareiss_det([[zi ** (lam[j] + n - 1 - j) for j in range(n)] for zi in z])
        vand = prod((z[i] - z[j] for i, j in combinations(range(n), 2)), start=Fraction(1))
        return num / vand

    z = [complex(x) if isinstance(x, complex) else float(x) for x in z]
    scale = max(abs(x) for x in z)
    min_sep = min((abs(a - b) for a, b in combinations(z, 2)), default=np.inf)
    if min_sep <= sep_tol * scale:
        if strict:
            raise DegeneratePointError(f"near-coincident evaluation point {z}")
        return _schur_jacobi_trudi(lam, z, False)
    dtype = complex if any(isinstance(x, complex) for x in z) else float
    mat = np.array([[zi ** (lam[j] + n - 1 - j) for j in range(n)] for zi in z], dtype=dtype)
    vand = prod(z[i] - z[j] for i, j in combinations(range(n), 2)) if n > 1 else 1.0
    return np.linalg.det(mat) / vand


def dim_u(lam: Sequence[int], N: int | None = None) -> int:
    """Dimension of the U(N) irreducible with highest weight lam (Weyl product formula)."""
    lam = signature(lam)
    if N is not None and len(lam) != N:
        raise ValueError(f"signature {lam} has length {len(lam)}, expected {N}")
    n = len(lam)
    d = prod(
        (Fraction(lam[i] - i - lam[j] + j, j - i) for i, j in combinations(range(n), 2)),
        start=Fraction(1),
    )
    assert d.denominator == 1 and d > 0
    return int(d)


def _check_q(q) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0,1), got {q}")


def qdim(lam: Sequence[int], N: int, q):
    """Quantum dimension s_lam(q^{N-1}, q^{N-3}, ..., q^{1-N}).

    Product of q-integers [l_i - l_j]/[j - i] with l_i = lam_i - i; exact for
    Fraction q.
    """
    _check_q(q)
    lam = signature(lam)
    if len(lam) != N:
        raise ValueError(f"signature {lam} has length {len(lam)}, expected {N}")

    def qint(m):
        return (q**m - q ** (-m)) / (q - 1 / q)

    one = Fraction(1) if isinstance(q, Fraction) else 1.0
    return prod(
        (qint(lam[i] - i - lam[j] + j) / qint(j - i) for i, j in combinations(range(N), 2)),
        start=one,
    )


def spec_q2(lam: Sequence[int], N: int, q):
    """s_lam(1, q^-2, ..., q^{-2(N-1)}) by the principal-specialization product."""
    _check_q(q)
    lam = signature(lam)
    if len(lam) != N:
        raise ValueError(f"signature {lam} has length {len(lam)}, expected {N}")
    t = 1 / q**2
    one = Fraction(1) if isinstance(q, Fraction) else 1.0
    n_lam = sum(i * p for i, p in enumerate(lam))
    val = t**n_lam if n_lam >= 0 else 1 / t ** (-n_lam)
    return val * prod(
        (
            (1 - t ** (lam[i] - lam[j] + j - i)) / (1 - t ** (j - i))
            for i, j in combinations(range(N), 2)
        ),
        start=one,
    )


def log_spec_q2(lam: Sequence[int], q: float) -> float:
    """log s_lam(1, q^-2, ...) in floating point, safe for large parts."""
    n = len(lam)
    lt = -2.0 * np.log(q)
    out = lt * sum(i * p for i, p in enumerate(lam))
    for i, j in combinations(range(n), 2):
        a, b = lam[i] - lam[j] + j - i, j - i
        # log((t^a - 1)/(t^b - 1)) with t > 1
        out += (a - b) * lt + np.log(-np.expm1(-a * lt)) - np.log(-np.expm1(-b * lt))
    return float(out)


def log_dim_u(lam: Sequence[int]) -> float:
    n = len(lam)
    return float(
        sum(np.log((lam[i] - i - lam[j] + j) / (j - i)) for i, j in combinations(range(n), 2))
    )


# ---------------------------------------------------------------------------
# Littlewood-Richardson coefficients


def _partitions_in(total: int, n: int, cap: int, floor: Sequence[int]):
    """Partitions of ``total`` with at most n parts, parts <= cap, containing ``floor``."""

    def rec(prefix, remaining, top):
        i = len(prefix)
        if i == n:
            if remaining == 0:
                yield tuple(prefix)
            return
        rest_floor = sum(floor[i + 1 :])
        for v in range(min(top, remaining - rest_floor), floor[i] - 1, -1):
            # remaining parts can absorb at most v each
            if remaining - v > v * (n - i - 1):
                break
            prefix.append(v)
            yield from rec(prefix, remaining - v, v)
            prefix.pop()

    yield from rec([], total, cap)


def _lr_count(outer: Sequence[int], inner: Sequence[int], content: Sequence[int]) -> int:
    """Number of LR tableaux of shape outer/inner with the given content.

    Rows are filled top to bottom; a row is described by letter counts
    (weakly increasing row). The reading word (each row right to left) must be
    a lattice word and columns must strictly increase.
    """
    n = len(outer)
    k = len(content)

    def row_fill(counts, start):
        cells = []
        for letter, c in enumerate(counts, start=1):
            cells.extend([letter] * c)
        return {start + t: letter for t, letter in enumerate(cells)}

    def rec(r, totals, above):
        if r == n:
            return int(list(totals) == list(content))
        width = outer[r] - inner[r]
        start = inner[r]
        found = 0
        maxletter = min(r + 1, k)

        def choose(letter, left, counts):
            nonlocal found
            if letter > maxletter:
                if left:
                    return
                new_totals = [t + c for t, c in zip(totals, counts)]
                if any(t > c for t, c in zip(new_totals, content)):
                    return
                # lattice: reading big letters first in this row
                for j in range(1, k):
                    if totals[j] + counts[j] > totals[j - 1]:
                        return
                fill = row_fill(counts, start)
                for col, letter_here in fill.items():
                    a = above.get(col)
                    if a is not None and a >= letter_here:
                        return
                found += rec(r + 1, new_totals, fill)
                return
            if letter == maxletter:
                counts[letter - 1] = left
                choose(letter + 1, 0, counts)
            else:
                for c in range(left + 1):
                    counts[letter - 1] = c
                    choose(letter + 1, left - c, counts)
            counts[letter - 1] = 0

        choose(1, width, [0] * k)
        return found

    if k == 0:
        return int(all(o == i for o, i in zip(outer, inner)))
    return rec(0, [0] * k, {})


@lru_cache(maxsize=None)
def _lr_partitions(mu: tuple, nu: tuple, n: int) -> dict:
    total = sum(mu) + sum(nu)
    nu_pad = tuple(nu) + (0,) * (n - len(nu))
    floor = tuple(max(a, b) for a, b in zip(mu, nu_pad))
    content = tuple(p for p in nu if p > 0)
    out = {}
    for lam in _partitions_in(total, n, mu[0] + (nu[0] if nu else 0), floor):
        c = _lr_count(lam, mu, content)
        if c:
            out[lam] = c
    return out


def lr_coeffs(alpha: Sequence[int], gamma: Sequence[int]) -> dict[Signature, int]:
    """Multiplicities N^beta_{alpha,gamma} in the tensor product of U(N) irreducibles.

    Both inputs are shifted to nonnegative signatures (a determinant twist does
    not change multiplicities) and the LR rule is run with at most N rows.
    """
    alpha, gamma = signature(alpha), signature(gamma)
    n = len(alpha)
    if len(gamma) != n:
        raise ValueError("lr_coeffs needs signatures of equal length")
    a0, g0 = alpha[-1], gamma[-1]
    mu = tuple(p - a0 for p in alpha)
    nu = tuple(p - g0 for p in gamma)
    table = _lr_partitions(mu, nu, n)
    return {tuple(p + a0 + g0 for p in lam): c for lam, c in table.items()}


def lr_to_json(table: dict[Signature, int]) -> str:
    return json.dumps({format_signature(b): c for b, c in sorted(table.items(), reverse=True)})


def log_dim_array(sigs: np.ndarray) -> np.ndarray:
    """log dim_u for every row of an (M, N) integer array."""
    sigs = np.asarray(sigs, dtype=float)
    n = sigs.shape[1]
    out = np.zeros(sigs.shape[0])
    for i, j in combinations(range(n), 2):
        out += np.log((sigs[:, i] - i - sigs[:, j] + j) / (j - i))
    return out


def log_spec_q2_array(sigs: np.ndarray, q: float) -> np.ndarray:
    """log s_lam(1, q^-2, ..., q^{-2(N-1)}) for every row of an (M, N) integer array."""
    sigs = np.asarray(sigs, dtype=float)
    n = sigs.shape[1]
    lt = -2.0 * np.log(q)
    out = lt * (sigs * np.arange(n)).sum(axis=1)
    for i, j in combinations(range(n), 2):
        a = sigs[:, i] - sigs[:, j] + j - i
        b = j - i
        out += (a - b) * lt + np.log(-np.expm1(-a * lt)) - np.log(-np.expm1(-b * lt))
    return out

"""Toeplitz-like kernels in particle coordinates and the multilevel operator P_N.

Kernels act on strictly increasing configurations X = (x_1 < ... < x_n),
related to signatures by :func:`gtdyn.signatures.to_xconfig`. A
:class:`ToeplitzSpec` bundles the nodes alpha_i, the Laurent coefficients f(m)
of a function F, the values F(1/alpha_i) and the rule for the virtual column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .generators import _as_array, transition_entries
from .links import link_column
from .signatures import GTPattern, Signature, SignatureBox, to_xconfig
from .voiculescu import (
    CoeffWindow,
    DomainError,
    OmegaPoint,
    WindowCapError,
    default_window,
    phi_coeffs_series,
    phi_eval_real,
    validate_q_case,
    window_for,
)

WindowSource = Callable[[int, int], CoeffWindow]


class ResamplingError(RuntimeError):
    """A conditional law of the sequential sampler had no usable mass."""


@dataclass(frozen=True)
class ToeplitzSpec:
    """Data (alpha, F) defining T_n and T^n_{n-1}.

    ``fcoeffs`` holds f(m), the coefficient of z^m in F. ``source`` (optional)
    rebuilds a wider window on demand. ``virt_rule`` maps x to f(x - virt).
    """

    alphas: tuple[float, ...]
    fcoeffs: CoeffWindow = field(repr=False)
    fvals: tuple[float, ...]
    virt_rule: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    source: WindowSource | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if np.any(a <= 0):
            raise ValueError("alphas must be positive")
        if len(set(self.alphas)) != len(self.alphas):
            raise ValueError("alphas must be pairwise distinct")
        if any(v == 0 for v in self.fvals):
            raise DomainError("F(1/alpha_i) must be nonzero for every i")

    def coeffs(self, lo: int, hi: int) -> CoeffWindow:
        if self.fcoeffs.covers(lo, hi):
            return self.fcoeffs
        if self.source is None:
            raise WindowCapError(
                f"f is known on [{self.fcoeffs.n_min}, {self.fcoeffs.n_max}], need [{lo}, {hi}]"
            )
        return self.source(lo, hi)


def _reverse(w: CoeffWindow) -> CoeffWindow:
    return CoeffWindow(-w.n_max, -w.n_min, w.coeffs[::-1].copy(), w.tail_mass, w.method)


def _alphas(n: int, q: float) -> tuple[float, ...]:
    return tuple(q ** (-2 * i) for i in range(n))


def psi_spec(omega: OmegaPoint, n: int, q: float) -> ToeplitzSpec:
    """F = Psi_omega(z) = Phi_omega(1/z): f(m) = phi(-m), F(1/alpha_i) = Phi(alpha_i)."""
    validate_q_case(omega, n, q)
    alphas = _alphas(n, q)

    def source(lo, hi):
        return _reverse(window_for(omega, -hi, -lo))

    fvals = tuple(phi_eval_real(omega, a) for a in alphas)
    return ToeplitzSpec(alphas, _reverse(default_window(omega)), fvals, None, source)


def _geometric(r: float, lo: int, hi: int) -> CoeffWindow:
    lo, hi = min(lo, 0), max(hi, 0)
    m = np.arange(lo, hi + 1)
    return CoeffWindow(lo, hi, np.where(m >= 0, r ** np.maximum(m, 0).astype(float), 0.0), 0.0, "closed")


def link_spec(n: int, q: float, reach: int = 64) -> ToeplitzSpec:
    """F_n(z) = 1/(1 - r z), r = q^{-2(n-1)}, with f(x - virt) = r^x."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0,1), got {q}")
    if n < 2:
        raise ValueError("the down kernel needs n >= 2")
    alphas = _alphas(n, q)
    r = alphas[-1]

    def source(lo, hi):
        return _geometric(r, lo, hi)

    fvals = tuple(1.0 / (1.0 - r / a) for a in alphas[:-1])
    return ToeplitzSpec(alphas, _geometric(r, 0, reach), fvals, lambda x: r ** np.asarray(x, float), source)


def _psi_link_coeffs(omega: OmegaPoint, r: float, lo: int, hi: int) -> CoeffWindow:
    """Coefficients g(m) = sum_{k>=0} r^k phi(k - m) of Psi_omega(z)/(1 - r z) on [lo, hi].

    Sums run in the direction where phi decays faster than r^-k; the truncation
    is certified against the closed value Phi_omega(r) = sum_n r^n phi(n).
    """
    target = phi_eval_real(omega, r)
    base = default_window(omega)
    n_lo, n_hi = min(base.n_min, -hi), max(base.n_max, -lo)
    while True:
        w = phi_coeffs_series(omega, n_lo, n_hi)
        idx = w.indices.astype(float)
        lw = np.where(w.coeffs > 0, np.log(np.maximum(w.coeffs, 1e-320)) + idx * np.log(r), -np.inf)
        weighted = np.exp(lw)
        if abs(weighted.sum() - target) <= 1e-13 * target or n_hi >= 4096:
            break
        n_hi = max(n_hi, 1) * 2
    if abs(weighted.sum() - target) > 1e-10 * target:
        raise WindowCapError("weighted coefficient sum does not reach Phi_omega(r)")
    # suffix[j] = sum_{n >= n_lo + j} r^n phi(n)
    suffix = np.cumsum(weighted[::-1])[::-1]
    m = np.arange(lo, hi + 1)
    start = np.clip(-m - n_lo, 0, len(suffix))
    tail = np.append(suffix, 0.0)[start]
    coeffs = tail * r ** (m.astype(float))
    # rows with -m below the window see the full sum Phi(r)
    coeffs = np.where(-m < n_lo, target * r ** m.astype(float), coeffs)
    return CoeffWindow(lo, hi, coeffs, w.tail_mass, "convolution")


def _psi_link_coeffs_outer(omega: OmegaPoint, r: float, lo: int, hi: int) -> CoeffWindow:
    """Coefficients h(m) = -sum_{k>=1} r^-k phi(-k - m) of Psi_omega(z)/(1 - r z) for |z| > 1/r.

    h(m) = g(m) - Phi_omega(r) r^m, so each column of f(x_i - y_j) changes by a
    multiple of the virtual column r^{x_i} and down-kernel determinants agree.
    All terms are bounded by max phi, which avoids the cancellation that the
    growing g(m) suffers.
    """
    K = int(np.ceil(40 * np.log(10) / np.log(r))) + 1
    base = default_window(omega)
    w = window_for(omega, min(base.n_min, -hi - K), max(base.n_max, -lo - 1))
    m = np.arange(lo, hi + 1)
    k = np.arange(1, K + 1)
    coeffs = -(w(-k[None, :] - m[:, None]) * r ** (-k[None, :].astype(float))).sum(axis=1)
    return CoeffWindow(lo, hi, coeffs, w.tail_mass, "convolution-outer")


def delta_spec(omega: OmegaPoint, n: int, q: float, reach: int = 64, expansion: str = "outer") -> ToeplitzSpec:
    """F = Psi_omega * F_n with the same virtual rule as the link kernel.

    ``expansion="inner"`` uses the Taylor side of 1/(1 - r z) (coefficients grow
    like r^m); ``"outer"`` uses the side |z| > 1/r. Both give the same kernel.
    """
    if n < 2:
        raise ValueError("the down kernel needs n >= 2")
    validate_q_case(omega, n, q)
    alphas = _alphas(n, q)
    r = alphas[-1]
    if expansion == "inner":
        build = _psi_link_coeffs
    elif expansion == "outer":
        build = _psi_link_coeffs_outer
    else:
        raise ValueError(f"unknown expansion {expansion!r}")

    def source(lo, hi):
        return build(omega, r, lo, hi)

    fvals = tuple(phi_eval_real(omega, a) / (1.0 - r / a) for a in alphas[:-1])
    return ToeplitzSpec(alphas, build(omega, r, -reach, reach), fvals, lambda x: r ** np.asarray(x, float), source)


def _log_alpha_det(alphas: Sequence[float], X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log|det[alpha_i^{x_j}]| for each row of X."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    a = np.asarray(alphas[:n], dtype=float)
    if n == 1:
        return np.ones(len(X)), X[:, 0] * np.log(a[0])
    ratio = a[1] / a[0]
    if a[0] == 1.0 and np.allclose(a, ratio ** np.arange(n), rtol=1e-14):
        # Vandermonde in s^{x_j}: prod_{j<k} (s^{x_k} - s^{x_j})
        ls = np.log(ratio)
        out = np.zeros(len(X))
        sign = np.ones(len(X))
        for j in range(n):
            for k in range(j + 1, n):
                d = (X[:, j] - X[:, k]) * ls
                sign *= np.where(d < 0, 1.0, -1.0)
                hi = np.maximum(X[:, j], X[:, k]) * ls
                out += hi + np.log(-np.expm1(-np.abs(d)))
        return sign, out
    mats = a[None, :, None] ** X[:, None, :]
    return np.linalg.slogdet(mats)


def toeplitz_T_matrix(spec: ToeplitzSpec, Xs: np.ndarray, Ys: np.ndarray) -> np.ndarray:
    """T_n(X, Y) for every pair of rows of ``Xs`` (R, n) and ``Ys`` (C, n)."""
    Xs = np.asarray(Xs, dtype=np.int64)
    Ys = np.asarray(Ys, dtype=np.int64)
    n = Xs.shape[1]
    if Ys.shape[1] != n or len(spec.alphas) < n:
        raise ValueError("configurations and alphas must share the length n")
    f = spec.coeffs(int(Xs.min() - Ys.max()), int(Xs.max() - Ys.min()))
    mats = f(Xs[:, None, :, None] - Ys[None, :, None, :])
    dets = np.linalg.det(mats) if n > 1 else mats[..., 0, 0]
    sx, lx = _log_alpha_det(spec.alphas, Xs)
    sy, ly = _log_alpha_det(spec.alphas, Ys)
    ratio = (sy[None, :] * sx[:, None]) * np.exp(ly[None, :] - lx[:, None])
    return ratio * dets / float(np.prod(spec.fvals[:n]))


def toeplitz_T(spec: ToeplitzSpec, X: Sequence[int], Y: Sequence[int]) -> float:
    return float(toeplitz_T_matrix(spec, np.array([X]), np.array([Y]))[0, 0])


def toeplitz_Tdown_matrix(spec: ToeplitzSpec, Xs: np.ndarray, Ys: np.ndarray) -> np.ndarray:
    """T^n_{n-1}(X, Y) for rows of ``Xs`` (R, n) and ``Ys`` (C, n-1); y_n is virtual."""
    if spec.virt_rule is None:
        raise ValueError("the down kernel needs a virtual-column rule")
    Xs = np.asarray(Xs, dtype=np.int64)
    Ys = np.asarray(Ys, dtype=np.int64)
    n = Xs.shape[1]
    if Ys.shape[1] != n - 1 or len(spec.alphas) < n:
        raise ValueError("Y must be one shorter than X")
    R, C = len(Xs), len(Ys)
    mats = np.empty((R, C, n, n))
    if n > 1:
        f = spec.coeffs(int(Xs.min() - Ys.max()), int(Xs.max() - Ys.min()))
        mats[..., :, : n - 1] = f(Xs[:, None, :, None] - Ys[None, :, None, :])
    mats[..., :, n - 1] = spec.virt_rule(Xs)[:, None, :]
    dets = np.linalg.det(mats)
    sx, lx = _log_alpha_det(spec.alphas, Xs)
    if n > 1:
        sy, ly = _log_alpha_det(spec.alphas, Ys)
    else:
        sy, ly = np.ones(C), np.zeros(C)
    ratio = (sy[None, :] * sx[:, None]) * np.exp(ly[None, :] - lx[:, None])
    return ratio * dets / float(np.prod(spec.fvals[: n - 1]))


def toeplitz_Tdown(spec: ToeplitzSpec, X: Sequence[int], Y: Sequence[int]) -> float:
    return float(toeplitz_Tdown_matrix(spec, np.array([X]), np.array([Y]).reshape(1, -1))[0, 0])


def xconfigs(sigs: Sequence[Signature]) -> np.ndarray:
    return np.array([to_xconfig(s) for s in sigs], dtype=np.int64).reshape(len(sigs), -1)


# ---------------------------------------------------------------------------
# composite kernel Delta = Q Lambda


@dataclass
class DeltaResult:
    """Delta on row_box x col_box by two routes; ``interior`` marks exact product rows."""

    row_box: SignatureBox
    col_box: SignatureBox
    product: np.ndarray = field(repr=False)
    direct: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)

    @property
    def defect(self) -> float:
        if not self.interior.any():
            return 0.0
        return float(np.abs(self.product - self.direct)[self.interior].max())


def _trim(w: CoeffWindow, tol: float, side: str) -> int:
    """Index bound beyond which the coefficients of ``w`` carry at most ``tol`` mass."""
    c = np.maximum(w.coeffs, 0.0)
    if side == "lo":
        i = int(np.searchsorted(np.cumsum(c), tol, side="right"))
        return w.n_min + min(i, len(c) - 1)
    i = int(np.searchsorted(np.cumsum(c[::-1]), tol, side="right"))
    return w.n_max - min(i, len(c) - 1)


@lru_cache(maxsize=4096)
def _reach(omega: OmegaPoint, n: int, q: float | None = None, tol: float = 1e-13) -> tuple[int, int]:
    """Offsets (lo, hi) such that one Q-step from lam stays in lam + [lo, hi] up to about ``tol``.

    Upward moves of the top part are weighted by r^k with r = q^{-2(n-1)}, so
    the upper reach is read off the tilted coefficients phi(k) r^k / Phi(r).
    """
    r = 1.0 if q is None or q == 1 else float(q) ** (-2 * (n - 1))
    target = max(tol / 4, 1e-13)
    down = default_window(omega, target)
    up = default_window(omega.tilt(r), target) if r != 1.0 else down
    return _trim(down, tol / 4, "lo") - n, _trim(up, tol / 4, "hi") + n


def _range_states(n: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """All signatures nu with lo_i <= nu_i <= hi_i (per-part bounds)."""
    grids = [np.arange(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    if any(len(g) == 0 for g in grids):
        return np.zeros((0, n), dtype=np.int64)
    mesh = np.array(np.meshgrid(*grids, indexing="ij")).reshape(n, -1).T
    ok = np.all(mesh[:, :-1] >= mesh[:, 1:], axis=1) if n > 1 else np.ones(len(mesh), bool)
    return mesh[ok]


def _reachable(lam: Sequence[int], reach: tuple[int, int]) -> np.ndarray:
    lam = np.asarray(lam)
    return _range_states(len(lam), lam + reach[0], lam + reach[1])


def delta_kernel(
    n: int, omega: OmegaPoint, q: float, row_box: SignatureBox, col_box: SignatureBox
) -> DeltaResult:
    """Delta^n_{n-1} as the product Q Lambda and directly as T^n_{n-1}(Psi F_n)."""
    if row_box.N != n or col_box.N != n - 1:
        raise ValueError("boxes must sit at levels n and n-1")
    validate_q_case(omega, n, q)
    reach = _reach(omega, n, q)
    product = np.zeros((len(row_box), len(col_box)))
    interior = np.zeros(product.shape, dtype=bool)
    for i, lam in enumerate(row_box.states):
        nus = _reachable(lam, reach)
        qrow, _ = transition_entries(omega, n, q, np.array([lam]), nus)
        qrow = qrow[0]
        for j, mu in enumerate(col_box.states):
            product[i, j] = link_column(n, q, nus, mu) @ qrow
        interior[i] = True
    spec = delta_spec(omega, n, q)
    direct = toeplitz_Tdown_matrix(spec, xconfigs(row_box.states), xconfigs(col_box.states))
    return DeltaResult(row_box, col_box, product, direct, interior)


# ---------------------------------------------------------------------------
# multilevel operator P_N


def _level_candidates(lam: Sequence[int], mu_below: Sequence[int] | None, reach) -> np.ndarray:
    """Level-n signatures nu within one-step reach of lam that interlace over mu_below."""
    lam = np.asarray(lam)
    n = len(lam)
    lo, hi = lam + reach[0], lam + reach[1]
    if mu_below is not None:
        mb = np.asarray(mu_below)
        # mu_below < nu: nu_1 >= mb_1, mb_{i-1} >= nu_i >= mb_i, nu_n <= mb_{n-1}
        lo = lo.copy()
        hi = hi.copy()
        lo[:-1] = np.maximum(lo[:-1], mb)
        hi[1:] = np.minimum(hi[1:], mb)
    return _range_states(n, lo, hi)


def _conditional(omega, q, lam, mu_below, reach) -> tuple[np.ndarray, np.ndarray]:
    """Candidates and weights Q(lam, nu) Lambda(nu, mu_below) (unnormalized)."""
    n = len(lam)
    cand = _level_candidates(lam, mu_below, reach)
    if len(cand) == 0:
        return cand, np.zeros(0)
    qrow, _ = transition_entries(omega, n, q, np.array([lam]), cand)
    w = qrow[0]
    if mu_below is not None:
        w = w * link_column(n, q, cand, mu_below)
    return cand, np.maximum(w, 0.0)


@lru_cache(maxsize=65536)
def _conditional_cdf(omega, q, lam, below, reach):
    cand, w = _conditional(omega, q, lam, below, reach)
    return cand, np.cumsum(w)


def multilevel_law(state: GTPattern, omega: OmegaPoint, q: float | None) -> dict[tuple, float]:
    """Exact one-step law of :func:`multilevel_step`, by enumerating its conditional choices."""
    reach = _reach(omega, state.depth, q)
    law: dict[tuple, float] = {}

    def rec(n, chosen, prob):
        if n > state.depth:
            law[tuple(chosen)] = law.get(tuple(chosen), 0.0) + prob
            return
        below = chosen[-1] if chosen else None
        cand, w = _conditional(omega, q, state.levels[n - 1], below, reach)
        total = w.sum()
        if not total > 0:
            raise ResamplingError(f"no mass at level {n} given {below}")
        for c, p in zip(cand, w):
            if p > 0:
                rec(n + 1, chosen + [tuple(int(v) for v in c)], prob * p / total)

    rec(1, [], 1.0)
    return law


def multilevel_step(
    state: GTPattern, omega: OmegaPoint, q: float | None, seed: int | np.random.Generator
) -> GTPattern:
    """One step of P_N: level by level inverse-CDF draws of mu^(n) given mu^(n-1)."""
    rng = np.random.default_rng(seed)
    if omega.is_zero:
        return state
    reach = _reach(omega, state.depth, q)
    out: list[Signature] = []
    for n, lam in enumerate(state.levels, start=1):
        below = out[-1] if out else None
        cand, cdf = _conditional_cdf(omega, q, lam, below, reach)
        total = float(cdf[-1]) if len(cdf) else 0.0
        if not (np.isfinite(total) and total > 0):
            raise ResamplingError(
                f"zero normalizer at level {n}: lam={lam}, mu_below={below}, "
                f"{len(cand)} candidates, total weight {total}"
            )
        k = int(np.searchsorted(cdf, rng.random() * total, side="right"))
        out.append(tuple(int(v) for v in cand[min(k, len(cand) - 1)]))
    return GTPattern(tuple(out))


def pn_entry(
    state: GTPattern, target: GTPattern, omega: OmegaPoint, q: float, spec_cache: dict | None = None
) -> float:
    """P_N(X, Y) from the product formula with Delta evaluated as a Toeplitz kernel."""
    lam, mu = state.levels, target.levels
    val = float(np.asarray(transition_entries(omega, 1, q, np.array([lam[0]]), np.array([mu[0]]))[0])[0, 0])
    cache = {} if spec_cache is None else spec_cache
    for n in range(2, state.depth + 1):
        qn = transition_entries(omega, n, q, np.array([lam[n - 1]]), np.array([mu[n - 1]]))[0][0, 0]
        ln = link_column(n, q, np.array([mu[n - 1]]), mu[n - 2])[0]
        if n not in cache:
            cache[n] = delta_spec(omega, n, q)
        dn = toeplitz_Tdown(cache[n], to_xconfig(lam[n - 1]), to_xconfig(mu[n - 2]))
        if qn * ln == 0:
            return 0.0
        val *= qn * ln / dn
    return float(val)


def pn_row(state: GTPattern, omega: OmegaPoint, q: float) -> dict[tuple, float]:
    """Row of P_N by enumeration over every reachable pattern."""
    reach = _reach(omega, state.depth, q)
    per_level = [
        [tuple(int(v) for v in c) for c in _level_candidates(lam, None, reach)] for lam in state.levels
    ]
    cache: dict = {}
    row = {}
    for combo in product(*per_level):
        if any(
            not all(combo[n][i] >= combo[n - 1][i] >= combo[n][i + 1] for i in range(n))
            for n in range(1, len(combo))
        ):
            continue
        v = pn_entry(state, GTPattern(combo), omega, q, cache)
        if v != 0:
            row[combo] = v
    return row

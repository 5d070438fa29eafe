"""Boundary points omega, the generating function Phi_omega and its Laurent coefficients.

Two coefficient engines are provided: a factorwise series expansion combined
by convolution, and a discrete Fourier transform of Phi_omega on the unit
circle. Each one serves as the check for the other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import lgamma, log
from typing import Sequence

import numpy as np

WINDOW_CAP = 4096
TAIL_TARGET = 1e-12


class DomainError(ValueError):
    """A point or parameter lies outside the region where a formula is valid."""


class WindowCapError(RuntimeError):
    """The coefficient window would need to exceed the hard cap."""


def _as_decreasing(values, name: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if any(v < 0 for v in vals):
        raise ValueError(f"{name} entries must be nonnegative: {vals}")
    if any(a < b for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be weakly decreasing: {vals}")
    return tuple(v for v in vals if v > 0)


@dataclass(frozen=True)
class OmegaPoint:
    """Finitely supported point (alpha+-, beta+-, gamma+-) of the boundary.

    ``gamma_plus``/``gamma_minus`` are the exponential weights themselves.
    """

    alpha_plus: tuple[float, ...] = ()
    beta_plus: tuple[float, ...] = ()
    alpha_minus: tuple[float, ...] = ()
    beta_minus: tuple[float, ...] = ()
    gamma_plus: float = 0.0
    gamma_minus: float = 0.0

    def __post_init__(self):
        for name in ("alpha_plus", "beta_plus", "alpha_minus", "beta_minus"):
            object.__setattr__(self, name, _as_decreasing(getattr(self, name), name))
        for name in ("gamma_plus", "gamma_minus"):
            v = float(getattr(self, name))
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, v)
        b1 = (self.beta_plus[:1] or (0.0,))[0] + (self.beta_minus[:1] or (0.0,))[0]
        if b1 > 1 + 1e-15:
            raise ValueError(f"beta_plus[0] + beta_minus[0] = {b1} exceeds 1")

    @property
    def is_zero(self) -> bool:
        return not (
            self.alpha_plus
            or self.beta_plus
            or self.alpha_minus
            or self.beta_minus
            or self.gamma_plus
            or self.gamma_minus
        )

    def power(self, k: int) -> "OmegaPoint":
        """The point whose Phi is Phi_omega ** k (parameter lists repeated, gammas scaled)."""
        if k < 0:
            raise ValueError("power must be nonnegative")
        return OmegaPoint(
            tuple(sorted(self.alpha_plus * k, reverse=True)),
            tuple(sorted(self.beta_plus * k, reverse=True)),
            tuple(sorted(self.alpha_minus * k, reverse=True)),
            tuple(sorted(self.beta_minus * k, reverse=True)),
            self.gamma_plus * k,
            self.gamma_minus * k,
        )

    def tilt(self, r: float) -> "OmegaPoint":
        """The point with Phi(z) = Phi_omega(r z) / Phi_omega(r), i.e. phi(n) r^n / Phi_omega(r)."""
        if r <= 0:
            raise ValueError("tilt needs r > 0")
        if self.alpha_plus and not self.alpha_plus[0] * (r - 1) < 1:
            raise DomainError(f"tilt by r={r} crosses the pole of the alpha_plus factor")
        try:
            return OmegaPoint(
                tuple(a * r / (1 - a * (r - 1)) for a in self.alpha_plus),
                tuple(b * r / (1 + b * (r - 1)) for b in self.beta_plus),
                tuple((a / r) / (1 - a * (1 / r - 1)) for a in self.alpha_minus),
                tuple((b / r) / (1 + b * (1 / r - 1)) for b in self.beta_minus),
                self.gamma_plus * r,
                self.gamma_minus / r,
            )
        except ValueError as exc:
            raise DomainError(f"tilt by r={r} leaves the parameter domain: {exc}") from exc

    def support_bounds(self) -> tuple[float, float]:
        """Smallest and largest n with phi(n) possibly nonzero (+-inf when unbounded)."""
        hi = len(self.beta_plus) if not (self.alpha_plus or self.gamma_plus) else np.inf
        lo = -len(self.beta_minus) if not (self.alpha_minus or self.gamma_minus) else -np.inf
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "alpha_plus": list(self.alpha_plus),
            "beta_plus": list(self.beta_plus),
            "alpha_minus": list(self.alpha_minus),
            "beta_minus": list(self.beta_minus),
            "gamma_plus": self.gamma_plus,
            "gamma_minus": self.gamma_minus,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OmegaPoint":
        known = {"alpha_plus", "beta_plus", "alpha_minus", "beta_minus", "gamma_plus", "gamma_minus"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown omega fields: {sorted(extra)}")
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OmegaPoint":
        return cls.from_dict(json.loads(text))


def annulus(omega: OmegaPoint) -> tuple[float, float]:
    """Open annulus r_in < |z| < r_out where Phi_omega is analytic."""
    r_out = 1 + 1 / omega.alpha_plus[0] if omega.alpha_plus else np.inf
    r_in = 1 / (1 + 1 / omega.alpha_minus[0]) if omega.alpha_minus else 0.0
    return r_in, r_out


def phi_eval(omega: OmegaPoint, z):
    """Phi_omega(z); raises DomainError at or beyond a pole of an alpha factor."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise DomainError("Phi_omega is evaluated at nonzero z only")
    r_in, r_out = annulus(omega)
    absz = np.abs(z)
    if np.any(absz >= r_out):
        raise DomainError(
            f"|z| reaches the pole of 1/(1 - alpha_plus_1 (z - 1)) at |z| = {r_out}"
        )
    if np.any(absz <= r_in):
        raise DomainError(
            f"|1/z| reaches the pole of 1/(1 - alpha_minus_1 (1/z - 1)) at |z| = {r_in}"
        )
    w = 1 / z
    out = np.exp(omega.gamma_plus * (z - 1) + omega.gamma_minus * (w - 1))
    for b in omega.beta_plus:
        out = out * (1 + b * (z - 1))
    for a in omega.alpha_plus:
        out = out / (1 - a * (z - 1))
    for b in omega.beta_minus:
        out = out * (1 + b * (w - 1))
    for a in omega.alpha_minus:
        out = out / (1 - a * (w - 1))
    return out if out.ndim else complex(out)


def phi_eval_real(omega: OmegaPoint, x: float) -> float:
    """Phi_omega at a positive real point, in real arithmetic."""
    return float(np.real(phi_eval(omega, complex(x))))


@dataclass(frozen=True)
class CoeffWindow:
    """Laurent coefficients on n_min..n_max plus an upper bound on the mass outside."""

    n_min: int
    n_max: int
    coeffs: np.ndarray = field(repr=False)
    tail_mass: float = 0.0
    method: str = "series"

    def __post_init__(self):
        if len(self.coeffs) != self.n_max - self.n_min + 1:
            raise ValueError("coefficient array does not match the window")

    def __call__(self, n):
        """Coefficient(s) at integer index n; zero outside the window."""
        n = np.asarray(n)
        idx = n - self.n_min
        inside = (idx >= 0) & (idx < len(self.coeffs))
        out = np.where(inside, self.coeffs[np.clip(idx, 0, len(self.coeffs) - 1)], 0.0)
        return out if out.ndim else float(out)

    def covers(self, lo: int, hi: int) -> bool:
        return self.n_min <= lo and hi <= self.n_max

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def with_coeffs(self, coeffs: np.ndarray) -> "CoeffWindow":
        return CoeffWindow(self.n_min, self.n_max, np.asarray(coeffs, float), self.tail_mass, self.method)


# ---------------------------------------------------------------------------
# series engine


def _exp_series(g: float, length: int) -> np.ndarray:
    """Coefficients e^{-g} g^n / n! of e^{g(z-1)} for n < length."""
    if g == 0:
        out = np.zeros(length)
        out[0] = 1.0
        return out
    n = np.arange(length)
    return np.exp(-g + n * log(g) - np.array([lgamma(k + 1) for k in n]))


def _geom_series(a: float, length: int) -> np.ndarray:
    """Coefficients a^n / (1+a)^{n+1} of 1/(1 - a(z-1))."""
    n = np.arange(length)
    return np.exp(n * log(a / (1 + a)) - log(1 + a))


def _one_sided_length(gamma: float, alphas: Sequence[float], betas: Sequence[float], eps: float) -> int:
    """Number of terms after which every factor expansion is below eps."""
    length = len(betas) + 1
    if gamma > 0:
        n = int(gamma) + 1
        while -gamma + n * log(gamma) - lgamma(n + 1) > log(eps):
            n += 1
        length += n
    for a in alphas:
        length += int(np.ceil(log(eps) / log(a / (1 + a)))) + 1
    return length


def _one_sided(gamma: float, alphas, betas, length: int) -> np.ndarray:
    out = _exp_series(gamma, length)
    for b in betas:
        out = np.convolve(out, [1 - b, b])[:length]
    for a in alphas:
        out = np.convolve(out, _geom_series(a, length))[:length]
    return out


def phi_coeffs_series(omega: OmegaPoint, n_min: int, n_max: int) -> CoeffWindow:
    """phi_omega(n) on [n_min, n_max] by expanding each factor and convolving.

    The z-part P and the 1/z-part M have nonnegative coefficients, and
    phi(n) = sum_k P(n + k) M(k). The tail mass is the exact leftover 1 - sum.
    """
    if n_min > n_max:
        raise ValueError("empty coefficient window")
    if n_max - n_min + 1 > 2 * WINDOW_CAP + 1:
        raise WindowCapError(f"window [{n_min}, {n_max}] exceeds the cap of |n| <= {WINDOW_CAP}")
    eps = 1e-300
    lp = _one_sided_length(omega.gamma_plus, omega.alpha_plus, omega.beta_plus, 1e-20)
    lm = _one_sided_length(omega.gamma_minus, omega.alpha_minus, omega.beta_minus, 1e-20)
    lp = max(lp, n_max + 1, 1)
    lm = max(lm, -n_min + 1, 1)
    P = _one_sided(omega.gamma_plus, omega.alpha_plus, omega.beta_plus, lp)
    M = _one_sided(omega.gamma_minus, omega.alpha_minus, omega.beta_minus, lm)
    coeffs = np.zeros(n_max - n_min + 1)
    for t, n in enumerate(range(n_min, n_max + 1)):
        k0 = max(0, -n)
        k1 = min(lm, lp - n)
        if k1 > k0:
            coeffs[t] = float(np.dot(P[n + k0 : n + k1], M[k0:k1]))
    coeffs[coeffs < eps] = 0.0
    tail = max(0.0, 1.0 - float(np.sum(coeffs)))
    return CoeffWindow(n_min, n_max, coeffs, tail, "series")


def phi_coeffs_contour(omega: OmegaPoint, n_min: int, n_max: int, m: int | None = None) -> CoeffWindow:
    """phi_omega(n) on [n_min, n_max] from m samples of Phi_omega on the unit circle.

    The estimate for index n is the aliased sum of phi(n + k m) over k.
    """
    width = n_max - n_min + 1
    if width < 1:
        raise ValueError("empty coefficient window")
    if m is None:
        m = max(4 * width, 1024)
        m = 1 << int(np.ceil(np.log2(m)))
    if m < 4 * width:
        raise ValueError(f"grid size {m} is below 4 x window width {width}")
    r_in, r_out = annulus(omega)
    if not (r_in < 1 < r_out):
        raise DomainError("the unit circle is not inside the annulus of analyticity")
    z = np.exp(2j * np.pi * np.arange(m) / m)
    vals = phi_eval(omega, z)
    spectrum = np.fft.fft(vals) / m
    idx = np.arange(n_min, n_max + 1) % m
    coeffs = np.real(spectrum[idx])
    tail = max(0.0, 1.0 - float(np.sum(coeffs)))
    return CoeffWindow(n_min, n_max, coeffs, tail, "contour")


def default_window(omega: OmegaPoint, tail_target: float = TAIL_TARGET, min_half: int = 8) -> CoeffWindow:
    """Grow a symmetric window until the tail mass drops below ``tail_target``."""
    lo_b, hi_b = omega.support_bounds()
    half = min_half
    while True:
        n_min = int(max(-half, lo_b)) if np.isfinite(lo_b) else -half
        n_max = int(min(half, hi_b)) if np.isfinite(hi_b) else half
        w = phi_coeffs_series(omega, n_min, n_max)
        if w.tail_mass < tail_target:
            return w
        if half >= WINDOW_CAP:
            raise WindowCapError(
                f"tail mass {w.tail_mass:.3e} still above {tail_target} at |n| <= {WINDOW_CAP}"
            )
        half = min(2 * half, WINDOW_CAP)


def window_for(omega: OmegaPoint, lo: int, hi: int, tail_target: float = TAIL_TARGET) -> CoeffWindow:
    """A series window covering [lo, hi] and at least the default tail target."""
    base = default_window(omega, tail_target)
    lo, hi = min(lo, base.n_min), max(hi, base.n_max)
    if max(-lo, hi) > WINDOW_CAP:
        raise WindowCapError(f"required indices [{lo}, {hi}] exceed |n| <= {WINDOW_CAP}")
    return phi_coeffs_series(omega, lo, hi)


@dataclass
class PositivityReport:
    order: int
    trials: int
    worst_minor: float
    worst_rows: tuple[int, ...]
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst_minor >= -self.tol


def check_total_positivity(
    w: CoeffWindow, k: int, trials: int, rng: np.random.Generator | int | None = 0, tol: float = 1e-12
) -> PositivityReport:
    """Sample minors det[phi(m_i + j)]_{i,j=1..k} with m_1 > ... > m_k inside the window.

    For k = 1 every coefficient is checked. ``tol`` is scaled by the largest
    product of row maxima so it is relative to the size of the minor.
    """
    if k < 1:
        raise ValueError("order must be >= 1")
    if k == 1:
        i = int(np.argmin(w.coeffs))
        return PositivityReport(1, len(w.coeffs), float(w.coeffs[i]), (w.n_min + i - 1,), tol)
    rng = np.random.default_rng(rng)
    # row index m needs m+1..m+k inside the window
    cand = np.arange(w.n_min - 1, w.n_max - k + 1)
    if len(cand) < k:
        raise ValueError("window too narrow for the requested order")
    worst, worst_rows = np.inf, ()
    cols = np.arange(1, k + 1)
    for _ in range(trials):
        rows = np.sort(rng.choice(cand, size=k, replace=False))[::-1]
        mat = w(rows[:, None] + cols[None, :])
        scale = max(1.0, float(np.prod(np.abs(mat).max(axis=1))))
        det = float(np.linalg.det(mat)) / scale
        if det < worst:
            worst, worst_rows = det, tuple(int(r) for r in rows)
    return PositivityReport(k, trials, worst, worst_rows, tol)


def validate_q_case(omega: OmegaPoint, N: int, q: float) -> None:
    """Raise DomainError unless Phi_omega is analytic and positive at 1, q^-2, ..., q^{-2(N-1)}."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0,1), got {q}")
    top = q ** (-2 * (N - 1))
    if omega.alpha_plus and N > 1 and not omega.alpha_plus[0] < 1 / (top - 1):
        raise DomainError(
            f"annulus condition alpha_plus_1 < (q^-2(N-1) - 1)^-1 = {1 / (top - 1):.6g} fails "
            f"(alpha_plus_1 = {omega.alpha_plus[0]}); Laurent expansion must converge at q^-2(N-1)"
        )
    for i in range(1, N + 1):
        x = q ** (-2 * (i - 1))
        val = phi_eval_real(omega, x)
        if not val > 0:
            raise DomainError(f"positivity condition Phi_omega(q^-2({i}-1)) > 0 fails: value {val}")

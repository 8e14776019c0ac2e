"""Univariate polynomial machinery: smoothed sign steps, core indicators,
Gauss-Hermite quadrature, Hermite-optimal witnesses, and the univariate
reductions that turn directional second moments into one-variable polynomials.

Everything here works on dense monomial coefficient vectors (ascending
degree) in double precision.  That choice caps usable degrees around 60:
bounded step-like polynomials of higher degree lose accuracy to coefficient
cancellation near the edge of their domain, and constructors in this module
verify their output on dense grids and refuse to return anything that fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate

from .prng import substream

# Degree guard for step-family constructions: beyond this, monomial-basis
# evaluation noise near the domain edge exceeds the tolerance bands.
_STEP_HALF_DEGREE_CAP = 45
_INDICATOR_DEGREE_CAP = 60
_DEGREE_BOUND_CONST = 4.0


class ConstructionError(ValueError):
    """A polynomial constructor failed its own numerical verification."""

    def __init__(self, message, prop=None, worst_point=None, worst_value=None):
        super().__init__(message)
        self.prop = prop
        self.worst_point = worst_point
        self.worst_value = worst_value


# ---------------------------------------------------------------------------
# UnivariatePoly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnivariatePoly:
    """Dense real polynomial, coefficients in ascending degree order."""

    coeffs: np.ndarray

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        c = npoly.polytrim(c, tol=0.0)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return npoly.polyval(np.asarray(x, dtype=float), self.coeffs)

    def __add__(self, other):
        other = other if isinstance(other, UnivariatePoly) else UnivariatePoly([other])
        return UnivariatePoly(npoly.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other):
        other = other if isinstance(other, UnivariatePoly) else UnivariatePoly([other])
        return UnivariatePoly(npoly.polysub(self.coeffs, other.coeffs))

    def __mul__(self, other):
        if isinstance(other, UnivariatePoly):
            return UnivariatePoly(npoly.polymul(self.coeffs, other.coeffs))
        return UnivariatePoly(self.coeffs * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return UnivariatePoly(-self.coeffs)

    def square(self) -> "UnivariatePoly":
        return self * self

    def derivative(self) -> "UnivariatePoly":
        return UnivariatePoly(npoly.polyder(self.coeffs))

    def compose_affine(self, shift: float, scale: float) -> "UnivariatePoly":
        """Return p(shift + scale * x)."""
        inner = np.array([shift, scale], dtype=float)
        out = np.array([self.coeffs[-1]])
        for c in self.coeffs[-2::-1]:
            out = npoly.polyadd(npoly.polymul(out, inner), [c])
        return UnivariatePoly(out)

    def is_even(self, tol: float = 1e-12) -> bool:
        if self.degree < 1:
            return True
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return bool(np.all(np.abs(self.coeffs[1::2]) <= tol * scale))

    def even_part(self) -> "UnivariatePoly":
        c = self.coeffs.copy()
        c[1::2] = 0.0
        return UnivariatePoly(c)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "UnivariatePoly":
        return cls(d["coeffs"])

    @classmethod
    def zero(cls) -> "UnivariatePoly":
        return cls([0.0])

    @classmethod
    def one(cls) -> "UnivariatePoly":
        return cls([1.0])


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature and Hermite basis
# ---------------------------------------------------------------------------


def gauss_hermite_expectation(f: UnivariatePoly, sigma: float) -> float:
    """E f(x) for x ~ N(0, sigma^2), exact for polynomials up to fp error.

    The node count is auto-sized to ceil(deg/2)+1 so the rule is exact.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    nodes = max(math.ceil(f.degree / 2) + 1, 1)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    return float(np.dot(w, f(sigma * x)))


def hermite_basis_at_zero(degree: int) -> np.ndarray:
    """Values h_i(0) of the normalized probabilists' Hermite basis, i <= degree.

    Uses the three-term recurrence h_{i+1} = (x h_i - sqrt(i) h_{i-1}) / sqrt(i+1),
    which keeps E[h_i^2] = 1 under N(0,1).  Values carry their signs.
    """
    vals = np.zeros(degree + 1)
    vals[0] = 1.0
    if degree >= 1:
        vals[1] = 0.0
    for i in range(1, degree):
        vals[i + 1] = (0.0 * vals[i] - math.sqrt(i) * vals[i - 1]) / math.sqrt(i + 1)
    return vals


def _hermite_monic_int(degree: int) -> list[list[int]]:
    """Integer coefficients of the monic probabilists' Hermite polynomials."""
    polys = [[1]]
    if degree >= 1:
        polys.append([0, 1])
    for i in range(1, degree):
        shifted = [0] + polys[i]
        prev = polys[i - 1] + [0] * (len(shifted) - len(polys[i - 1]))
        polys.append([s - i * p for s, p in zip(shifted, prev)])
    return polys


def _hermite_optimal_fractions(degree: int) -> list[Fraction]:
    """Exact rational coefficients of the Gaussian-optimal witness.

    In the normalized basis the minimizer of E p^2 under p(0) = 1 is
    sum_i h_i(0) h_i(x) / sum_i h_i(0)^2; each product h_i(0) h_i(x) equals
    He_i(0) He_i(x) / i!, which is rational, so the whole polynomial is.
    """
    if degree < 2 or degree % 2 != 0:
        raise ValueError(f"degree must be even and >= 2, got {degree}")
    he = _hermite_monic_int(degree)
    num = [Fraction(0)] * (degree + 1)
    total = Fraction(0)
    for i in range(0, degree + 1, 2):
        he0 = he[i][0]
        fact = math.factorial(i)
        total += Fraction(he0 * he0, fact)
        for k, c in enumerate(he[i]):
            num[k] += Fraction(he0 * c, fact)
    return [c / total for c in num]


def hermite_optimal(degree: int) -> UnivariatePoly:
    """The degree-d polynomial minimizing E_{N(0,1)} p^2 subject to p(0) = 1.

    The minimizer is assembled in exact rational arithmetic and rounded to
    floats once at the end.  Only even basis indices contribute; the i = 0
    (constant) term is included, which the quadrature oracle confirms is
    required to attain the true minimum.  E p*^2 = hermite_optimal_value(d).
    """
    return UnivariatePoly([float(c) for c in _hermite_optimal_fractions(degree)])


def hermite_optimal_value(degree: int) -> float:
    """Closed-form minimum of E_{N(0,1)} p^2 over degree-d polys with p(0)=1."""
    h0 = hermite_basis_at_zero(degree)
    return 1.0 / float(np.dot(h0, h0))


def hermite_optimal_reduction(degree: int) -> UnivariatePoly:
    """Gaussian univariate reduction F of the optimal witness, computed exactly.

    F(s) = E p*^2(<x,v>) at s = ||v||^2; the float route through the squared
    coefficients loses the heavily cancelling high-order terms for degree
    beyond ~40, so square and weight by (2j-1)!! in rational arithmetic.
    """
    frac = _hermite_optimal_fractions(degree)
    sq = [Fraction(0)] * (2 * degree + 1)
    for i, ci in enumerate(frac):
        if ci == 0:
            continue
        for j, cj in enumerate(frac):
            sq[i + j] += ci * cj
    out = []
    for j in range(degree + 1):
        dfact = 1
        for k in range(1, 2 * j, 2):
            dfact *= k
        out.append(float(sq[2 * j] * dfact))
    return UnivariatePoly(out)


# ---------------------------------------------------------------------------
# Smoothed sign step (odd integral family)
# ---------------------------------------------------------------------------


def _smoothstep_base_coeffs(m: int) -> np.ndarray:
    """Coefficients of B_m(t) = c_m * int_0^t (1 - s^2)^m ds with B_m(1) = 1."""
    terms = [Fraction((-1) ** k) * math.comb(m, k) / Fraction(2 * k + 1) for k in range(m + 1)]
    norm = sum(terms)
    coeffs = np.zeros(2 * m + 2)
    for k, t in enumerate(terms):
        coeffs[2 * k + 1] = float(t / norm)
    return coeffs


def _plateau_gap(m: int, u0: float) -> float:
    """1 - B_m(u0), via a Gauss-Legendre rule exact for the integrand."""
    x, w = np.polynomial.legendre.leggauss(m + 1)
    lo, hi = u0, 1.0
    s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    raw = 0.5 * (hi - lo) * np.dot(w, (1.0 - s * s) ** m)
    x2, w2 = np.polynomial.legendre.leggauss(m + 1)
    s2 = 0.5 * x2 + 0.5
    full = 0.5 * np.dot(w2, (1.0 - s2 * s2) ** m)
    return float(raw / full)


def smoothstep_sign(a: float, eta: float) -> UnivariatePoly:
    """Odd-plus-constant polynomial approximation to the sign function.

    The transition lives inside (-2a, 2a); outside it the polynomial sits in
    the one-sided bands [sign(t), sign(t) + eta] out to |t| = 1/2.  Built as
    an affine recalibration of B_m(2t) where B_m is the smoothed-sign
    integral polynomial; m is the smallest value whose plateau error fits
    the band.  All properties are re-verified on a dense grid and a
    ConstructionError (naming the violated property and worst point) is
    raised if double precision cannot honor them.
    """
    if not (0.0 < a < 0.25):
        raise ValueError(f"a must lie in (0, 1/4), got {a}")
    if not (0.0 < eta < 0.1):
        raise ValueError(f"eta must lie in (0, 0.1), got {eta}")

    u0 = 4.0 * a
    gap_target = 0.4 * eta
    m = None
    for cand in range(2, _STEP_HALF_DEGREE_CAP + 1, 2):
        if _plateau_gap(cand, u0) <= gap_target:
            m = cand
            break
    if m is None:
        raise ConstructionError(
            f"no feasible degree <= {2 * _STEP_HALF_DEGREE_CAP + 1} for "
            f"(a={a}, eta={eta}); the transition window is too narrow for "
            "the step family at double precision",
            prop="degree",
        )
    gap = _plateau_gap(m, u0)
    lo = (1.0 - eta / 2.0) / (1.0 - gap)
    hi = 1.0 + eta / 2.0
    rho = 0.5 * (lo + hi)
    kappa = eta / 2.0

    base = _smoothstep_base_coeffs(m)
    scaled = base * (2.0 ** np.arange(len(base)))  # B_m(2t)
    coeffs = rho * scaled
    coeffs[0] += kappa
    p = UnivariatePoly(coeffs)
    _verify_smoothstep(p, a, eta)
    return p


def _verify_smoothstep(p: UnivariatePoly, a: float, eta: float) -> None:
    deg = p.degree
    bound = _DEGREE_BOUND_CONST * math.log(1.0 / eta) ** 2 / a
    if deg > bound:
        raise ConstructionError(
            f"degree {deg} exceeds {bound:.1f}", prop="degree-bound"
        )
    checks = []
    t = np.linspace(-0.5, -2.0 * a, 2500)
    checks.append(("minus-band", t, -1.0, -1.0 + eta))
    t = np.linspace(2.0 * a, 0.5, 2500)
    checks.append(("plus-band", t, 1.0, 1.0 + eta))
    t = np.linspace(-2.0 * a, 2.0 * a, 2500)
    checks.append(("window", t, -1.0, 1.0 + eta))
    for name, grid, lo, hi in checks:
        vals = p(grid)
        viol = np.maximum(lo - vals, vals - hi)
        worst = int(np.argmax(viol))
        if viol[worst] > 1e-12:
            raise ConstructionError(
                f"property '{name}' violated by {viol[worst]:.3e} at "
                f"t={grid[worst]:.6f} (p={vals[worst]:.6f})",
                prop=name,
                worst_point=float(grid[worst]),
                worst_value=float(vals[worst]),
            )
    t = np.linspace(0.5 + 1e-9, 2.0, 2500)
    vals = np.abs(p(t))
    cap = 2.0 * (4.0 * t) ** deg
    viol = vals - cap
    worst = int(np.argmax(viol))
    if viol[worst] > 0:
        raise ConstructionError(
            f"growth bound violated at t={t[worst]:.6f}",
            prop="growth",
            worst_point=float(t[worst]),
            worst_value=float(vals[worst]),
        )
    odd_part = p.coeffs.copy()
    odd_part[0] = 0.0
    if np.any(np.abs(odd_part[2::2]) > 1e-12 * max(1.0, np.max(np.abs(p.coeffs)))):
        raise ConstructionError("even monomials present above tolerance", prop="parity")


# ---------------------------------------------------------------------------
# Core indicator
# ---------------------------------------------------------------------------

# Internal step parameters tried in order; each pair must keep the indicator
# degree within the cap while leaving a plateau the calibration can use.
_CORE_STEP_MENU = ((0.1, 0.05), (0.11, 0.06), (0.12, 0.08), (0.14, 0.09))


@dataclass
class AntiConcReport:
    """Verification summary for a core-indicator polynomial."""

    q0: float
    max_dev_core: float
    band_max: float
    expectation: float
    passed: bool
    delta: float
    big_c: float
    scale_l: float


def core_indicator(delta: float, L: float, dist_hint: str = "gauss") -> UnivariatePoly:
    """Even polynomial q with q(0) = 1 approximating 1(|x| <= delta).

    Two shifted copies of a 0/1 step (built from the smoothed-sign family)
    are combined as q(x) ~ step(c + x/(4L)) + step(c - x/(4L)) - 1 and
    normalized so q(0) = 1 exactly.  The drop of q to ~0 happens over a
    scale set by L; larger L postpones polynomial growth further into the
    tail at the cost of a wider transition.
    """
    if not (0.0 < delta < L):
        raise ValueError(f"need 0 < delta < L, got delta={delta}, L={L}")
    if dist_hint not in ("gauss", "hypercube01"):
        raise ValueError(f"unknown dist_hint {dist_hint!r}")

    last_err = None
    for a_s, eta_s in _CORE_STEP_MENU:
        try:
            p_sign = smoothstep_sign(a_s, eta_s)
        except ConstructionError as err:  # pragma: no cover - menu is safe
            last_err = err
            continue
        if p_sign.degree - 1 > _INDICATOR_DEGREE_CAP:
            continue
        # 0/1 step with transition window (-4a_s, 0), one-sided above.
        p_step = p_sign.compose_affine(2.0 * a_s, 1.0) + 1.0
        p_step = 0.5 * p_step
        a_c = 2.0 * a_s
        g = 1.0 / (4.0 * L)
        q_raw = (
            p_step.compose_affine(a_c, g)
            + p_step.compose_affine(a_c, -g)
            - 1.0
        )
        denom = float(q_raw(0.0))
        if denom < 1e-6:
            raise ConstructionError(
                f"normalization denominator {denom:.3e} below 1e-6; "
                "choose a larger degree",
                prop="denominator",
            )
        q = UnivariatePoly(q_raw.coeffs / denom).even_part()
        c = q.coeffs.copy()
        c[0] = 1.0
        return UnivariatePoly(c)
    raise last_err if last_err is not None else ConstructionError(
        "core indicator construction failed", prop="menu"
    )


def verify_core_indicator(
    q: UnivariatePoly,
    delta: float,
    L: float,
    C: float,
    dist: str = "gauss",
    sigma: float = 1.0,
    sample: np.ndarray | None = None,
) -> AntiConcReport:
    """Check indicator quality: value at 0, core deviation, band sup, and
    the weighted second moment sigma^2 E q^2 against the 10*C*delta gate."""
    if not q.is_even(tol=1e-10):
        raise ValueError("q must be an even polynomial")
    core = np.linspace(-delta, delta, 2001)
    band = np.linspace(delta, L, 4001)
    q0 = float(q(0.0))
    max_dev_core = float(np.max(np.abs(q(core) - 1.0)))
    band_max = float(np.max(np.abs(q(band))))
    if dist == "gauss":
        if sigma > 1.0 + 1e-12:
            raise ValueError(f"gauss mode requires sigma <= 1, got {sigma}")
        expectation = sigma**2 * gauss_hermite_expectation(q.square(), sigma)
    elif dist == "empirical":
        if sample is None:
            raise ValueError("empirical mode requires a sample")
        s = np.asarray(sample, dtype=float).ravel()
        expectation = float(np.mean(s * s)) * float(np.mean(q(s) ** 2))
    else:
        raise ValueError(f"unknown dist {dist!r}")
    passed = (
        abs(q0 - 1.0) <= 1e-10
        and max_dev_core <= delta
        and expectation <= 10.0 * C * delta
    )
    return AntiConcReport(
        q0=q0,
        max_dev_core=max_dev_core,
        band_max=band_max,
        expectation=expectation,
        passed=passed,
        delta=delta,
        big_c=C,
        scale_l=L,
    )


def choose_core_indicator(
    delta: float, C: float, sigma: float = 1.0, dist_hint: str = "gauss"
) -> tuple[UnivariatePoly, float, AntiConcReport]:
    """Pick the smallest L in [2, 64] whose indicator passes verification.

    Coarse geometric scan upward, then bisection between the last failing
    and first passing scale.  Raises ConstructionError when no L passes.
    """

    def attempt(L):
        q = core_indicator(delta, L, dist_hint)
        return q, verify_core_indicator(q, delta, L, C, "gauss", sigma=sigma)

    lo_fail = None
    L = 2.0
    found = None
    while L <= 64.0 * 1.0001:
        q, rep = attempt(L)
        if rep.passed:
            found = (q, L, rep)
            break
        lo_fail = L
        L *= math.sqrt(2.0)
    if found is None:
        raise ConstructionError(
            f"no L in [2, 64] passes at (C={C}, delta={delta})", prop="L-search"
        )
    if lo_fail is None:
        return found
    q_best, hi_pass, rep_best = found
    while hi_pass / lo_fail > 1.05:
        mid = math.sqrt(lo_fail * hi_pass)
        q, rep = attempt(mid)
        if rep.passed:
            q_best, hi_pass, rep_best = q, mid, rep
        else:
            lo_fail = mid
    return q_best, hi_pass, rep_best


# ---------------------------------------------------------------------------
# Univariate reductions of directional second moments
# ---------------------------------------------------------------------------


def _double_factorial_odd(j: int) -> float:
    """(2j-1)!! as a float; the standard N(0,1) even moment E z^{2j}."""
    out = 1.0
    for k in range(1, 2 * j, 2):
        out *= k
    return out


def gaussian_univariate_reduction(p: UnivariatePoly) -> UnivariatePoly:
    """F with E_{x~N(0,I_d)} p^2(<x,v>) = F(||v||^2) for every d and v.

    <x,v> is N(0, s) with s = ||v||^2, so F(s) = sum_j b_{2j} (2j-1)!! s^j
    where b are the coefficients of p^2.  The even-moment value (2j-1)!!
    is quadrature-verified in the test suite.
    """
    if not p.is_even(tol=1e-12):
        raise ValueError("p must be an even polynomial")
    b = p.square().coeffs
    F = np.zeros(len(b[::2]))
    for j in range(len(F)):
        F[j] = b[2 * j] * _double_factorial_odd(j)
    return UnivariatePoly(F)


def boolean_univariate_reduction(
    p: UnivariatePoly, coord_moments: np.ndarray, d: int
) -> UnivariatePoly:
    """F with E p^2(<Y,v>) = F(||v||^2) on directions v with v_i^2 in {0, 1/d}.

    Y has i.i.d. coordinates with the supplied raw moments.  With k nonzero
    coordinates, <Y,v> is a sum of k independent coordinates scaled by
    1/sqrt(d); the power-sum collapse ||v||_{2i}^{2i} = d^{-(i-1)} ||v||_2^2
    makes E p^2 a degree-(deg p^2)/2 polynomial in s = k/d, recovered here
    by exact interpolation at k = 0..M.
    """
    if not p.is_even(tol=1e-12):
        raise ValueError("p must be an even polynomial")
    psq = p.square().coeffs
    M = (len(psq) - 1) // 2
    mom = np.asarray(coord_moments, dtype=float)
    if len(mom) < 2 * M + 1:
        raise ValueError(
            f"need coordinate moments up to order {2 * M}, got {len(mom) - 1}"
        )
    odd = mom[1 : 2 * M + 1 : 2]
    if np.any(np.abs(odd) > 1e-12 * max(1.0, float(np.max(np.abs(mom))))):
        raise ValueError(
            "odd coordinate moments must vanish for the reduction to be "
            "direction-independent"
        )
    deg_fit = min(M, d)
    ks = np.arange(deg_fit + 1)
    vals = np.zeros(len(ks))
    cur = np.zeros(2 * M + 1)
    cur[0] = 1.0  # moments of the empty sum
    scale = d ** (-0.5)
    for idx, k in enumerate(ks):
        if k > 0:
            nxt = np.zeros_like(cur)
            for r in range(2 * M + 1):
                acc = 0.0
                for j in range(r + 1):
                    acc += math.comb(r, j) * cur[j] * mom[r - j]
                nxt[r] = acc
            cur = nxt
        powers = cur[: len(psq)] * scale ** np.arange(len(psq))
        vals[idx] = float(np.dot(psq, powers))
    V = np.vander(ks / d, deg_fit + 1, increasing=True)
    coeffs = np.linalg.solve(V, vals)
    return UnivariatePoly(coeffs)


def rescale_witness(p: UnivariatePoly, c: float) -> UnivariatePoly:
    """q(z) = p(z/c): the witness for a c-rescaled random variable."""
    if c == 0:
        raise ValueError("rescale factor must be nonzero")
    scale = float(c) ** -np.arange(len(p.coeffs), dtype=float)
    return UnivariatePoly(p.coeffs * scale)


def empirical_check(
    sample: np.ndarray,
    p: UnivariatePoly,
    C: float,
    delta: float,
    trials: int = 200,
    seed: int = 0,
) -> dict:
    """Max of (1/n) sum_i p^2(<x_i, v>) over random unit directions v.

    Passing means the sample's uniform distribution still satisfies the
    anti-concentration budget with the factor-2 sampling slack.
    """
    X = np.asarray(sample, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("sample must be a nonempty n x d matrix")
    rng = substream(seed, "empirical-anticonc")
    V = rng.standard_normal((trials, X.shape[1]))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    proj = X @ V.T
    vals = np.mean(p(proj) ** 2, axis=0)
    max_ratio = float(np.max(vals)) if trials > 0 else 0.0
    return {"max_ratio": max_ratio, "passed": max_ratio <= 2.0 * C * delta}


# ---------------------------------------------------------------------------
# Tail integral estimate
# ---------------------------------------------------------------------------


def tail_moment_integral(L: float, d: int) -> float:
    """int_L^inf exp(-x^2) x^{2d} dx by adaptive quadrature."""
    val, _ = integrate.quad(lambda x: math.exp(-x * x) * x ** (2 * d), L, np.inf)
    return float(val)


def tail_moment_bound(L: float, d: int) -> float:
    """Closed-form envelope exp(-L^2) (L^{2d} + (8d)^d) for the tail integral."""
    return math.exp(-L * L) * (L ** (2 * d) + (8.0 * d) ** d)

"""Interval sum-of-squares certificates for univariate polynomial inequalities.

A polynomial nonnegative on [a, b] decomposes as

    g = sigma0 + (x - a)(b - x) * sigma1        (even degree)
    g = (x - a) * sigma0 + (b - x) * sigma1     (odd degree)

with each sigma a literal sum of squares.  The decomposition here is fully
constructive: factor g over C, pair conjugate roots through the two-square
(Gauss) identity, treat interior real roots as squares and boundary-exterior
roots through the generators u = x - a, v = b - x, then reduce the resulting
four-generator combination to the two-term form via u + v = b - a.  Third
parties can re-verify a certificate by evaluation alone, which is also what
`Certificate.verify` does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .polyapprox import UnivariatePoly

_CLUSTER_TOL = 1e-7
_NONNEG_TOL = 1e-10
_RECON_RTOL = 1e-8


class NotNonnegativeError(ValueError):
    """Input polynomial is negative somewhere on the target interval."""

    def __init__(self, message, point=None, value=None):
        super().__init__(message)
        self.point = point
        self.value = value


class CertificationFailedError(ValueError):
    """The anti-concentration inequality fails on [0, 1]."""

    def __init__(self, message, worst_s=None, margin=None):
        super().__init__(message)
        self.worst_s = worst_s
        self.margin = margin


class DecompositionError(RuntimeError):
    """Root pairing produced a reconstruction outside tolerance."""


@dataclass
class Certificate:
    """Interval-SOS witness that `target` is nonnegative on [a, b]."""

    a: float
    b: float
    target: UnivariatePoly
    sigma0: list[UnivariatePoly] = field(default_factory=list)
    sigma1: list[UnivariatePoly] = field(default_factory=list)
    form: str = "even"

    def sigma0_poly(self) -> UnivariatePoly:
        out = UnivariatePoly.zero()
        for s in self.sigma0:
            out = out + s.square()
        return out

    def sigma1_poly(self) -> UnivariatePoly:
        out = UnivariatePoly.zero()
        for s in self.sigma1:
            out = out + s.square()
        return out

    def reconstruct(self) -> UnivariatePoly:
        u = UnivariatePoly([-self.a, 1.0])
        v = UnivariatePoly([self.b, -1.0])
        if self.form == "even":
            return self.sigma0_poly() + u * v * self.sigma1_poly()
        if self.form == "odd":
            return u * self.sigma0_poly() + v * self.sigma1_poly()
        raise ValueError(f"unknown certificate form {self.form!r}")

    def residual(self, grid_points: int = 1000) -> float:
        x = np.linspace(self.a, self.b, grid_points)
        diff = np.abs(self.reconstruct()(x) - self.target(x))
        scale = max(1.0, float(np.max(np.abs(self.target(x)))))
        return float(np.max(diff)) / scale

    def verify(self, grid_points: int = 1000, rtol: float = _RECON_RTOL) -> bool:
        return self.residual(grid_points) <= rtol

    def to_dict(self) -> dict:
        return {
            "interval": [self.a, self.b],
            "form": self.form,
            "target": self.target.to_dict(),
            "sigma0_roots": [s.to_dict() for s in self.sigma0],
            "sigma1_roots": [s.to_dict() for s in self.sigma1],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(
            a=float(d["interval"][0]),
            b=float(d["interval"][1]),
            target=UnivariatePoly.from_dict(d["target"]),
            sigma0=[UnivariatePoly.from_dict(s) for s in d["sigma0_roots"]],
            sigma1=[UnivariatePoly.from_dict(s) for s in d["sigma1_roots"]],
            form=d["form"],
        )


def _newton_polish(coeffs, deriv, roots, iters=3):
    out = roots.copy()
    for _ in range(iters):
        pv = npoly.polyval(out, coeffs)
        dv = npoly.polyval(out, deriv)
        safe = np.abs(dv) > 1e-12 * (1.0 + np.abs(pv))
        step = np.zeros_like(out)
        step[safe] = pv[safe] / dv[safe]
        out = out - step
    return out


def _cluster(roots: np.ndarray) -> list[tuple[float, int]]:
    """Group sorted reals into (mean, multiplicity) clusters."""
    groups = []
    for r in np.sort(roots):
        if groups and abs(r - groups[-1][-1]) <= _CLUSTER_TOL * (1.0 + abs(r)):
            groups[-1].append(r)
        else:
            groups.append([r])
    return [(float(np.mean(g)), len(g)) for g in groups]


def markov_lukacs_decompose(g: UnivariatePoly, a: float, b: float) -> Certificate:
    """Decompose g >= 0 on [a, b] into the interval-SOS certificate form."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    grid = np.linspace(a, b, 1000)
    vals = g(grid)
    scale = max(1.0, float(np.max(np.abs(vals))))
    worst = int(np.argmin(vals))
    if vals[worst] < -_NONNEG_TOL * scale:
        raise NotNonnegativeError(
            f"g({grid[worst]:.6g}) = {vals[worst]:.3e} < 0 on [{a}, {b}]",
            point=float(grid[worst]),
            value=float(vals[worst]),
        )

    coeffs = g.coeffs.copy()
    cmax = float(np.max(np.abs(coeffs)))
    if cmax == 0.0:
        return Certificate(a, b, g, [], [], form="even")
    keep = len(coeffs)
    while keep > 1 and abs(coeffs[keep - 1]) <= 1e-13 * cmax:
        keep -= 1
    coeffs = coeffs[:keep]
    form = "even" if (len(coeffs) - 1) % 2 == 0 else "odd"
    if len(coeffs) == 1:
        c0 = coeffs[0]
        if c0 < 0:
            raise NotNonnegativeError(f"constant {c0} < 0", point=a, value=c0)
        return Certificate(a, b, g, [UnivariatePoly([np.sqrt(c0)])], [], form=form)

    lead = coeffs[-1]
    roots = np.roots(coeffs[::-1])
    deriv = npoly.polyder(coeffs)
    simple = np.ones(len(roots), dtype=bool)
    for i in range(len(roots)):
        near = np.abs(roots - roots[i]) <= _CLUSTER_TOL * (1.0 + abs(roots[i]))
        simple[i] = near.sum() == 1
    roots[simple] = _newton_polish(coeffs, deriv, roots[simple])

    is_real = np.abs(roots.imag) <= _CLUSTER_TOL * (1.0 + np.abs(roots.real))
    real_roots = roots.real[is_real]
    complex_roots = roots[~is_real]
    complex_pairs = complex_roots[complex_roots.imag > 0]

    edge_tol = _CLUSTER_TOL * (1.0 + abs(a) + abs(b))
    lefts, rights, interior_sq = [], [], []
    for mean, mult in _cluster(real_roots):
        if mean <= a + edge_tol:
            lefts.extend([max(a - mean, 0.0)] * mult)
        elif mean >= b - edge_tol:
            rights.extend([max(mean - b, 0.0)] * mult)
        else:
            if mult % 2 != 0:
                raise NotNonnegativeError(
                    f"odd-multiplicity interior root near x={mean:.6g}; "
                    "g changes sign inside the interval",
                    point=mean,
                    value=float(npoly.polyval(mean, coeffs)),
                )
            interior_sq.append((mean, mult // 2))

    c_adj = lead * (-1.0) ** len(rights)
    if c_adj <= 0:
        mid = 0.5 * (a + b)
        raise NotNonnegativeError(
            "sign bookkeeping failed; g appears negative on the interval",
            point=mid,
            value=float(npoly.polyval(mid, coeffs)),
        )

    # Complex conjugate pairs and interior squares feed a single two-square
    # representation C = P^2 + Q^2 via the Gauss product identity.
    P, Q = np.array([1.0]), np.array([0.0])
    for z in complex_pairs:
        r = np.array([-z.real, 1.0])
        s = np.array([abs(z.imag)])
        P, Q = (
            npoly.polysub(npoly.polymul(P, r), npoly.polymul(Q, s)),
            npoly.polyadd(npoly.polymul(P, s), npoly.polymul(Q, r)),
        )
    for mean, half in interior_sq:
        fac = np.array([1.0])
        for _ in range(half):
            fac = npoly.polymul(fac, [-mean, 1.0])
        P = npoly.polymul(P, fac)
        Q = npoly.polymul(Q, fac)

    # Elementary expansion of prod(u + alpha_i) and prod(v + beta_j): the
    # coefficient of u^p (v^q) is nonnegative, so each grouped term is a
    # generator times an explicit square.
    pu = np.array([1.0])
    for al in lefts:
        pu = npoly.polymul(pu, [al, 1.0])
    pv = np.array([1.0])
    for be in rights:
        pv = npoly.polymul(pv, [be, 1.0])

    u = np.array([-a, 1.0])
    v = np.array([b, -1.0])
    slots = {(0, 0): [], (1, 0): [], (0, 1): [], (1, 1): []}
    for p_pow, gamma in enumerate(pu):
        if gamma == 0.0:
            continue
        for q_pow, delta in enumerate(pv):
            if delta == 0.0:
                continue
            w = np.sqrt(gamma * delta * c_adj)
            base = np.array([w])
            for _ in range(p_pow // 2):
                base = npoly.polymul(base, u)
            for _ in range(q_pow // 2):
                base = npoly.polymul(base, v)
            slot = (p_pow % 2, q_pow % 2)
            for part in (P, Q):
                if np.any(part != 0.0):
                    slots[slot].append(npoly.polymul(base, part))

    width = b - a
    sigma0, sigma1 = [], []

    def push(target_list, arr, extra=None, scale=1.0):
        if extra is not None:
            arr = npoly.polymul(arr, extra)
        arr = arr * scale
        if np.any(arr != 0.0):
            target_list.append(UnivariatePoly(arr))

    inv_sqrt_w = 1.0 / np.sqrt(width)
    if form == "even":
        for arr in slots[(0, 0)]:
            push(sigma0, arr)
        for arr in slots[(1, 1)]:
            push(sigma1, arr)
        for arr in slots[(1, 0)]:
            push(sigma0, arr, extra=u, scale=inv_sqrt_w)
            push(sigma1, arr, scale=inv_sqrt_w)
        for arr in slots[(0, 1)]:
            push(sigma0, arr, extra=v, scale=inv_sqrt_w)
            push(sigma1, arr, scale=inv_sqrt_w)
    else:
        for arr in slots[(1, 0)]:
            push(sigma0, arr)
        for arr in slots[(0, 1)]:
            push(sigma1, arr)
        for arr in slots[(0, 0)]:
            push(sigma0, arr, scale=inv_sqrt_w)
            push(sigma1, arr, scale=inv_sqrt_w)
        for arr in slots[(1, 1)]:
            push(sigma0, arr, extra=v, scale=inv_sqrt_w)
            push(sigma1, arr, extra=u, scale=inv_sqrt_w)

    cert = Certificate(a, b, g, sigma0, sigma1, form=form)
    res = cert.residual()
    if res > _RECON_RTOL:
        raise DecompositionError(
            f"certificate reconstruction residual {res:.3e} exceeds {_RECON_RTOL}"
        )
    return cert


def certify_anticoncentration(
    F: UnivariatePoly, C: float, delta: float
) -> Certificate:
    """Certificate that C*delta - s*F(s) >= 0 on s in [0, 1].

    This is the machine-checkable form of the bounded-projection-mass side
    of certifiable anti-concentration: for any direction with ||v||^2 <= 1,
    the witness satisfies ||v||^2 E p^2(<Y, v>) <= C*delta.
    """
    sF = UnivariatePoly(np.concatenate([[0.0], F.coeffs]))
    g = UnivariatePoly([C * delta]) - sF
    grid = np.linspace(0.0, 1.0, 2001)
    vals = g(grid)
    worst = int(np.argmin(vals))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals[worst] < -_NONNEG_TOL * scale:
        raise CertificationFailedError(
            f"C*delta - s*F(s) = {vals[worst]:.4e} < 0 at s = {grid[worst]:.4f}",
            worst_s=float(grid[worst]),
            margin=float(vals[worst]),
        )
    return markov_lukacs_decompose(g, 0.0, 1.0)

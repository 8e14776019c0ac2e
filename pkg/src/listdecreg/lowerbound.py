"""Indistinguishable labeled-equation ensembles over [q]^d and exact
hypercube anti-concentration counts.

The mod-q ensemble samples x uniform on {0,...,q-1}^d, a uniform shift a,
and outputs (x, (x_i + a) mod q); its joint law is uniform on [q]^{d+1},
hence identical for every coordinate i, while the a = 0 sub-sample (a 1/q
fraction) is exactly labeled by e_i.  No algorithm can tell which
coordinate carries the signal, so any approximate recovery needs a list of
size d.  Counting is exact (integer/rational arithmetic throughout).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .prng import substream

SIZE_GUARD = 10**7


class GuardExceeded(RuntimeError):
    """Exact enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Which labeled-equation ensemble R_i to build.

    `coord` is 1-based (1 <= coord <= d).  The modq variant draws the label
    shift a uniformly from {0,...,q-1}; boolean01 is the literal q = 2 form
    y = <x, (1-a) e_i> with a uniform on {0,1}, whose a = 1 rows are all
    labeled zero.
    """

    q: int
    d: int
    coord: int
    variant: str = "modq"

    def __post_init__(self):
        if self.q < 2:
            raise ValueError(f"need q >= 2, got {self.q}")
        if not (1 <= self.coord <= self.d):
            raise ValueError(f"coord must lie in [1, {self.d}], got {self.coord}")
        if self.variant not in ("modq", "boolean01"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "boolean01" and self.q != 2:
            raise ValueError("boolean01 is defined for q = 2")


def gen_Ri(spec: EnsembleSpec, n: int, seed: int):
    """n i.i.d. labeled pairs from R_i; returns (X, y, inlier_flags).

    The a = 0 sub-sample is flagged as the inliers: those rows are labeled
    exactly by the standard basis vector of `coord`.
    """
    rng = substream(seed, f"ensemble-{spec.variant}")
    X = rng.integers(0, spec.q, size=(n, spec.d)).astype(float)
    i = spec.coord - 1
    if spec.variant == "modq":
        a = rng.integers(0, spec.q, size=n)
        y = np.mod(X[:, i] + a, spec.q).astype(float)
    else:
        a = rng.integers(0, 2, size=n)
        y = (1 - a) * X[:, i]
    return X, y.astype(float), a == 0


def joint_law(spec: EnsembleSpec) -> dict[tuple, Fraction]:
    """Exact probability table of (x, y) by full enumeration of (x, a)."""
    q, d = spec.q, spec.d
    if q ** (d + 1) > SIZE_GUARD:
        raise GuardExceeded(f"q^(d+1) = {q ** (d + 1)} exceeds {SIZE_GUARD}")
    i = spec.coord - 1
    shifts = range(q) if spec.variant == "modq" else range(2)
    weight = Fraction(1, q**d * len(shifts))
    table: dict[tuple, Fraction] = {}
    for x in product(range(q), repeat=d):
        for a in shifts:
            if spec.variant == "modq":
                y = (x[i] + a) % q
            else:
                y = (1 - a) * x[i]
            key = x + (y,)
            table[key] = table.get(key, Fraction(0)) + weight
    return table


def tables_equal(t1: dict, t2: dict) -> bool:
    """Exact entrywise equality of two probability tables (zero TV)."""
    return t1 == t2


def total_variation(t1: dict, t2: dict) -> Fraction:
    keys = set(t1) | set(t2)
    tv = Fraction(0)
    for k in keys:
        tv += abs(t1.get(k, Fraction(0)) - t2.get(k, Fraction(0)))
    return tv / 2


def hypercube_anticonc(v, q: int) -> Fraction:
    """Exact Pr_{x ~ [q]^d}[<x, v> = 0] for a nonzero rational vector v.

    Denominators are cleared so the count runs over integers; the per-
    coordinate dynamic program keeps the enumeration linear in d while the
    q^d guard still bounds the nominal state space.
    """
    vf = [Fraction(val) for val in v]
    if all(val == 0 for val in vf):
        raise ValueError("direction must be nonzero")
    d = len(vf)
    if q**d > SIZE_GUARD:
        raise GuardExceeded(f"q^d = {q ** d} exceeds {SIZE_GUARD}")
    denom_lcm = 1
    for val in vf:
        denom_lcm = denom_lcm * val.denominator // np.gcd(denom_lcm, val.denominator)
    ints = [int(val * denom_lcm) for val in vf]
    counts = {0: 1}
    for coeff in ints:
        nxt: dict[int, int] = {}
        for s, c in counts.items():
            for xv in range(q):
                key = s + coeff * xv
                nxt[key] = nxt.get(key, 0) + c
        counts = nxt
    return Fraction(counts.get(0, 0), q**d)

"""Truncated polynomials in mode variables.

A polynomial is a dict mapping a sorted tuple of mode indices (a multiset,
one entry per power) to its coefficient. The empty tuple is the constant.
Products are truncated at a maximum total degree, which is all the flow needs:
each step re-expands log and rational functions of polynomials and keeps
every coefficient up to the stored order exactly.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np

Poly = dict


def degree_split(a: Poly) -> dict[int, list]:
    out = defaultdict(list)
    for k, v in a.items():
        out[len(k)].append((k, v))
    return out


def merge(ka: tuple, kb: tuple) -> tuple:
    if not ka:
        return kb
    if not kb:
        return ka
    return tuple(sorted(ka + kb))


def add(*polys: Poly, scale=None) -> Poly:
    """Sum of polynomials, optionally with per-term scale factors."""
    out = defaultdict(float)
    scale = scale or [1.0] * len(polys)
    for p, s in zip(polys, scale):
        for k, v in p.items():
            out[k] += s * v
    return dict(out)


def scale(a: Poly, s) -> Poly:
    return {k: s * v for k, v in a.items()}


def mul(a: Poly, b: Poly, max_deg: int) -> Poly:
    out = defaultdict(float)
    da = degree_split(a)
    db = degree_split(b)
    for na, ta in sorted(da.items()):
        for nb, tb in sorted(db.items()):
            if na + nb > max_deg:
                continue
            for ka, va in ta:
                for kb, vb in tb:
                    out[merge(ka, kb)] += va * vb
    return dict(out)


def min_degree(a: Poly) -> int:
    nz = [len(k) for k, v in a.items() if v != 0]
    return min(nz) if nz else math.inf


def drop_small(a: Poly, tol: float = 0.0) -> Poly:
    return {k: v for k, v in a.items() if abs(v) > tol}


def constant(a: Poly):
    return a.get((), 0.0)


def without_constant(a: Poly) -> Poly:
    return {k: v for k, v in a.items() if k}


def power_series(w: Poly, coeffs, max_deg: int) -> Poly:
    """sum_k coeffs[k] * w**k for w with zero constant term, truncated."""
    if constant(w) != 0:
        raise ValueError("series argument must have zero constant term")
    md = min_degree(w)
    out = {(): coeffs(0)}
    if md == math.inf:
        return out
    term = {(): 1.0}
    k = 0
    while True:
        k += 1
        if k * md > max_deg:
            break
        term = mul(term, w, max_deg)
        c = coeffs(k)
        for key, v in term.items():
            out[key] = out.get(key, 0.0) + c * v
    return out


def log1p(w: Poly, max_deg: int) -> Poly:
    return power_series(w, lambda k: 0.0 if k == 0 else (-1.0) ** (k + 1) / k, max_deg)


def inv1p(w: Poly, max_deg: int) -> Poly:
    return power_series(w, lambda k: (-1.0) ** k, max_deg)


def derivative(a: Poly, n: int) -> Poly:
    out = defaultdict(float)
    for k, v in a.items():
        c = k.count(n)
        if c:
            i = k.index(n)
            out[k[:i] + k[i + 1:]] += c * v
    return dict(out)


def restrict(a: Poly, max_abs: int) -> Poly:
    """Set every variable with |index| > max_abs to zero."""
    return {k: v for k, v in a.items() if all(abs(n) <= max_abs for n in k)}


def truncate(a: Poly, max_deg: int) -> Poly:
    return {k: v for k, v in a.items() if len(k) <= max_deg}


def multiplicity_factorial(key: tuple) -> int:
    f = 1
    for c in Counter(key).values():
        f *= math.factorial(c)
    return f


def evaluate(a: Poly, u: dict):
    """Evaluate at mode values u[n] (scalars or broadcastable arrays)."""
    total = 0.0
    for k, v in a.items():
        term = v
        for n in k:
            term = term * u[n]
        total = total + term
    return total


def momentum(key: tuple) -> int:
    return sum(key)


def max_abs_coeff(a: Poly) -> float:
    return max((abs(v) for v in a.values()), default=0.0)


def as_array_poly(a: Poly) -> Poly:
    """Copy with numpy scalars converted to Python floats (stable output)."""
    return {k: float(np.real_if_close(v)) for k, v in a.items()}

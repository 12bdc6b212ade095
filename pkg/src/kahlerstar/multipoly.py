"""Sparse polynomials in z1, z2, zb1, zb2 with exact coefficients.

Exponent tuples are ordered (z1, z2, zb1, zb2).  The coefficient ring is
anything supporting ``+``, ``*``, ``-`` and truthiness; in practice Q(i) for
potential jets and Q(i)(h) for phase-space functions.
"""

from __future__ import annotations

from math import factorial
from typing import Callable, Iterable, Mapping

Exponent = tuple[int, int, int, int]

VARIABLES = ("z1", "z2", "zb1", "zb2")


def _add_exp(a: Exponent, b: Exponent) -> Exponent:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])


class SparsePoly:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Exponent, object] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        self.terms: dict[Exponent, object] = {}
        for e, c in items:
            if c:
                e = tuple(e)
                if len(e) != 4 or min(e) < 0:
                    raise ValueError(f"bad exponent {e}")
                self.terms[e] = c

    @classmethod
    def _wrap(cls, terms: dict) -> "SparsePoly":
        obj = object.__new__(cls)
        obj.terms = terms
        return obj

    @classmethod
    def variable(cls, name: str, one) -> "SparsePoly":
        e = [0, 0, 0, 0]
        e[VARIABLES.index(name)] = 1
        return cls._wrap({tuple(e): one})

    @classmethod
    def constant(cls, c) -> "SparsePoly":
        return cls._wrap({(0, 0, 0, 0): c} if c else {})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def coefficient(self, exponent: Exponent, zero):
        return self.terms.get(tuple(exponent), zero)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def holo_degree(self) -> int:
        return max((e[0] + e[1] for e in self.terms), default=0)

    def antiholo_degree(self) -> int:
        return max((e[2] + e[3] for e in self.terms), default=0)

    def __add__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            if e in out:
                s = out[e] + c
                if s:
                    out[e] = s
                else:
                    del out[e]
            else:
                out[e] = c
        return SparsePoly._wrap(out)

    def __neg__(self):
        return SparsePoly._wrap({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, SparsePoly):
            return self.scale(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = _add_exp(e1, e2)
                p = c1 * c2
                if e in out:
                    out[e] = out[e] + p
                else:
                    out[e] = p
        return SparsePoly._wrap({e: c for e, c in out.items() if c})

    def scale(self, c) -> "SparsePoly":
        if not c:
            return SparsePoly._wrap({})
        return SparsePoly._wrap({e: v * c for e, v in self.terms.items() if v * c})

    def __rmul__(self, other):
        return self.scale(other)

    def mul_truncated(self, other: "SparsePoly", max_degree: int) -> "SparsePoly":
        out: dict = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in other.terms.items():
                if d1 + sum(e2) > max_degree:
                    continue
                e = _add_exp(e1, e2)
                p = c1 * c2
                out[e] = out[e] + p if e in out else p
        return SparsePoly._wrap({e: c for e, c in out.items() if c})

    def truncate(self, max_degree: int) -> "SparsePoly":
        return SparsePoly._wrap({e: c for e, c in self.terms.items() if sum(e) <= max_degree})

    def derivative(self, var: int, times: int = 1) -> "SparsePoly":
        """Partial derivative in variable index ``var`` (0..3), repeated."""
        if times == 0:
            return self
        out = {}
        for e, c in self.terms.items():
            k = e[var]
            if k < times:
                continue
            mult = factorial(k) // factorial(k - times)
            ne = list(e)
            ne[var] = k - times
            out[tuple(ne)] = c * mult
        return SparsePoly._wrap(out)

    def map_coefficients(self, fn: Callable) -> "SparsePoly":
        return SparsePoly._wrap({e: v for e, v in ((e, fn(c)) for e, c in self.terms.items()) if v})

    def conjugate(self) -> "SparsePoly":
        """Complex conjugate: swaps z with zb and conjugates coefficients."""
        return SparsePoly._wrap(
            {(e[2], e[3], e[0], e[1]): c.conjugate() for e, c in self.terms.items()}
        )

    def substitute_linear(self, images: list["SparsePoly"], max_degree: int | None = None) -> "SparsePoly":
        """Replace each variable by the given polynomial (one per variable)."""
        powers: list[list[SparsePoly]] = []
        top = self.total_degree()
        for img in images:
            seq = [SparsePoly.constant(_one_like(self))]
            for _ in range(max(top, 0)):
                seq.append(seq[-1] * img)
            powers.append(seq)
        acc = SparsePoly._wrap({})
        for e, c in self.terms.items():
            term = SparsePoly.constant(c)
            for var, k in enumerate(e):
                if k:
                    term = term * powers[var][k]
            acc = acc + term
        if max_degree is not None:
            acc = acc.truncate(max_degree)
        return acc

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"SparsePoly({format_sparse(self)})"


def _one_like(p: SparsePoly):
    for c in p.terms.values():
        return c / c
    raise ValueError("cannot infer the coefficient ring of the zero polynomial")


def format_sparse(p: SparsePoly) -> str:
    """Deterministic text form, readable back with the expression parser."""
    if not p.terms:
        return "0"
    parts = []
    for e in sorted(p.terms, key=lambda e: (sum(e), e)):
        c = p.terms[e]
        factors = []
        for name, k in zip(VARIABLES, e):
            if k == 1:
                factors.append(name)
            elif k > 1:
                factors.append(f"{name}^{k}")
        coeff = str(c)
        if not factors:
            parts.append(coeff if _is_atomic(coeff) else f"({coeff})")
        elif coeff == "1":
            parts.append("*".join(factors))
        else:
            parts.append(("(" + coeff + ")" if not _is_atomic(coeff) else coeff) + "*" + "*".join(factors))
    return " + ".join(parts)


def _is_atomic(text: str) -> bool:
    return all(ch not in text for ch in " +/") and not text.startswith("-")

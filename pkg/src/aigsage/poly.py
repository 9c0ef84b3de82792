"""Multilinear polynomials with exact integer coefficients.

Variables are non-negative ints and take 0/1 values, so x*x = x and a
monomial is just a set of variables.
"""

from __future__ import annotations

from typing import Iterable, Mapping

Monomial = frozenset


class Polynomial:
    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Iterable[int], int] | None = None):
        self._terms: dict[frozenset, int] = {}
        if terms:
            for mono, c in terms.items():
                key = frozenset(mono)
                c = self._terms.get(key, 0) + int(c)
                if c:
                    self._terms[key] = c
                else:
                    self._terms.pop(key, None)

    @classmethod
    def _raw(cls, terms: dict) -> "Polynomial":
        p = cls.__new__(cls)
        p._terms = terms
        return p

    @classmethod
    def const(cls, c: int) -> "Polynomial":
        return cls._raw({frozenset(): int(c)} if c else {})

    @classmethod
    def var(cls, v: int) -> "Polynomial":
        return cls._raw({frozenset((v,)): 1})

    @property
    def terms(self) -> dict[tuple[int, ...], int]:
        """Monomials as sorted variable tuples."""
        return {tuple(sorted(m)): c for m, c in self._terms.items()}

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((len(m) for m in self._terms), default=0)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for m in self._terms:
            out |= m
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = Polynomial.const(other)
        return isinstance(other, Polynomial) and self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, int):
            other = Polynomial.const(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                del out[m]
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, int):
            other = Polynomial.const(other)
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, int):
            if other == 0:
                return Polynomial()
            return Polynomial._raw({m: c * other for m, c in self._terms.items()})
        out: dict[frozenset, int] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = m1 | m2
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Polynomial._raw(out)

    __rmul__ = __mul__

    def evaluate(self, assignment: Mapping[int, int]) -> int:
        total = 0
        for m, c in self._terms.items():
            if all(assignment[v] for v in m):
                total += c
        return total

    def substitute(self, v: int, p: "Polynomial") -> "Polynomial":
        keep: dict[frozenset, int] = {}
        rest: dict[frozenset, int] = {}
        for m, c in self._terms.items():
            if v in m:
                rest[m - {v}] = c
            else:
                keep[m] = c
        return Polynomial._raw(keep) + Polynomial._raw(rest) * p

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mono, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0])):
            name = "*".join(f"x{v}" for v in mono)
            if not name:
                parts.append(str(c))
            elif c == 1:
                parts.append(name)
            elif c == -1:
                parts.append("-" + name)
            else:
                parts.append(f"{c}*{name}")
        return " + ".join(parts).replace("+ -", "- ")


# Algebraic models of the basic Boolean operators
def op_poly(kind: str, inputs: list[Polynomial]) -> Polynomial:
    arity = {"NOT": 1, "AND": 2, "XOR2": 2, "XOR3": 3, "MAJ": 3}
    if kind not in arity:
        raise ValueError(f"unknown operator {kind}")
    if len(inputs) != arity[kind]:
        raise ValueError(f"{kind} takes {arity[kind]} inputs, got {len(inputs)}")
    if kind == "NOT":
        return 1 - inputs[0]
    if kind == "AND":
        a, b = inputs
        return a * b
    if kind == "XOR2":
        a, b = inputs
        return a + b - 2 * (a * b)
    a, b, c = inputs
    ab, ac, bc = a * b, a * c, b * c
    if kind == "XOR3":
        return a + b + c - 2 * ab - 2 * ac - 2 * bc + 4 * (ab * c)
    return ab + ac + bc - 2 * (ab * c)


def fa_reduce(x1: Polynomial, x2: Polynomial) -> Polynomial:
    """x1 + 2*x2: collapses XOR3 + 2*MAJ (or XOR2 + 2*AND) to the plain input sum."""
    return x1 + 2 * x2

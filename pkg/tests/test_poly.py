import itertools

import pytest
from hypothesis import given, settings, strategies as st

from aigsage.poly import Polynomial, fa_reduce, op_poly

VARS = [1, 2, 3, 4]

polys = st.dictionaries(
    st.frozensets(st.sampled_from(VARS), max_size=3),
    st.integers(-50, 50), max_size=6).map(Polynomial)


def assignments():
    for bits in itertools.product((0, 1), repeat=len(VARS)):
        yield dict(zip(VARS, bits))


@settings(max_examples=80, deadline=None)
@given(polys, polys, polys)
def test_ring_laws(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == Polynomial()
    assert p * 1 == p and p * 0 == Polynomial()


@settings(max_examples=80, deadline=None)
@given(polys, polys)
def test_operations_agree_with_evaluation(p, q):
    for a in assignments():
        assert (p * q).evaluate(a) == p.evaluate(a) * q.evaluate(a)
        assert (p - q).evaluate(a) == p.evaluate(a) - q.evaluate(a)


@settings(max_examples=50, deadline=None)
@given(polys, polys)
def test_substitute(p, q):
    s = p.substitute(1, q)
    assert 1 not in s.variables() or 1 in q.variables()
    for a in assignments():
        qa = q.evaluate(a)
        if qa in (0, 1):
            assert s.evaluate(a) == p.evaluate({**a, 1: qa})


def test_idempotent_variables():
    x = Polynomial.var(7)
    assert x * x == x
    assert (1 - x) * x == Polynomial()


def test_big_coefficients_stay_exact():
    x = Polynomial.var(1)
    p = (1 << 200) * x - ((1 << 200) - 1) * x
    assert p == x
    assert Polynomial({(1,): 1 << 300}).terms == {(1,): 1 << 300}


def test_operator_models_match_truth_tables():
    fns = {
        "NOT": lambda a: 1 - a,
        "AND": lambda a, b: a & b,
        "XOR2": lambda a, b: a ^ b,
        "XOR3": lambda a, b, c: a ^ b ^ c,
        "MAJ": lambda a, b, c: int(a + b + c >= 2),
    }
    for kind, fn in fns.items():
        n = fn.__code__.co_argcount
        p = op_poly(kind, [Polynomial.var(v) for v in VARS[:n]])
        for bits in itertools.product((0, 1), repeat=n):
            assert p.evaluate(dict(zip(VARS, bits))) == fn(*bits)


def test_full_adder_reduction():
    a, b, c = (Polynomial.var(v) for v in (1, 2, 3))
    assert fa_reduce(op_poly("XOR3", [a, b, c]), op_poly("MAJ", [a, b, c])) == a + b + c
    assert fa_reduce(op_poly("XOR2", [a, b]), op_poly("AND", [a, b])) == a + b


def test_op_poly_arity():
    with pytest.raises(ValueError):
        op_poly("AND", [Polynomial.var(1)])
    with pytest.raises(ValueError):
        op_poly("NAND", [])


def test_repr():
    assert repr(Polynomial()) == "0"
    assert repr(2 * Polynomial.var(1) - Polynomial.var(2) * Polynomial.var(3) + 1) == "1 + 2*x1 - x2*x3"

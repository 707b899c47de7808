import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regpack.errors import BadParams
from regpack.params import ParamSet, g_iter


def test_derived_constants():
    p = ParamSet(k=1, Delta_R=1)
    assert p.K == 4
    assert p.w == 4 ** 2 * 1 * 2
    p = ParamSet(k=2, Delta_R=1)
    assert p.K == 9
    p = ParamSet(k=1, Delta_R=2)
    assert p.K == 8
    assert p.w == 64 * 4 * 3


@given(st.floats(min_value=1e-9, max_value=0.999999))
@settings(max_examples=400, deadline=None)
def test_ladder_monotone_on_grid(a):
    p = ParamSet(k=1, Delta_R=1)
    assert p.ladder_is_monotone(a)


def test_xi_clamped_and_monotone():
    p = ParamSet(eps=0.05)
    xs = [p.xi(t) for t in range(0, 40)]
    assert xs[0] == pytest.approx(0.1)
    assert all(x <= p.xi_max for x in xs)
    assert all(a <= b for a, b in zip(xs, xs[1:]))
    # unclamped iterate exceeds the clamp almost immediately
    assert g_iter(0.1, 1) > 0.9


def test_rejects_bad_eps():
    with pytest.raises(BadParams):
        ParamSet(eps=0.0)
    with pytest.raises(BadParams):
        ParamSet(k=0)

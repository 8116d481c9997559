import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdnorms.model import MarketParams, SocialNorm, chain_matrix
from crowdnorms.strategic import (
    RequesterSide,
    design_market,
    design_requester_norm,
    requester_best_response,
    requester_margins,
    requester_values,
    strategic_policies,
)

MARKET = MarketParams(p=1.5, c=0.5, V=10, delta=0.8, alpha=0.05)

side_st = st.builds(RequesterSide, delta=st.floats(0.05, 0.95), match_prob=st.floats(0.05, 1.0), worker_high=st.floats(0.0, 1.0))


@st.composite
def req_norms(draw):
    K = draw(st.integers(1, 10))
    return SocialNorm(K, draw(st.integers(1, K)))


def q_value_margins(norm, params, side):
    """Pay-versus-withhold gain from explicit one-period lookahead."""
    v = requester_values(norm, params, side)
    q = side.match_prob
    pay = chain_matrix(norm.K, norm.h, np.ones(norm.K + 1, bool), 0.0, 1.0)
    keep = chain_matrix(norm.K, norm.h, np.zeros(norm.K + 1, bool), 0.0, 1.0)
    benefit = side.worker_high * params.V
    return {t: (benefit - params.p + side.delta * pay[t] @ v) - (benefit + side.delta * keep[t] @ v) for t in norm.active_states}


@given(req_norms(), side_st, st.floats(0.1, 9.9))
def test_requester_margins_match_lookahead(norm, side, p):
    params = MARKET.replace(p=p, c=min(0.5, p / 2))
    got = requester_margins(norm, params, side).margins
    ref = q_value_margins(norm, params, side)
    for t in norm.active_states:
        assert got[t] == pytest.approx(ref[t], abs=1e-9)


@given(req_norms(), side_st, st.floats(0.1, 9.9))
def test_requester_best_response_agrees_with_margins(norm, side, p):
    params = MARKET.replace(p=p, c=min(0.5, p / 2))
    rep = requester_margins(norm, params, side)
    if min(abs(m) for m in rep.margins.values()) < 1e-9:
        return
    mask = requester_best_response(norm, params, side)
    assert rep.sustainable == bool(mask[norm.h:].all())


def test_requester_design_prefers_smaller_threshold():
    res = design_requester_norm(MARKET, RequesterSide(0.5, 0.25))
    assert res.sustainable and res.objective == pytest.approx(1.0)
    assert requester_margins(res.norm, MARKET, RequesterSide(0.5, 0.25)).sustainable


def test_market_design_fixture():
    m = design_market(MARKET)
    assert m.worker_norm is not None and m.requester_norm is not None
    assert 0.9 < m.welfare <= 1.0


@pytest.mark.parametrize("p", [0.3, 10.0, 12.0])
def test_market_collapses_outside_the_workable_price_range(p):
    assert design_market(MARKET.replace(p=p)).welfare == 0.0


def test_policies_without_norms_are_myopic():
    pol = strategic_policies(MARKET, None, None, 200, 800, 0.5)
    assert list(pol.worker_high) == [False] and list(pol.requester_pays) == [False]


def test_best_responses_settle_on_designed_norms():
    m = design_market(MARKET)
    pol = strategic_policies(MARKET, m.worker_norm, m.requester_norm, 200, 800, 0.5, "best-response", "best-response")
    assert pol.converged
    assert pol.worker_high[m.worker_norm.h:].all() and pol.requester_pays[m.requester_norm.h:].all()

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ecasim import mac
from ecasim.mac import NodeState, ProtocolParams, Variant

P32 = ProtocolParams(cw_min=32, m=5)
ECA_LIKE = [Variant.CSMA_ECA, Variant.ECA_HYSTERESIS, Variant.ECA_HYSTERESIS_FAIR_SHARE]


@pytest.mark.parametrize("cw_min,stage,expected", [(32, 0, 32), (32, 3, 256), (16, 1, 32)])
def test_cw(cw_min, stage, expected):
    assert mac.cw(ProtocolParams(cw_min, 5), stage) == expected


@pytest.mark.parametrize("stage", [-1, 6])
def test_cw_rejects_stage_out_of_range(stage):
    with pytest.raises(ValueError):
        mac.cw(P32, stage)


@pytest.mark.parametrize("cw_min", [0, 1, 3, 24])
def test_params_need_power_of_two(cw_min):
    with pytest.raises(ValueError):
        ProtocolParams(cw_min, 5)


def test_random_backoff_range():
    rng = random.Random(1)
    draws = {mac.sample_random_backoff(P32, 0, rng) for _ in range(5000)}
    assert draws == set(range(32))
    tiny = ProtocolParams(2, 0)
    assert {mac.sample_random_backoff(tiny, 0, rng) for _ in range(200)} == {0, 1}


def test_random_backoff_chi_square_uniform():
    rng = random.Random(20240601)
    counts = [0] * 32
    for _ in range(10**6):
        counts[mac.sample_random_backoff(P32, 0, rng)] += 1
    _, p = stats.chisquare(counts)
    # reject uniformity only at the 1% level
    assert p > 0.01


def test_random_backoff_is_reproducible():
    a = [mac.sample_random_backoff(P32, 3, random.Random(7)) for _ in range(3)]
    assert len(set(a)) == 1


@pytest.mark.parametrize("variant,stage,expected", [
    (Variant.CSMA_ECA, 4, 16),
    (Variant.ECA_HYSTERESIS, 2, 64),
    (Variant.ECA_HYSTERESIS, 0, 16),
    (Variant.ECA_HYSTERESIS_FAIR_SHARE, 5, 512),
])
def test_deterministic_backoff(variant, stage, expected):
    assert mac.deterministic_backoff(P32, variant, stage) == expected


def test_deterministic_backoff_undefined_for_csma_ca():
    with pytest.raises(ValueError):
        mac.deterministic_backoff(P32, Variant.CSMA_CA, 0)


def test_on_success_examples():
    rng = random.Random(0)
    s = mac.on_success(NodeState(0, 3), P32, Variant.CSMA_ECA, rng)
    assert (s.stage, s.backoff) == (0, 16)
    s = mac.on_success(NodeState(0, 3), P32, Variant.ECA_HYSTERESIS, rng)
    assert (s.stage, s.backoff, s.pending_burst) == (3, 128, 1)
    s = mac.on_success(NodeState(0, 2, 4), P32, Variant.ECA_HYSTERESIS_FAIR_SHARE, rng)
    assert (s.stage, s.backoff, s.pending_burst) == (2, 64, 4)
    s = mac.on_success(NodeState(0, 4), P32, Variant.CSMA_CA, rng)
    assert s.stage == 0 and 0 <= s.backoff < 32


def test_eca_success_consumes_no_randomness():
    rng = random.Random(5)
    before = rng.getstate()
    outs = {mac.on_success(NodeState(0, k), P32, Variant.CSMA_ECA, rng) for k in range(6)}
    assert outs == {NodeState(16, 0, 1, 0)}
    assert rng.getstate() == before


def test_on_success_keeps_delivered_tally():
    s = mac.on_success(NodeState(0, 1, 1, 36000), P32, Variant.CSMA_ECA, random.Random(0))
    assert s.delivered_payload == 36000


def test_on_collision_examples():
    rng = random.Random(3)
    for _ in range(200):
        s = mac.on_collision(NodeState(0, 0), P32, Variant.CSMA_CA, rng)
        assert s.stage == 1 and 0 <= s.backoff <= 63
        s = mac.on_collision(NodeState(0, 5), P32, Variant.CSMA_ECA, rng)
        assert s.stage == 5 and 0 <= s.backoff < 1024
    s = mac.on_collision(NodeState(0, 1, 2), P32, Variant.ECA_HYSTERESIS_FAIR_SHARE, rng)
    assert (s.stage, s.pending_burst) == (2, 4)


def test_on_empty_slot():
    assert mac.on_empty_slot(NodeState(5, 1)).backoff == 4
    assert mac.on_empty_slot(NodeState(1, 1)).backoff == 0
    s = NodeState(16, 0)
    for _ in range(16):
        s = mac.on_empty_slot(s)
    assert s == NodeState(0, 0)
    with pytest.raises(ValueError):
        mac.on_empty_slot(NodeState(0, 0))


def test_wants_to_transmit():
    assert mac.wants_to_transmit(NodeState(0))
    assert not mac.wants_to_transmit(NodeState(1))
    fresh = mac.on_success(NodeState(0), P32, Variant.CSMA_ECA, random.Random(0))
    assert not mac.wants_to_transmit(fresh)


def test_variant_parse():
    assert Variant.parse("ECA-HYS-FS") is Variant.ECA_HYSTERESIS_FAIR_SHARE
    with pytest.raises(ValueError, match="unknown variant"):
        Variant.parse("aloha")


# ---- properties over arbitrary event sequences

events = st.lists(st.sampled_from(["success", "collision", "empty"]), max_size=60)


def drive(variant, params, seq, seed):
    """Apply an event sequence the way the engine would; yield each state."""
    rng = random.Random(seed)
    s = mac.initial_state(params, variant, rng)
    yield s
    for ev in seq:
        if ev == "empty":
            if s.backoff == 0:
                continue
            s = mac.on_empty_slot(s)
        elif ev == "success":
            s = mac.on_success(s, params, variant, rng)
        else:
            s = mac.on_collision(s, params, variant, rng)
        yield s


@settings(max_examples=200, deadline=None)
@given(variant=st.sampled_from(list(Variant)), seq=events, seed=st.integers(0, 2**32),
       cw_exp=st.integers(1, 6), m=st.integers(0, 6))
def test_state_invariants_hold_for_any_event_sequence(variant, seq, seed, cw_exp, m):
    params = ProtocolParams(1 << cw_exp, m)
    prev = None
    for s in drive(variant, params, seq, seed):
        assert 0 <= s.stage <= m
        assert 0 <= s.backoff < mac.cw(params, s.stage)
        assert s.pending_burst == (1 << s.stage if variant.fair_share else 1)
        if variant.hysteresis and prev is not None:
            assert s.stage >= prev.stage
        prev = s


@settings(max_examples=100, deadline=None)
@given(variant=st.sampled_from(list(Variant)), seq=events, seed=st.integers(0, 2**32))
def test_transitions_are_pure(variant, seq, seed):
    assert list(drive(variant, P32, seq, seed)) == list(drive(variant, P32, seq, seed))


@settings(max_examples=100, deadline=None)
@given(stage=st.integers(0, 5), backoff=st.integers(0, 1000),
       variant=st.sampled_from(ECA_LIKE), seed=st.integers(0, 2**32))
def test_success_then_wait_matches_deterministic_backoff(stage, backoff, variant, seed):
    s = mac.on_success(NodeState(backoff, stage, 1 << stage if variant.fair_share else 1),
                       P32, variant, random.Random(seed))
    waited = 0
    while not mac.wants_to_transmit(s):
        s = mac.on_empty_slot(s)
        waited += 1
    assert waited == mac.deterministic_backoff(P32, variant, stage)

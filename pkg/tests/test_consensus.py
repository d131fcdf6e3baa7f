"""Eligibility lottery, mining, block validation, and fork choice."""

import dataclasses
import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

from cidnsim.chain import Chain, Transaction, build_transaction, compute_block_id, make_block
from cidnsim.consensus import (
    ConsensusParams,
    Reason,
    ValidationContext,
    binary_entropy,
    chain_average_credibility,
    check_eligibility,
    compute_stake,
    compute_target,
    eligibility_hash,
    generate_block,
    hash_to_unit,
    mine,
    prefix_fraction,
    resolve,
    validate_block,
)
from cidnsim.consensus import _mining_hash
from cidnsim.encoding import enc_int
from cidnsim.experiments import _mine_on
from cidnsim.keys import KeyPair, KeyRegistry
from mutations import MUTATION_CLASSES, mutate_block

PARAMS = ConsensusParams(d_cred=1.0, d_stake=1.0, r_bits=16, q_max=4096, t_cap=16)


def key_of(label: str) -> KeyPair:
    return KeyPair.from_seed(hashlib.sha256(label.encode()).digest())


# -- params and hash mapping ------------------------------------------------


@pytest.mark.parametrize(
    "field,value",
    [("d_cred", 0.0), ("d_cred", 1.1), ("d_stake", 0.0), ("r_bits", 7),
     ("r_bits", 65), ("q_max", 0), ("t_cap", 0)],
)
def test_params_rejects_out_of_range(field, value):
    with pytest.raises(ValueError):
        dataclasses.replace(PARAMS, **{field: value})


def test_hash_to_unit_known_vectors():
    assert hash_to_unit(b"\x00" * 32) == 0.0
    assert hash_to_unit(b"\x80" + b"\x00" * 31) == 0.5
    assert 0.0 <= hash_to_unit(hashlib.sha256(b"x").digest()) < 1.0


def test_prefix_fraction_known_vectors():
    assert prefix_fraction(b"\xff" * 8, 8) == 255 / 256
    assert prefix_fraction(b"\x00" * 8, 16) == 0.0
    assert prefix_fraction(b"\x80" + b"\x00" * 7, 16) == 0.5


def test_eligibility_rate_tracks_threshold():
    """The lottery is a uniform draw, so the pass rate matches d_cred*avg."""
    threshold = 0.3
    hits = 0
    trials = 20_000
    prev = hashlib.sha256(b"parent").digest()
    for i in range(trials):
        ok, _ = check_eligibility("node", 1.0, threshold, prev, enc_int(i))
        hits += ok
    assert hits / trials == pytest.approx(threshold, abs=0.02)


def test_eligibility_hash_is_deterministic():
    prev = b"\x01" * 32
    a = eligibility_hash("n", prev, b"payload")
    assert a == eligibility_hash("n", prev, b"payload")
    assert a != eligibility_hash("m", prev, b"payload")


# -- stake ------------------------------------------------------------------


def test_binary_entropy_matches_independent_oracle():
    for x in (0.01, 0.1, 0.25, 0.5, 0.75, 0.9):
        oracle = float(scipy_entropy([x, 1.0 - x], base=2))
        assert binary_entropy(x) == pytest.approx(oracle, abs=1e-12)
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)


@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
def test_binary_entropy_symmetry(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)


def test_stake_rewards_sharp_scores():
    assert compute_stake([]) == 0.0
    assert compute_stake([0.5]) == pytest.approx(0.0)
    assert compute_stake([1.0, 0.0]) == pytest.approx(2.0)
    # additivity over lists
    assert compute_stake([0.9, 0.2]) == pytest.approx(
        compute_stake([0.9]) + compute_stake([0.2])
    )
    assert compute_stake([0.9]) == pytest.approx(1.0 - binary_entropy(0.9))


def test_target_caps_and_clamps():
    assert compute_target(0.1, 2.0, 3, 16, 16) == pytest.approx(0.6)
    # elapsed time saturates at t_cap
    assert compute_target(0.1, 2.0, 100, 4, 16) == pytest.approx(0.8)
    # never reaches 1: the prefix comparison must stay falsifiable
    assert compute_target(1.0, 50.0, 16, 16, 16) == 1.0 - 2.0**-16
    with pytest.raises(ValueError):
        compute_target(0.1, 2.0, 0, 16, 16)


# -- mining -----------------------------------------------------------------


def test_mine_respects_attempt_bound_and_predicate():
    g = hashlib.sha256(b"g").digest()
    ctr, attempts = mine(g, 5, 0.5, 4096, 16)
    assert ctr is not None and 1 <= ctr <= 4096
    assert attempts <= 4096
    assert prefix_fraction(_mining_hash(g, 5, ctr), 16) < 0.5
    # unwinnable target exhausts the budget
    none, used = mine(g, 5, 0.0, 64, 16)
    assert none is None and used == 64


def _simple_context(keys):
    registry = KeyRegistry()
    for k in keys:
        registry.register(k.public_bytes)
    return ValidationContext(
        params=PARAMS,
        registry=registry,
        initial_trust=0.5,
        members_at=lambda rnd: [k.node_id for k in keys],
    )


def _salted_block(key, ctx, chain, trusts, gen_time=1):
    # the eligibility lottery is a deterministic hash draw, so nudge the
    # payload until this leader qualifies
    for salt in range(200):
        tx = build_transaction(key, {}, {h: t - salt * 1e-9 for h, t in trusts.items()})
        block = _mine_on(chain, key, gen_time, [tx], ctx)
        if block is not None:
            return block
    raise AssertionError("setup: no qualifying payload found")


def _honest_block(key, ctx, chain, gen_time=1):
    return _salted_block(key, ctx, chain, {f"h{i}": 0.99 for i in range(6)}, gen_time)


def test_generate_then_validate_round_trip():
    key = key_of("consensus-leader")
    ctx = _simple_context([key])
    chain = Chain.genesis()
    block = _honest_block(key, ctx, chain)
    ok, reason = validate_block(block, chain, ctx)
    assert ok and reason == Reason.OK


@pytest.mark.parametrize("mutate,expected", MUTATION_CLASSES)
def test_validation_reason_codes(mutate, expected):
    key = key_of("consensus-leader")
    other = key_of("consensus-other")
    ctx = _simple_context([key, other])
    chain = Chain.genesis()
    block = _honest_block(key, ctx, chain)
    mutated = mutate_block(block, mutate, PARAMS.q_max, other_key=other)
    ok, reason = validate_block(mutated, chain, ctx)
    assert not ok
    assert reason == expected


# -- fork choice ------------------------------------------------------------


def _fork_setup():
    strong = key_of("fork-strong")
    weak = key_of("fork-weak")
    ctx = _simple_context([strong, weak])
    chain = Chain.genesis()
    sharp = {f"h{i}": 0.99 for i in range(6)}
    flat = {f"h{i}": 0.55 for i in range(6)}
    strong_block = _salted_block(strong, ctx, chain, sharp)
    weak_block = _salted_block(weak, ctx, chain, flat)
    return chain, ctx, [strong_block], [weak_block]


def test_resolve_prefers_higher_stake_times_credibility():
    chain, ctx, strong_fork, weak_fork = _fork_setup()
    assert resolve(chain, [weak_fork, strong_fork], ctx) is strong_fork
    # outcome is independent of input order
    assert resolve(chain, [strong_fork, weak_fork], ctx) is strong_fork


def test_resolve_tie_breaks_on_smallest_tip_hash():
    from cidnsim.chain import hash_block

    chain, ctx, strong_fork, _ = _fork_setup()
    # identical fork content under two list identities: score tie
    clone = list(strong_fork)
    winner = resolve(chain, [strong_fork, clone], ctx)
    assert hash_block(winner[-1]) == hash_block(strong_fork[-1])
    with pytest.raises(ValueError):
        resolve(chain, [], ctx)


def test_chain_average_credibility_fills_unreported_members():
    key = key_of("avg-target")
    ctx = _simple_context([key])
    # nobody has reported: every other member counts at the newcomer value
    avg = chain_average_credibility(Chain.genesis(), "x", ["x", "y", "z"], 0.5)
    assert avg == pytest.approx((1.0 + 0.5 + 0.5) / 3.0)

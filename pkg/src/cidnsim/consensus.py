"""Hybrid PoW/PoS leader election, block validation, and fork choice.

A node may mine only if a hash of its identity, the parent hash, and the
payload falls under a credibility-scaled target (the eligibility lottery);
it then brute-forces a bounded counter against a stake-and-time target.
Validators re-derive every quantity from committed chain state, so block
validity is observer-independent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .chain import (
    Block,
    Chain,
    compute_block_id,
    hash_block,
    make_block,
    verify_transaction,
)
from .encoding import enc_int, enc_str
from .keys import KeyPair, KeyRegistry, verify
from .trust import average_credibility

__all__ = [
    "ConsensusParams",
    "MiningContext",
    "ValidationContext",
    "Reason",
    "hash_to_unit",
    "prefix_fraction",
    "eligibility_hash",
    "check_eligibility",
    "binary_entropy",
    "compute_stake",
    "compute_target",
    "mine",
    "generate_block",
    "validate_block",
    "resolve",
    "chain_average_credibility",
    "leader_trust_values",
    "time_since_last_block",
]


@dataclass(frozen=True)
class ConsensusParams:
    """Targets and bounds of the election.

    d_cred: loose eligibility target scaling the average credibility.
    d_stake: mining target scale applied to stake and elapsed time.
    r_bits: hash prefix width compared against the mining target.
    q_max: bound on counter attempts per round.
    t_cap: cap on the elapsed-time factor.
    """

    d_cred: float
    d_stake: float
    r_bits: int
    q_max: int
    t_cap: int

    def __post_init__(self) -> None:
        if not 0.0 < self.d_cred <= 1.0:
            raise ValueError(f"d_cred must be in (0,1], got {self.d_cred}")
        if not self.d_stake > 0.0:
            raise ValueError(f"d_stake must be > 0, got {self.d_stake}")
        if not 8 <= self.r_bits <= 64:
            raise ValueError(f"r_bits must be in [8,64], got {self.r_bits}")
        if not self.q_max >= 1:
            raise ValueError(f"q_max must be positive, got {self.q_max}")
        if not self.t_cap >= 1:
            raise ValueError(f"t_cap must be positive, got {self.t_cap}")


@dataclass(frozen=True)
class MiningContext:
    """Everything a node needs for one round of counter search."""

    g_value: bytes
    stake: float
    time_since: int
    target_v: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.target_v < 1.0:
            raise ValueError("target_v must be in [0,1)")
        if self.time_since < 1:
            raise ValueError("time_since must be >= 1")


class Reason:
    """Validation failure reason codes (emitted to metrics)."""

    OK = "ok"
    LINKAGE = "linkage"
    GEN_TIME = "gen-time"
    BLOCK_ID = "block-id"
    UNKNOWN_LEADER = "unknown-leader"
    TX_ORDER = "tx-order"
    TX_INVALID = "tx-invalid"
    ELIGIBILITY = "eligibility"
    TARGET_MISMATCH = "target-mismatch"
    CTR_BOUND = "ctr-bound"
    MINING = "mining"
    LEADER_SIGNATURE = "leader-signature"


def hash_to_unit(h: bytes) -> float:
    """Map a hash into [0,1) via its leading 64 bits."""
    return int.from_bytes(h[:8], "big") / 2.0**64


def prefix_fraction(h: bytes, r_bits: int) -> float:
    """Leading ``r_bits`` of the hash as a fraction of 2^r_bits."""
    return (int.from_bytes(h[:8], "big") >> (64 - r_bits)) / 2.0**r_bits


def eligibility_hash(ids_id: str, prev_hash: bytes, payload: bytes) -> bytes:
    return hashlib.sha256(enc_str(ids_id) + prev_hash + payload).digest()


def check_eligibility(
    ids_id: str,
    d_cred: float,
    avg_cred: float,
    prev_hash: bytes,
    payload: bytes,
) -> tuple[bool, bytes]:
    """Credibility lottery: eligible iff the identity/parent/payload hash,
    mapped to [0,1), is below d_cred times the average credibility."""
    g = eligibility_hash(ids_id, prev_hash, payload)
    return hash_to_unit(g) < d_cred * avg_cred, g


def binary_entropy(x: float) -> float:
    """Shannon entropy of a Bernoulli(x), in bits; 0 at the endpoints."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def compute_stake(trust_values: Iterable[float]) -> float:
    """Stake is certainty, not currency: sum of 1 - H2(x) over the published
    host-trust scores.  Scores near 1/2 contribute nothing."""
    return sum(1.0 - binary_entropy(x) for x in trust_values)


def compute_target(
    d_stake: float, stake: float, time_since: int, t_cap: int, r_bits: int
) -> float:
    """Mining target: d_stake * stake * capped elapsed time, clamped just
    below 1 so the prefix comparison is never vacuous."""
    if time_since < 1:
        raise ValueError("time_since must be >= 1")
    t = min(time_since, t_cap)
    return min(d_stake * stake * t, 1.0 - 2.0 ** (-r_bits))


def _mining_hash(g_value: bytes, gen_time: int, ctr: int) -> bytes:
    return hashlib.sha256(g_value + enc_int(gen_time) + enc_int(ctr)).digest()


def mine(
    g_value: bytes, gen_time: int, target_v: float, q_max: int, r_bits: int
) -> tuple[int | None, int]:
    """Search the counter space; returns (winning ctr or None, attempts made).

    Never exceeds q_max hash evaluations.
    """
    attempts = 0
    for ctr in range(1, q_max + 1):
        attempts += 1
        h = _mining_hash(g_value, gen_time, ctr)
        if prefix_fraction(h, r_bits) < target_v:
            return ctr, attempts
    return None, attempts


def generate_block(
    key: KeyPair,
    ctx: MiningContext,
    gen_time: int,
    prev_hash: bytes,
    params: ConsensusParams,
    transactions: Sequence,
) -> Block | None:
    """Run the bounded counter search; on success return the signed block.

    Exhaustion is a normal outcome (the node stays silent this round).
    """
    ctr, _ = mine(ctx.g_value, gen_time, ctx.target_v, params.q_max, params.r_bits)
    if ctr is None:
        return None
    return make_block(key, gen_time, prev_hash, ctr, ctx.target_v, transactions)


# ---------------------------------------------------------------------------
# Validation against committed chain state.


@dataclass
class ValidationContext:
    """Shared inputs every validator agrees on."""

    params: ConsensusParams
    registry: KeyRegistry
    initial_trust: float  # newcomer credibility, fills unreported observers
    members_at: Callable[[int], Sequence[str]]  # active identities at a round


def chain_average_credibility(
    chain: Chain, target: str, members: Sequence[str], initial_trust: float
) -> float:
    """Average credibility of ``target`` from committed chain state; members
    that have not yet reported about the target count at the newcomer value."""
    reported = chain.chain_state_credibility(target)
    values = {
        m: reported.get(m, initial_trust) for m in members if m != target
    }
    return average_credibility(target, values, len(members))


def leader_trust_values(
    parent: Chain, leader_id: str, transactions: Sequence
) -> list[float]:
    """The leader's trust list for stake: from its transaction in the block
    payload when present, else its latest on-chain list in the parent."""
    for tx in transactions:
        if tx.ids_id == leader_id:
            return list(tx.trust_list)
    return list(parent.latest_trust.get(leader_id, {}).values())


def time_since_last_block(parent: Chain, leader_id: str, gen_time: int) -> int:
    """Rounds since the leader's last block in the parent chain (genesis for
    first-timers), floor 1."""
    last = parent.last_led_round.get(leader_id, 0)
    return max(1, gen_time - last)


def validate_block(
    b: Block, parent: Chain, ctx: ValidationContext
) -> tuple[bool, str]:
    """Full re-derivation of eligibility, target, and mining conditions.

    Returns (ok, reason code); every quantity the header claims is checked
    against committed state, not taken on faith.
    """
    p = ctx.params
    h = b.header
    if h.prev_hash != parent.tip_hash:
        return False, Reason.LINKAGE
    if h.gen_time <= parent.tip.header.gen_time:
        return False, Reason.GEN_TIME
    if h.block_id != compute_block_id(
        h.leader_id, h.gen_time, h.prev_hash, h.ctr, h.target_v, b.transactions
    ):
        return False, Reason.BLOCK_ID
    leader_key = ctx.registry.get(h.leader_id)
    if leader_key is None:
        return False, Reason.UNKNOWN_LEADER
    ids = [tx.ids_id for tx in b.transactions]
    if ids != sorted(ids):
        return False, Reason.TX_ORDER
    for tx in b.transactions:
        if not verify_transaction(tx, ctx.registry):
            return False, Reason.TX_INVALID
    members = ctx.members_at(h.gen_time)
    avg_cred = chain_average_credibility(
        parent, h.leader_id, members, ctx.initial_trust
    )
    eligible, g = check_eligibility(
        h.leader_id, p.d_cred, avg_cred, h.prev_hash, b.payload_bytes()
    )
    if not eligible:
        return False, Reason.ELIGIBILITY
    stake = compute_stake(leader_trust_values(parent, h.leader_id, b.transactions))
    time_since = time_since_last_block(parent, h.leader_id, h.gen_time)
    target = compute_target(p.d_stake, stake, time_since, p.t_cap, p.r_bits)
    if target != h.target_v:
        return False, Reason.TARGET_MISMATCH
    if not 1 <= h.ctr <= p.q_max:
        return False, Reason.CTR_BOUND
    if not prefix_fraction(_mining_hash(g, h.gen_time, h.ctr), p.r_bits) < h.target_v:
        return False, Reason.MINING
    unsigned = Block(h, b.transactions, b"")
    if not verify(leader_key, b.leader_signature, unsigned.signed_bytes()):
        return False, Reason.LEADER_SIGNATURE
    return True, Reason.OK


def fork_score(base: Chain, fork: Sequence[Block], ctx: ValidationContext) -> float:
    """Accumulated leader stake times leader average credibility over the fork."""
    score = 0.0
    chain = base
    for b in fork:
        members = ctx.members_at(b.header.gen_time)
        avg = chain_average_credibility(
            chain, b.header.leader_id, members, ctx.initial_trust
        )
        stake = compute_stake(
            leader_trust_values(chain, b.header.leader_id, b.transactions)
        )
        score += stake * avg
        chain = chain.extended(b)
    return score


def resolve(
    base: Chain, forks: Sequence[Sequence[Block]], ctx: ValidationContext
) -> Sequence[Block]:
    """Pick the fork with the highest accumulated stake-times-credibility.

    Ties break toward the lexicographically smallest tip hash, which is
    deterministic and independent of input order.
    """
    if not forks:
        raise ValueError("no forks to resolve")

    def tip_hash(fork: Sequence[Block]) -> bytes:
        return hash_block(fork[-1]) if fork else base.tip_hash

    best = None
    best_key = None
    for fork in forks:
        key = (-fork_score(base, fork, ctx), tip_hash(fork))
        if best_key is None or key < best_key:
            best, best_key = fork, key
    return best

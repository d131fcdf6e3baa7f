"""Consensus-layer experiment harnesses.

Two standalone studies that exercise the election and fork-choice machinery
without the full per-node trust loop:

* ``leader_election_trial``: many rounds of the eligibility + mining lottery
  over nodes with static stake/credibility profiles, for fairness analysis;
* ``fork_contest``: a seeded construction of two competing mined forks (an
  honest branch and a low-stake coalition branch) resolved by fork choice.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .chain import Chain, Transaction, build_transaction, make_block
from .consensus import (
    ConsensusParams,
    ValidationContext,
    chain_average_credibility,
    check_eligibility,
    compute_stake,
    compute_target,
    fork_score,
    leader_trust_values,
    mine,
    resolve,
    time_since_last_block,
    validate_block,
)
from .encoding import enc_int, enc_list
from .keys import KeyPair, KeyRegistry
from .netsim import derived_rng

__all__ = ["ElectionStats", "leader_election_trial", "ForkContest", "fork_contest"]


@dataclass
class ElectionStats:
    """Per-node aggregates over an election trial."""

    blocks: list[int]
    stakes: list[float]
    avg_creds: list[float]
    mean_times: list[float]

    def fairness_inputs(self) -> tuple[list[float], list[float]]:
        """(block counts, stake x credibility x mean elapsed time) per node."""
        expected = [
            s * c * t for s, c, t in zip(self.stakes, self.avg_creds, self.mean_times)
        ]
        return [float(b) for b in self.blocks], expected


def leader_election_trial(
    n_nodes: int,
    rounds: int,
    params: ConsensusParams,
    seed: int,
) -> ElectionStats:
    """Run the hybrid lottery with static per-node profiles.

    Each node gets a fixed stake (drawn from a spread of trust-score
    sharpness) and a fixed average credibility; elapsed time evolves with
    the adopted leader sequence.  Counts every block a node manages to
    produce (forks included).
    """
    rng = derived_rng(seed, "election-trial")
    ids = [f"node{i:03d}" for i in range(n_nodes)]
    stakes = [0.2 + 4.8 * rng.random() for _ in range(n_nodes)]
    avg_creds = [0.5 + 0.45 * rng.random() for _ in range(n_nodes)]

    blocks = [0] * n_nodes
    last_led = [0] * n_nodes
    time_sum = [0.0] * n_nodes
    prev_hash = hashlib.sha256(b"election-trial-genesis").digest()

    for rnd in range(1, rounds + 1):
        payload = enc_int(rnd) + prev_hash
        winners = []
        for i in range(n_nodes):
            t = min(max(1, rnd - last_led[i]), params.t_cap)
            time_sum[i] += t
            eligible, g = check_eligibility(
                ids[i], params.d_cred, avg_creds[i], prev_hash, payload
            )
            if not eligible:
                continue
            target = compute_target(
                params.d_stake, stakes[i], t, params.t_cap, params.r_bits
            )
            ctr, _ = mine(g, rnd, target, params.q_max, params.r_bits)
            if ctr is not None:
                blocks[i] += 1
                winners.append((i, g, ctr))
        if winners:
            # adopt the proposal with the smallest mining hash; good enough
            # as a deterministic stand-in for full fork choice here
            leader = min(
                winners,
                key=lambda w: hashlib.sha256(w[1] + enc_int(rnd) + enc_int(w[2])).digest(),
            )[0]
            last_led[leader] = rnd
            prev_hash = hashlib.sha256(prev_hash + enc_int(leader) + enc_int(rnd)).digest()

    mean_times = [s / rounds for s in time_sum]
    return ElectionStats(blocks, stakes, avg_creds, mean_times)


@dataclass
class ForkContest:
    """Outcome of one seeded fork-resolution contest."""

    honest_score: float
    coalition_score: float
    honest_won: bool
    honest_len: int
    coalition_len: int

    @property
    def ratio(self) -> float:
        if self.coalition_score == 0.0:
            return float("inf")
        return self.honest_score / self.coalition_score


def _mine_on(
    chain: Chain,
    key: KeyPair,
    gen_time: int,
    txs: list[Transaction],
    ctx: ValidationContext,
):
    members = ctx.members_at(gen_time)
    avg = chain_average_credibility(chain, key.node_id, members, ctx.initial_trust)
    payload = enc_list(sorted(txs, key=lambda t: t.ids_id), Transaction.encode)
    eligible, g = check_eligibility(
        key.node_id, ctx.params.d_cred, avg, chain.tip_hash, payload
    )
    if not eligible:
        return None
    stake = compute_stake(leader_trust_values(chain, key.node_id, txs))
    t = time_since_last_block(chain, key.node_id, gen_time)
    target = compute_target(
        ctx.params.d_stake, stake, t, ctx.params.t_cap, ctx.params.r_bits
    )
    ctr, _ = mine(g, gen_time, target, ctx.params.q_max, ctx.params.r_bits)
    if ctr is None:
        return None
    return make_block(key, gen_time, chain.tip_hash, ctr, target, txs)


def fork_contest(
    seed: int,
    n_honest: int = 7,
    n_coalition: int = 3,
    fork_len: int = 3,
    params: ConsensusParams | None = None,
) -> ForkContest | None:
    """Build a bootstrapped chain and two competing mined forks; resolve.

    Honest members publish sharp trust scores (high stake) and receive high
    credibility; coalition members publish scores near 1/2 (low stake) and
    collude on mutual top ratings.  Returns None when no bootstrap leader
    passed the eligibility lottery for this seed.
    """
    params = params or ConsensusParams(
        d_cred=1.0, d_stake=0.05, r_bits=16, q_max=4096, t_cap=16
    )
    rng = derived_rng(seed, "fork-contest")
    n_total = n_honest + n_coalition
    keys = [
        KeyPair.from_seed(hashlib.sha256(f"fork:{seed}:{i}".encode()).digest())
        for i in range(n_total)
    ]
    registry = KeyRegistry()
    for k in keys:
        registry.register(k.public_bytes)
    ids = [k.node_id for k in keys]
    honest = set(ids[:n_honest])
    hosts = [f"192.0.2.{i+1}" for i in range(6)]

    ctx = ValidationContext(
        params=params,
        registry=registry,
        initial_trust=0.5,
        members_at=lambda rnd: list(ids),
    )

    # bootstrap transactions: every member's credibility and trust lists
    txs = []
    for i, k in enumerate(keys):
        peers = {}
        for j, other in enumerate(ids):
            if other == k.node_id:
                continue
            if ids[i] in honest:
                peers[other] = (
                    0.85 + 0.1 * rng.random() if other in honest else 0.45 + 0.1 * rng.random()
                )
            else:
                peers[other] = 1.0 if other not in honest else 0.1
        if ids[i] in honest:
            trusts = {h: 0.9 + 0.08 * rng.random() for h in hosts}
        else:
            trusts = {h: 0.48 + 0.04 * rng.random() for h in hosts}
        txs.append(build_transaction(k, peers, trusts))

    chain = Chain.genesis()
    boot = None
    for k in keys:
        boot = _mine_on(chain, k, 1, txs, ctx)
        if boot is not None:
            break
    if boot is None:
        return None
    ok, reason = validate_block(boot, chain, ctx)
    assert ok, reason
    base = chain.extended(boot)

    def grow_fork(leader_pool: list[KeyPair]) -> list:
        fork = []
        tip = base
        for step in range(fork_len):
            gen_time = 2 + step
            block = None
            for k in leader_pool:
                block = _mine_on(tip, k, gen_time, [], ctx)
                if block is not None:
                    break
            if block is None:
                break
            ok, reason = validate_block(block, tip, ctx)
            assert ok, reason
            tip = tip.extended(block)
            fork.append(block)
        return fork

    honest_fork = grow_fork(keys[:n_honest])
    coalition_fork = grow_fork(keys[n_honest:])
    if not honest_fork or not coalition_fork:
        return None

    h_score = fork_score(base, honest_fork, ctx)
    c_score = fork_score(base, coalition_fork, ctx)
    winner = resolve(base, [coalition_fork, honest_fork], ctx)
    return ForkContest(
        honest_score=h_score,
        coalition_score=c_score,
        honest_won=winner is honest_fork,
        honest_len=len(honest_fork),
        coalition_len=len(coalition_fork),
    )

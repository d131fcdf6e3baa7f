"""Per-peer behavior loop: chain ingestion, trust diffusion, challenges,
transaction publication, and mining, plus pluggable adversarial behaviors.

One ``run_round`` call realizes a single round: ingest delivered blocks and
transactions, adopt the fork-choice winner, fold the committed network view
into local host trust (adopt-then-combine), refresh the blacklist, measure
local traffic, handle challenges, publish a transaction when the local
lists changed, and finally attempt to mine.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Any, Callable, Sequence

from . import trust
from .chain import (
    Block,
    Chain,
    EvidenceRecord,
    Transaction,
    build_transaction,
    hash_block,
    make_block,
    verify_transaction,
)
from .consensus import (
    ConsensusParams,
    ValidationContext,
    chain_average_credibility,
    check_eligibility,
    compute_stake,
    compute_target,
    leader_trust_values,
    mine,
    time_since_last_block,
    validate_block,
)
from .encoding import enc_int, enc_list, enc_str
from .keys import KeyPair, KeyRegistry
from .netsim import (
    KIND_BLOCK,
    KIND_CHALLENGE,
    KIND_RESPONSE,
    KIND_TRANSACTION,
    Message,
    derived_rng,
    host_traffic,
)
from .trust import (
    UNSURE,
    ChallengeOutcome,
    HostTrustState,
    PeerTrustState,
    TrustParams,
    satisfaction,
    update_accumulated_trust,
    update_blacklist,
    update_satisfaction,
    update_unsure,
)

__all__ = ["Behavior", "RuntimeContext", "Node", "Challenge", "ChallengeResponse"]

# keep combined scores strictly inside (0,1); adversaries may publish endpoints
_EPS = 1e-15


@dataclass(frozen=True)
class Behavior:
    """Which role a node plays and when.

    kind: honest | sybil | betrayal | collusion.  Sybil nodes are the fake
    identities themselves (spawned mid-run, no monitoring duty); betrayal
    nodes act honestly until turn_round; colluders share a group strategy.
    """

    kind: str = "honest"
    spawn_round: int = 0
    turn_round: int | None = None
    strategy: str = "invert"  # invert | empty
    group_id: int | None = None

    def is_adversarial_at(self, rnd: int) -> bool:
        if self.kind == "honest":
            return False
        if self.kind == "betrayal":
            return self.turn_round is not None and rnd >= self.turn_round
        return True


@dataclass(frozen=True)
class Challenge:
    challenger: str
    target: str
    sent_round: int
    priority: float


@dataclass(frozen=True)
class ChallengeResponse:
    challenger: str
    target: str
    sent_round: int
    answer: float | Any  # priority or UNSURE


@dataclass
class RuntimeContext:
    """Shared, read-only simulation plumbing every node agrees on."""

    seed: int
    trust_params: TrustParams
    consensus_params: ConsensusParams
    registry: KeyRegistry
    members_at: Callable[[int], list[str]]
    index_of: dict[str, int]
    host_ids: list[str]
    host_pmal: dict[str, float]
    challenge_prob: float
    challenge_priorities: str  # uniform | binary
    collusion_groups: dict[str, int] = None  # node_id -> group id

    def __post_init__(self) -> None:
        if self.collusion_groups is None:
            self.collusion_groups = {}

    def validation_context(self) -> ValidationContext:
        return ValidationContext(
            params=self.consensus_params,
            registry=self.registry,
            initial_trust=self.trust_params.initial_trust,
            members_at=self.members_at,
        )


class Node:
    """A simulated CIDN peer with its chain replica and trust state."""

    def __init__(
        self,
        ctx: RuntimeContext,
        index: int,
        key: KeyPair,
        behavior: Behavior,
        monitors: Sequence[str],
        know_prob: float = 1.0,
        fp: float = 0.0,
        fn: float = 0.0,
    ):
        self.ctx = ctx
        self.index = index
        self.key = key
        self.node_id = key.node_id
        self.behavior = behavior
        self.monitors = list(monitors)
        self.know_prob = know_prob
        self.fp = fp
        self.fn = fn

        p = ctx.trust_params
        self.peer_trust: dict[str, PeerTrustState] = {}
        self.host_trust: dict[str, HostTrustState] = {
            ip: HostTrustState.fresh(p) for ip in self.monitors
        }
        self.evidence: dict[str, EvidenceRecord] = {}

        genesis = Chain.genesis()
        self._chains: dict[bytes, Chain] = {genesis.tip_hash: genesis}
        self._scores: dict[bytes, float] = {genesis.tip_hash: 0.0}
        self._committed: dict[bytes, frozenset] = {genesis.tip_hash: frozenset()}
        self._leaves: set[bytes] = {genesis.tip_hash}
        self._orphans: list[Block] = []
        self.replica: Chain = genesis

        self.pending_txs: dict[str, Transaction] = {}
        self.outstanding: dict[tuple[str, int], float] = {}
        self.last_published: tuple | None = None

        self.invalid_blocks = 0
        self.mining_attempts = 0
        self.blocks_mined = 0

        self._traffic_rngs = {
            ip: derived_rng(ctx.seed, "traffic", index, ip) for ip in self.monitors
        }
        self._challenge_rngs: dict[int, Any] = {}
        self._response_rngs: dict[int, Any] = {}

    # -- helpers ----------------------------------------------------------

    @property
    def blacklist(self) -> set[str]:
        return {ip for ip, st in self.host_trust.items() if st.blacklisted}

    def _pair_rng(self, cache: dict, purpose: str, other_index: int):
        rng = cache.get(other_index)
        if rng is None:
            rng = derived_rng(self.ctx.seed, purpose, self.index, other_index)
            cache[other_index] = rng
        return rng

    def _sync_peers(self, rnd: int) -> list[str]:
        peers = [m for m in self.ctx.members_at(rnd) if m != self.node_id]
        for peer in peers:
            if peer not in self.peer_trust:
                self.peer_trust[peer] = PeerTrustState.fresh(self.ctx.trust_params)
        return peers

    # -- round loop -------------------------------------------------------

    def run_round(
        self, deliveries: Sequence[Message], rnd: int
    ) -> list[tuple[str, str | None, Any]]:
        """Process one round; returns outgoing (kind, receiver-or-None, payload)."""
        peers = self._sync_peers(rnd)
        out: list[tuple[str, str | None, Any]] = []

        blocks = [m.payload for m in deliveries if m.kind == KIND_BLOCK]
        txs = [m.payload for m in deliveries if m.kind == KIND_TRANSACTION]
        challenges = [m.payload for m in deliveries if m.kind == KIND_CHALLENGE]
        responses = [m.payload for m in deliveries if m.kind == KIND_RESPONSE]

        # (1) chain ingestion and fork choice
        tip_advanced = self._ingest_blocks(blocks)
        for tx in txs:
            if verify_transaction(tx, self.ctx.registry):
                self.pending_txs[tx.ids_id] = tx
        self._drop_committed_pending()

        # (2) adopt-then-combine when new data got committed
        if tip_advanced and self.monitors:
            self._combine_from_chain()

        # (3) blacklist refresh
        self._refresh_blacklist()

        # (4) local traffic measurement (blacklisted hosts produce no packets
        # to inspect; redemption happens through peers' scores)
        self._measure_traffic(rnd)
        self._refresh_blacklist()

        # (5) challenges: answer, evaluate, issue
        for ch in challenges:
            out.append((KIND_RESPONSE, ch.challenger, self.respond_to_challenge(ch, rnd)))
        for resp in responses:
            self._evaluate_response(resp)
        out.extend(self._issue_challenges(peers, rnd))

        # (6) publish a transaction when the local lists changed
        tx = self._maybe_build_transaction(rnd)
        if tx is not None:
            out.append((KIND_TRANSACTION, None, tx))

        # (7) consensus attempt
        block = self._attempt_mining(rnd)
        if block is not None:
            self.blocks_mined += 1
            out.append((KIND_BLOCK, None, block))
        return out

    # -- (1) chain --------------------------------------------------------

    def _ingest_blocks(self, blocks: Sequence[Block]) -> bool:
        vctx = self.ctx.validation_context()
        queue = list(blocks) + self._orphans
        self._orphans = []
        progress = True
        while progress:
            progress = False
            remaining: list[Block] = []
            for b in queue:
                bh = hash_block(b)
                if bh in self._chains:
                    continue  # duplicate
                parent = self._chains.get(b.header.prev_hash)
                if parent is None:
                    remaining.append(b)
                    continue
                ok, _reason = validate_block(b, parent, vctx)
                if not ok:
                    self.invalid_blocks += 1
                    progress = True
                    continue
                members = self.ctx.members_at(b.header.gen_time)
                avg = chain_average_credibility(
                    parent, b.header.leader_id, members, self.ctx.trust_params.initial_trust
                )
                stake = compute_stake(
                    leader_trust_values(parent, b.header.leader_id, b.transactions)
                )
                self._chains[bh] = parent.extended(b)
                self._scores[bh] = self._scores[b.header.prev_hash] + stake * avg
                self._committed[bh] = self._committed[b.header.prev_hash] | {
                    tx.tx_id for tx in b.transactions
                }
                self._leaves.discard(b.header.prev_hash)
                self._leaves.add(bh)
                progress = True
            queue = remaining
        self._orphans = queue

        # fork choice: highest accumulated stake x credibility, ties toward
        # the smallest tip hash (incremental equivalent of consensus.resolve)
        best = min(self._leaves, key=lambda h: (-self._scores[h], h))
        if best != self.replica.tip_hash:
            self.replica = self._chains[best]
            return True
        return False

    def _drop_committed_pending(self) -> None:
        committed = self._committed[self.replica.tip_hash]
        self.pending_txs = {
            sid: tx for sid, tx in self.pending_txs.items() if tx.tx_id not in committed
        }

    # -- (2) diffusion ----------------------------------------------------

    def _combine_from_chain(self) -> None:
        p = self.ctx.trust_params
        crds = {peer: st.crd for peer, st in self.peer_trust.items()}
        weights = trust.compute_weights(self.node_id, crds, p)
        latest = self.replica.latest_trust
        for ip, state in self.host_trust.items():
            scores = {
                obs: published[ip]
                for obs, published in latest.items()
                if ip in published and obs != self.node_id
            }
            scores[self.node_id] = state.tr_ids
            combined = trust.combine_trust(self.node_id, weights, scores)
            combined = min(max(combined, _EPS), 1.0 - _EPS)
            self.host_trust[ip] = replace(state, tr_ids=combined)

    def _refresh_blacklist(self) -> None:
        p = self.ctx.trust_params
        for ip, state in self.host_trust.items():
            self.host_trust[ip] = update_blacklist(state, p)

    # -- (4) measurement --------------------------------------------------

    def _measure_traffic(self, rnd: int) -> None:
        p = self.ctx.trust_params
        for ip in self.monitors:
            state = self.host_trust[ip]
            if state.blacklisted:
                continue  # packets dropped unseen
            k, n = host_traffic(
                self.ctx.host_pmal[ip], self.fp, self.fn, p.interval_len,
                self._traffic_rngs[ip],
            )
            tr_inst = trust.measure_instantaneous_trust(k, n)
            self.host_trust[ip] = update_accumulated_trust(state, tr_inst, p)
            digests: tuple[bytes, ...] = ()
            if n - k > 0:
                alert = enc_int(rnd) + enc_str(self.node_id) + enc_str(ip) + enc_int(n - k)
                digests = (hashlib.sha256(alert).digest(),)
            self.evidence[ip] = EvidenceRecord(ip, digests, k, n)

    # -- (5) challenges ---------------------------------------------------

    def respond_to_challenge(self, ch: Challenge, rnd: int) -> ChallengeResponse:
        """Behavior-dependent answer to a received challenge."""
        b = self.behavior
        if b.kind == "sybil":
            answer: float | Any = UNSURE
        elif b.kind in ("betrayal", "collusion") and b.is_adversarial_at(rnd):
            answer = 1.0 - ch.priority
        else:
            rng = self._pair_rng(
                self._response_rngs, "response", self.ctx.index_of[ch.challenger]
            )
            answer = ch.priority if rng.random() < self.know_prob else UNSURE
        return ChallengeResponse(ch.challenger, self.node_id, ch.sent_round, answer)

    def _evaluate_response(self, resp: ChallengeResponse) -> None:
        expected = self.outstanding.pop((resp.target, resp.sent_round), None)
        if expected is None:
            return
        p = self.ctx.trust_params
        state = self.peer_trust.get(resp.target)
        if state is None:
            state = PeerTrustState.fresh(p)
        outcome = ChallengeOutcome(expected, resp.answer)
        if outcome.is_unsure:
            self.peer_trust[resp.target] = update_unsure(state, p)
        else:
            self.peer_trust[resp.target] = update_satisfaction(
                state, satisfaction(outcome), p
            )

    def _issue_challenges(
        self, peers: Sequence[str], rnd: int
    ) -> list[tuple[str, str, Challenge]]:
        out = []
        for peer in peers:
            rng = self._pair_rng(
                self._challenge_rngs, "challenge", self.ctx.index_of[peer]
            )
            if rng.random() >= self.ctx.challenge_prob:
                continue
            u = rng.random()
            priority = u if self.ctx.challenge_priorities == "uniform" else (
                0.0 if u < 0.5 else 1.0
            )
            self.outstanding[(peer, rnd)] = priority
            out.append(
                (KIND_CHALLENGE, peer, Challenge(self.node_id, peer, rnd, priority))
            )
        return out

    # -- (6) transaction --------------------------------------------------

    def current_lists(self) -> tuple[dict[str, float], dict[str, float]]:
        """Honest view: peer credibilities and monitored-host trust scores."""
        creds = {peer: st.crd for peer, st in self.peer_trust.items()}
        trusts = {ip: st.tr_ids for ip, st in self.host_trust.items()}
        return creds, trusts

    def distorted_lists(self, rnd: int) -> tuple[dict[str, float], dict[str, float]]:
        """Behavior-dependent published lists (validly signed, false content)."""
        creds, trusts = self.current_lists()
        b = self.behavior
        if not b.is_adversarial_at(rnd):
            return creds, trusts
        if b.kind == "sybil":
            if b.strategy == "empty":
                return creds, {}
            latest = self.replica.latest_trust
            fabricated = {}
            for ip in self.ctx.host_ids:
                published = [v[ip] for v in latest.values() if ip in v]
                mean = sum(published) / len(published) if published else 0.5
                fabricated[ip] = 1.0 - mean
            return creds, fabricated
        if b.kind == "collusion":
            groups = self.ctx.collusion_groups
            creds = {
                peer: (1.0 if groups.get(peer) == b.group_id else 1.0 - c)
                for peer, c in creds.items()
            }
            return creds, {ip: 1.0 - t for ip, t in trusts.items()}
        # betrayal: plain inversion
        return (
            {peer: 1.0 - c for peer, c in creds.items()},
            {ip: 1.0 - t for ip, t in trusts.items()},
        )

    def _maybe_build_transaction(self, rnd: int) -> Transaction | None:
        creds, trusts = self.distorted_lists(rnd)
        fingerprint = (tuple(sorted(creds.items())), tuple(sorted(trusts.items())))
        if fingerprint == self.last_published:
            return None
        self.last_published = fingerprint
        evidence = {ip: ev for ip, ev in self.evidence.items() if ip in trusts}
        return build_transaction(self.key, creds, trusts, evidence)

    # -- (7) mining -------------------------------------------------------

    def _attempt_mining(self, rnd: int) -> Block | None:
        cp = self.ctx.consensus_params
        txs = sorted(self.pending_txs.values(), key=lambda t: t.ids_id)
        payload = enc_list(txs, Transaction.encode)
        members = list(self.ctx.members_at(rnd))
        avg = chain_average_credibility(
            self.replica, self.node_id, members, self.ctx.trust_params.initial_trust
        )
        eligible, g = check_eligibility(
            self.node_id, cp.d_cred, avg, self.replica.tip_hash, payload
        )
        if not eligible:
            return None
        stake = compute_stake(leader_trust_values(self.replica, self.node_id, txs))
        time_since = time_since_last_block(self.replica, self.node_id, rnd)
        target = compute_target(cp.d_stake, stake, time_since, cp.t_cap, cp.r_bits)
        if target <= 0.0:
            return None
        ctr, attempts = mine(g, rnd, target, cp.q_max, cp.r_bits)
        self.mining_attempts += attempts
        if ctr is None:
            return None
        return make_block(self.key, rnd, self.replica.tip_hash, ctr, target, txs)

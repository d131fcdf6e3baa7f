"""Scenario driver: wires nodes, network, and chain together and runs the
round loop, collecting per-round metrics.

Everything is a pure function of (config, seed): keys are derived from the
seed, and all randomness flows through streams keyed by (seed, purpose,
participants).
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .chain import Chain
from .config import SimConfig
from .consensus import chain_average_credibility, compute_stake, time_since_last_block
from .keys import KeyPair, KeyRegistry
from .netsim import KIND_BLOCK, Network
from .node import Node, RuntimeContext

__all__ = ["ScenarioResult", "Simulation", "run_scenario", "host_id_for"]


def host_id_for(index: int) -> str:
    """Synthetic IPv4 for host number ``index``."""
    return f"10.0.{index // 250}.{index % 250 + 1}"


def key_for(rng_seed: int, index: int) -> KeyPair:
    material = hashlib.sha256(f"node-key:{rng_seed}:{index}".encode()).digest()
    return KeyPair.from_seed(material)


@dataclass
class ScenarioResult:
    """Per-round metrics plus end-of-run aggregates."""

    rounds: list[dict] = field(default_factory=list)
    leader_counts: dict[str, int] = field(default_factory=dict)
    node_summaries: dict[str, dict] = field(default_factory=dict)
    chain: Chain | None = None
    registry: KeyRegistry | None = None
    chain_path: str | None = None
    wall_time: float = 0.0


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        self.keys = [key_for(config.rng_seed, i) for i in range(len(config.nodes))]
        self.registry = KeyRegistry()
        for k in self.keys:
            self.registry.register(k.public_bytes)

        self.host_ids = [host_id_for(i) for i in range(len(config.hosts))]
        host_pmal = {
            self.host_ids[i]: config.hosts[i].p_mal for i in range(len(config.hosts))
        }
        spawn = [spec.behavior.spawn_round for spec in config.nodes]
        ids = [k.node_id for k in self.keys]

        def members_at(rnd: int) -> list[str]:
            return [ids[i] for i in range(len(ids)) if spawn[i] <= rnd]

        collusion_groups = {
            ids[i]: spec.behavior.group_id
            for i, spec in enumerate(config.nodes)
            if spec.behavior.kind == "collusion"
        }
        self.ctx = RuntimeContext(
            seed=config.rng_seed,
            trust_params=config.trust,
            consensus_params=config.consensus,
            registry=self.registry,
            members_at=members_at,
            index_of={nid: i for i, nid in enumerate(ids)},
            host_ids=self.host_ids,
            host_pmal=host_pmal,
            challenge_prob=config.network.challenge_prob,
            challenge_priorities=config.network.challenge_priorities,
            collusion_groups=collusion_groups,
        )
        self.network = Network(
            seed=config.rng_seed,
            drop_prob=config.network.drop_prob,
            delay_rounds=config.network.delay_rounds,
        )
        self.nodes = [
            Node(
                self.ctx,
                index=i,
                key=self.keys[i],
                behavior=spec.behavior,
                monitors=[self.host_ids[h] for h in config.monitors_for(i)],
                know_prob=spec.know_prob,
                fp=spec.fp,
                fn=spec.fn,
            )
            for i, spec in enumerate(config.nodes)
        ]
        self._spawn = spawn
        for i, n in enumerate(self.nodes):
            if spawn[i] == 0:
                self.network.add_node(n.node_id)

    def honest_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.behavior.kind == "honest"]

    def run(
        self,
        verbose: bool = False,
        event_sink: Callable[[dict], None] | None = None,
        round_hook: Callable[["Simulation", int], None] | None = None,
    ) -> ScenarioResult:
        cfg = self.config
        result = ScenarioResult()
        started = time.monotonic()
        truth_malicious = {
            self.host_ids[i]
            for i, h in enumerate(cfg.hosts)
            if h.p_mal >= 0.5
        }
        score_sums: dict[str, float] = {n.node_id: 0.0 for n in self.nodes}

        for rnd in range(1, cfg.rounds + 1):
            for i, n in enumerate(self.nodes):
                if self._spawn[i] == rnd:
                    self.network.add_node(n.node_id)
            deliveries = self.network.step(rnd)
            blocks_proposed = 0
            for i, n in enumerate(self.nodes):
                if self._spawn[i] > rnd:
                    continue
                outgoing = n.run_round(deliveries.get(n.node_id, []), rnd)
                for kind, receiver, payload in outgoing:
                    if kind == KIND_BLOCK:
                        blocks_proposed += 1
                        result.leader_counts[n.node_id] = (
                            result.leader_counts.get(n.node_id, 0) + 1
                        )
                    if receiver is None:
                        self.network.broadcast(kind, n.node_id, payload, rnd)
                    else:
                        self.network.send(kind, n.node_id, receiver, payload, rnd)

            self._accumulate_election_scores(rnd, score_sums)
            row = self._metrics_row(rnd, blocks_proposed, truth_malicious)
            result.rounds.append(row)
            if verbose and event_sink is not None:
                event_sink(self._snapshot(rnd))
            if round_hook is not None:
                round_hook(self, rnd)

        reference = self.honest_nodes() or self.nodes
        result.chain = reference[0].replica
        result.registry = self.registry
        for n in self.nodes:
            rounds_active = max(1, cfg.rounds - n.behavior.spawn_round)
            result.node_summaries[n.node_id] = {
                "index": n.index,
                "behavior": n.behavior.kind,
                "blocks_mined": n.blocks_mined,
                "mean_election_score": score_sums[n.node_id] / rounds_active,
            }
        result.wall_time = time.monotonic() - started
        return result

    def _accumulate_election_scores(self, rnd: int, sums: dict[str, float]) -> None:
        """Stake x average-credibility x elapsed-time factor, from the view of
        the first honest replica; feeds the fairness statistic in reports."""
        reference = (self.honest_nodes() or self.nodes)[0].replica
        members = self.ctx.members_at(rnd)
        tau = self.config.trust.initial_trust
        cp = self.config.consensus
        for n in self.nodes:
            if n.behavior.spawn_round > rnd:
                continue
            avg = chain_average_credibility(reference, n.node_id, members, tau)
            stake = compute_stake(
                reference.latest_trust.get(n.node_id, {}).values()
            )
            t = min(time_since_last_block(reference, n.node_id, rnd), cp.t_cap)
            sums[n.node_id] += stake * avg * t

    def _metrics_row(
        self, rnd: int, blocks_proposed: int, truth_malicious: set[str]
    ) -> dict:
        honest = self.honest_nodes()
        tp = fp = fn_ = 0
        for n in honest:
            for ip in n.monitors:
                flagged = n.host_trust[ip].blacklisted
                bad = ip in truth_malicious
                if flagged and bad:
                    tp += 1
                elif flagged and not bad:
                    fp += 1
                elif bad and not flagged:
                    fn_ += 1
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / (tp + fn_) if tp + fn_ else 1.0

        by_class: dict[str, list[float]] = {}
        for n in honest:
            for peer, st in n.peer_trust.items():
                idx = self.ctx.index_of[peer]
                kind = self.config.nodes[idx].behavior.kind
                by_class.setdefault(kind, []).append(st.crd)
        mean_cred = {
            kind: sum(v) / len(v) for kind, v in by_class.items() if v
        }

        reference = (honest or self.nodes)[0]
        return {
            "round": rnd,
            "blocks_proposed": blocks_proposed,
            "chain_height": len(reference.replica) - 1,
            "open_forks": len(reference._leaves),
            "invalid_blocks": sum(n.invalid_blocks for n in self.nodes),
            "blacklist_precision": precision,
            "blacklist_recall": recall,
            **{f"mean_cred_{k}": v for k, v in sorted(mean_cred.items())},
        }

    def _snapshot(self, rnd: int) -> dict:
        return {
            "round": rnd,
            "nodes": {
                n.node_id: {
                    "behavior": n.behavior.kind,
                    "credibility": {p: st.crd for p, st in n.peer_trust.items()},
                    "host_trust": {ip: st.tr_ids for ip, st in n.host_trust.items()},
                    "blacklist": sorted(n.blacklist),
                }
                for i, n in enumerate(self.nodes)
                if self._spawn[i] <= rnd
            },
        }


def run_scenario(config: SimConfig, verbose: bool = False,
                 event_sink: Callable[[dict], None] | None = None) -> ScenarioResult:
    return Simulation(config).run(verbose=verbose, event_sink=event_sink)

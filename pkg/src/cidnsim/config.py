"""Scenario configuration: JSON schema, fail-closed validation, dataclasses.

Unknown fields are rejected everywhere.  ``schema_version`` is mandatory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .consensus import ConsensusParams
from .node import Behavior
from .trust import TrustParams

__all__ = ["ConfigError", "NetParams", "HostSpec", "NodeSpec", "SimConfig", "load_config", "config_from_dict"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed scenario config; message lists the offending fields."""


@dataclass(frozen=True)
class NetParams:
    drop_prob: float = 0.0
    delay_rounds: int = 0
    challenge_prob: float = 0.5
    challenge_priorities: str = "uniform"  # uniform | binary

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigError(f"network.drop_prob must be in [0,1): {self.drop_prob}")
        if self.delay_rounds < 0:
            raise ConfigError("network.delay_rounds must be >= 0")
        if not 0.0 < self.challenge_prob <= 1.0:
            raise ConfigError("network.challenge_prob must be in (0,1]")
        if self.challenge_priorities not in ("uniform", "binary"):
            raise ConfigError(
                f"network.challenge_priorities must be uniform or binary: "
                f"{self.challenge_priorities}"
            )


@dataclass(frozen=True)
class HostSpec:
    p_mal: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_mal <= 1.0:
            raise ConfigError(f"hosts[].p_mal must be in [0,1]: {self.p_mal}")


@dataclass(frozen=True)
class NodeSpec:
    behavior: Behavior = field(default_factory=Behavior)
    know_prob: float = 1.0
    fp: float = 0.0
    fn: float = 0.0
    monitors: tuple[int, ...] = ()  # host indices; empty means "all hosts"

    def __post_init__(self) -> None:
        for name in ("know_prob", "fp", "fn"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"nodes[].{name} must be in [0,1]: {v}")


@dataclass(frozen=True)
class SimConfig:
    rounds: int
    rng_seed: int
    trust: TrustParams
    consensus: ConsensusParams
    network: NetParams
    hosts: tuple[HostSpec, ...]
    nodes: tuple[NodeSpec, ...]

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if not self.hosts:
            raise ConfigError("at least one host is required")
        if not self.nodes:
            raise ConfigError("at least one node is required")
        monitored: set[int] = set()
        for i, spec in enumerate(self.nodes):
            for h in spec.monitors:
                if not 0 <= h < len(self.hosts):
                    raise ConfigError(f"nodes[{i}].monitors references unknown host {h}")
            if spec.behavior.kind != "sybil" and not self._monitor_set(spec):
                raise ConfigError(f"nodes[{i}] must monitor at least one host")
            monitored.update(self._monitor_set(spec))
            sr = spec.behavior.spawn_round
            if sr < 0 or (self.rounds and sr > self.rounds):
                raise ConfigError(f"nodes[{i}].spawn_round outside the horizon")
            tr = spec.behavior.turn_round
            if tr is not None and (tr < 0 or (self.rounds and tr > self.rounds)):
                raise ConfigError(f"nodes[{i}].turn_round outside the horizon")
        if self.rounds and monitored != set(range(len(self.hosts))):
            missing = sorted(set(range(len(self.hosts))) - monitored)
            raise ConfigError(f"hosts with no monitoring node: {missing}")

    def _monitor_set(self, spec: NodeSpec) -> set[int]:
        if spec.behavior.kind == "sybil":
            return set(spec.monitors)
        return set(spec.monitors) if spec.monitors else set(range(len(self.hosts)))

    def monitors_for(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(self._monitor_set(self.nodes[i])))


def _check_keys(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown fields in {where}: {unknown}")


def _behavior_from(value: Any, where: str) -> Behavior:
    if value is None:
        return Behavior()
    if isinstance(value, str):
        value = {"kind": value}
    if not isinstance(value, dict):
        raise ConfigError(f"{where}.behavior must be a string or object")
    kind = value.get("kind", "honest")
    allowed = {
        "honest": {"kind"},
        "sybil": {"kind", "spawn_round", "strategy"},
        "betrayal": {"kind", "turn_round", "strategy"},
        "collusion": {"kind", "group_id", "strategy"},
    }
    if kind not in allowed:
        raise ConfigError(f"{where}.behavior.kind unknown: {kind}")
    _check_keys(value, allowed[kind], f"{where}.behavior")
    if kind == "betrayal" and "turn_round" not in value:
        raise ConfigError(f"{where}.behavior: betrayal requires turn_round")
    if kind == "collusion" and "group_id" not in value:
        raise ConfigError(f"{where}.behavior: collusion requires group_id")
    return Behavior(
        kind=kind,
        spawn_round=int(value.get("spawn_round", 0)),
        turn_round=value.get("turn_round"),
        strategy=value.get("strategy", "invert"),
        group_id=value.get("group_id"),
    )


def config_from_dict(d: Mapping[str, Any]) -> SimConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("config root must be an object")
    _check_keys(
        d,
        {"schema_version", "rounds", "rng_seed", "trust", "consensus", "network",
         "hosts", "nodes", "sybil"},
        "config",
    )
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {d.get('schema_version')}"
        )
    for req in ("rounds", "rng_seed", "trust", "consensus", "hosts", "nodes"):
        if req not in d:
            raise ConfigError(f"missing required field: {req}")

    t = d["trust"]
    _check_keys(
        t,
        {"forgetting", "severity", "cred_threshold", "initial_trust",
         "blacklist_threshold", "interval_len"},
        "trust",
    )
    try:
        trust_params = TrustParams(
            forgetting=float(t["forgetting"]),
            severity=float(t["severity"]),
            cred_threshold=float(t["cred_threshold"]),
            initial_trust=float(t["initial_trust"]),
            blacklist_threshold=float(t["blacklist_threshold"]),
            interval_len=int(t["interval_len"]),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"trust: {e}") from e

    c = d["consensus"]
    _check_keys(c, {"d_cred", "d_stake", "r_bits", "q_max", "t_cap"}, "consensus")
    try:
        consensus_params = ConsensusParams(
            d_cred=float(c["d_cred"]),
            d_stake=float(c["d_stake"]),
            r_bits=int(c["r_bits"]),
            q_max=int(c["q_max"]),
            t_cap=int(c["t_cap"]),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"consensus: {e}") from e

    n = d.get("network", {})
    _check_keys(
        n,
        {"drop_prob", "delay_rounds", "challenge_prob", "challenge_priorities"},
        "network",
    )
    network = NetParams(
        drop_prob=float(n.get("drop_prob", 0.0)),
        delay_rounds=int(n.get("delay_rounds", 0)),
        challenge_prob=float(n.get("challenge_prob", 0.5)),
        challenge_priorities=str(n.get("challenge_priorities", "uniform")),
    )

    hosts = []
    for i, h in enumerate(d["hosts"]):
        _check_keys(h, {"p_mal"}, f"hosts[{i}]")
        hosts.append(HostSpec(p_mal=float(h.get("p_mal", 0.0))))

    nodes = []
    for i, nd in enumerate(d["nodes"]):
        _check_keys(
            nd, {"behavior", "know_prob", "fp", "fn", "monitors"}, f"nodes[{i}]"
        )
        nodes.append(
            NodeSpec(
                behavior=_behavior_from(nd.get("behavior"), f"nodes[{i}]"),
                know_prob=float(nd.get("know_prob", 1.0)),
                fp=float(nd.get("fp", 0.0)),
                fn=float(nd.get("fn", 0.0)),
                monitors=tuple(int(x) for x in nd.get("monitors", ())),
            )
        )

    # convenience expansion: a "sybil" section appends n_fakes fake identities
    if "sybil" in d:
        s = d["sybil"]
        _check_keys(s, {"n_fakes", "spawn_round", "strategy"}, "sybil")
        for _ in range(int(s["n_fakes"])):
            nodes.append(
                NodeSpec(
                    behavior=Behavior(
                        kind="sybil",
                        spawn_round=int(s.get("spawn_round", 0)),
                        strategy=str(s.get("strategy", "invert")),
                    )
                )
            )

    try:
        return SimConfig(
            rounds=int(d["rounds"]),
            rng_seed=int(d["rng_seed"]),
            trust=trust_params,
            consensus=consensus_params,
            network=network,
            hosts=tuple(hosts),
            nodes=tuple(nodes),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e


def load_config(path: str) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return config_from_dict(data)

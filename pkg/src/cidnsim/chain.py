"""Trust-chain data model: transactions, blocks, headers, and the chain.

A transaction carries one node's current view (peer credibilities, host
trust scores, evidence); blocks bundle the transactions of a round under a
mined header.  Everything that is hashed or signed goes through the
canonical encoding in :mod:`cidnsim.encoding`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .encoding import Reader, enc_bytes, enc_int, enc_list, enc_real, enc_str
from .keys import KeyPair, KeyRegistry, verify

__all__ = [
    "HASH_LEN",
    "ZERO_HASH",
    "EvidenceRecord",
    "Transaction",
    "BlockHeader",
    "Block",
    "Chain",
    "ChainError",
    "build_transaction",
    "verify_transaction",
    "hash_block",
    "block_to_dict",
    "block_from_dict",
    "export_chain",
    "import_chain",
]

HASH_LEN = 32
ZERO_HASH = b"\x00" * HASH_LEN


class ChainError(ValueError):
    """Structural violation: bad linkage, duplicate block, malformed record."""


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class EvidenceRecord:
    """Justification for one host's score: alert digests plus the interval counts."""

    host: str
    alert_digests: tuple[bytes, ...]
    normal_count: int
    packet_count: int

    def __post_init__(self) -> None:
        if self.normal_count < 0 or self.normal_count > self.packet_count:
            raise ValueError("evidence counts inconsistent")
        for d in self.alert_digests:
            if len(d) != HASH_LEN:
                raise ValueError("alert digest must be 32 bytes")

    def encode(self) -> bytes:
        return (
            enc_str(self.host)
            + enc_list(self.alert_digests, lambda d: d)
            + enc_int(self.normal_count)
            + enc_int(self.packet_count)
        )

    @staticmethod
    def decode(r: Reader) -> "EvidenceRecord":
        host = r.read_str()
        digests = tuple(r.read_list(lambda rr: rr.read_fixed(HASH_LEN)))
        k = r.read_int()
        n = r.read_int()
        return EvidenceRecord(host, digests, k, n)


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    ids_id: str
    peer_list: tuple[str, ...]
    cred_list: tuple[float, ...]
    host_list: tuple[str, ...]
    trust_list: tuple[float, ...]
    evidence_list: tuple[EvidenceRecord, ...]
    signature: bytes

    def body_bytes(self) -> bytes:
        return (
            enc_str(self.ids_id)
            + enc_list(self.peer_list, enc_str)
            + enc_list(self.cred_list, enc_real)
            + enc_list(self.host_list, enc_str)
            + enc_list(self.trust_list, enc_real)
            + enc_list(self.evidence_list, EvidenceRecord.encode)
        )

    def signed_bytes(self) -> bytes:
        return self.tx_id + self.body_bytes()

    def encode(self) -> bytes:
        return self.tx_id + self.body_bytes() + enc_bytes(self.signature)

    @staticmethod
    def decode(r: Reader) -> "Transaction":
        tx_id = r.read_fixed(HASH_LEN)
        ids_id = r.read_str()
        peers = tuple(r.read_list(Reader.read_str))
        creds = tuple(r.read_list(Reader.read_real))
        hosts = tuple(r.read_list(Reader.read_str))
        trusts = tuple(r.read_list(Reader.read_real))
        evidence = tuple(r.read_list(EvidenceRecord.decode))
        sig = r.read_bytes()
        return Transaction(tx_id, ids_id, peers, creds, hosts, trusts, evidence, sig)


def build_transaction(
    key: KeyPair,
    peer_creds: dict[str, float],
    host_trusts: dict[str, float],
    evidence: dict[str, EvidenceRecord] | None = None,
) -> Transaction:
    """Assemble, hash, and sign a transaction from a node's current lists.

    Peer and host sections are ordered by identifier for determinism.
    """
    evidence = evidence or {}
    peers = tuple(sorted(peer_creds))
    hosts = tuple(sorted(host_trusts))
    ev = tuple(
        evidence.get(h, EvidenceRecord(h, (), 0, 0)) for h in hosts
    )
    tx = Transaction(
        tx_id=b"\x00" * HASH_LEN,
        ids_id=key.node_id,
        peer_list=peers,
        cred_list=tuple(peer_creds[p] for p in peers),
        host_list=hosts,
        trust_list=tuple(host_trusts[h] for h in hosts),
        evidence_list=ev,
        signature=b"",
    )
    tx_id = _sha256(tx.body_bytes())
    tx = Transaction(
        tx_id,
        tx.ids_id,
        tx.peer_list,
        tx.cred_list,
        tx.host_list,
        tx.trust_list,
        tx.evidence_list,
        signature=b"",
    )
    return Transaction(
        tx.tx_id,
        tx.ids_id,
        tx.peer_list,
        tx.cred_list,
        tx.host_list,
        tx.trust_list,
        tx.evidence_list,
        signature=key.sign(tx.signed_bytes()),
    )


def verify_transaction(tx: Transaction, registry: KeyRegistry) -> bool:
    """True iff the signature holds under the registered key, the lists are
    internally consistent, and every score is in range.  Unknown signers are
    treated as unauthenticated and rejected."""
    public = registry.get(tx.ids_id)
    if public is None:
        return False
    if len(tx.peer_list) != len(tx.cred_list):
        return False
    if not (len(tx.host_list) == len(tx.trust_list) == len(tx.evidence_list)):
        return False
    if any(not 0.0 <= c <= 1.0 for c in tx.cred_list):
        return False
    if any(not 0.0 <= t <= 1.0 for t in tx.trust_list):
        return False
    if tx.tx_id != _sha256(tx.body_bytes()):
        return False
    return verify(public, tx.signature, tx.signed_bytes())


@dataclass(frozen=True)
class BlockHeader:
    block_id: bytes
    leader_id: str
    gen_time: int  # logical round number
    prev_hash: bytes
    ctr: int
    target_v: float

    def encode(self) -> bytes:
        return self.block_id + self.encode_without_id()

    def encode_without_id(self) -> bytes:
        return (
            enc_str(self.leader_id)
            + enc_int(self.gen_time)
            + self.prev_hash
            + enc_int(self.ctr)
            + enc_real(self.target_v)
        )

    @staticmethod
    def decode(r: Reader) -> "BlockHeader":
        block_id = r.read_fixed(HASH_LEN)
        leader = r.read_str()
        gen_time = r.read_int()
        prev = r.read_fixed(HASH_LEN)
        ctr = r.read_int()
        target = r.read_real()
        return BlockHeader(block_id, leader, gen_time, prev, ctr, target)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...]  # ordered by ids_id ascending
    leader_signature: bytes

    def payload_bytes(self) -> bytes:
        return enc_list(self.transactions, Transaction.encode)

    def signed_bytes(self) -> bytes:
        return self.header.encode() + self.payload_bytes()

    def encode(self) -> bytes:
        return self.signed_bytes() + enc_bytes(self.leader_signature)

    @staticmethod
    def decode(r: Reader) -> "Block":
        header = BlockHeader.decode(r)
        txs = tuple(r.read_list(Transaction.decode))
        sig = r.read_bytes()
        return Block(header, txs, sig)

    @staticmethod
    def decode_bytes(data: bytes) -> "Block":
        r = Reader(data)
        b = Block.decode(r)
        r.expect_end()
        return b


def compute_block_id(
    leader_id: str,
    gen_time: int,
    prev_hash: bytes,
    ctr: int,
    target_v: float,
    transactions: Sequence[Transaction],
) -> bytes:
    header_tail = (
        enc_str(leader_id)
        + enc_int(gen_time)
        + prev_hash
        + enc_int(ctr)
        + enc_real(target_v)
    )
    payload = enc_list(transactions, Transaction.encode)
    return _sha256(header_tail + payload)


def make_block(
    key: KeyPair,
    gen_time: int,
    prev_hash: bytes,
    ctr: int,
    target_v: float,
    transactions: Iterable[Transaction],
) -> Block:
    """Assemble and sign a block (payload sorted by signer id)."""
    txs = tuple(sorted(transactions, key=lambda t: t.ids_id))
    block_id = compute_block_id(key.node_id, gen_time, prev_hash, ctr, target_v, txs)
    header = BlockHeader(block_id, key.node_id, gen_time, prev_hash, ctr, target_v)
    unsigned = Block(header, txs, b"")
    return Block(header, txs, key.sign(unsigned.signed_bytes()))


def hash_block(b: Block) -> bytes:
    """SHA-256 over the canonical encoding of header and payload."""
    return _sha256(b.header.encode() + b.payload_bytes())


def genesis_block() -> Block:
    block_id = compute_block_id("", 0, ZERO_HASH, 0, 0.0, ())
    header = BlockHeader(block_id, "", 0, ZERO_HASH, 0, 0.0)
    return Block(header, (), b"")


class Chain:
    """Append-only block sequence with cached latest-per-observer state.

    The derived state (each node's most recent credibility and trust lists,
    and the round of its last led block) is a pure function of the block
    sequence; ``extended`` recomputes it incrementally.
    """

    def __init__(
        self,
        blocks: list[Block],
        latest_cred: dict[str, dict[str, float]],
        latest_trust: dict[str, dict[str, float]],
        last_led_round: dict[str, int],
        block_ids: set[bytes],
    ):
        self.blocks = blocks
        self.latest_cred = latest_cred
        self.latest_trust = latest_trust
        self.last_led_round = last_led_round
        self._block_ids = block_ids

    @staticmethod
    def genesis() -> "Chain":
        g = genesis_block()
        return Chain([g], {}, {}, {}, {g.header.block_id})

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def tip_hash(self) -> bytes:
        return hash_block(self.tip)

    def __len__(self) -> int:
        return len(self.blocks)

    def extended(self, b: Block) -> "Chain":
        """Return a new chain with ``b`` appended.

        Consensus-level validity is the caller's business; this only checks
        linkage and duplicates.
        """
        if b.header.prev_hash != self.tip_hash:
            raise ChainError("prev_hash does not match the chain tip")
        if b.header.block_id in self._block_ids:
            raise ChainError("duplicate block_id")
        latest_cred = {k: dict(v) for k, v in self.latest_cred.items()}
        latest_trust = {k: dict(v) for k, v in self.latest_trust.items()}
        last_led = dict(self.last_led_round)
        _apply_block(b, latest_cred, latest_trust, last_led)
        return Chain(
            self.blocks + [b],
            latest_cred,
            latest_trust,
            last_led,
            self._block_ids | {b.header.block_id},
        )

    def chain_state_credibility(self, target: str) -> dict[str, float]:
        """Each observer's most recent on-chain credibility of ``target``."""
        out: dict[str, float] = {}
        for observer, creds in self.latest_cred.items():
            if observer != target and target in creds:
                out[observer] = creds[target]
        return out

    def replay_check(self) -> bool:
        """Derived state equals a from-genesis brute-force replay."""
        cred: dict[str, dict[str, float]] = {}
        trust: dict[str, dict[str, float]] = {}
        led: dict[str, int] = {}
        for b in self.blocks[1:]:
            _apply_block(b, cred, trust, led)
        return (
            cred == self.latest_cred
            and trust == self.latest_trust
            and led == self.last_led_round
        )


def _apply_block(
    b: Block,
    latest_cred: dict[str, dict[str, float]],
    latest_trust: dict[str, dict[str, float]],
    last_led: dict[str, int],
) -> None:
    for tx in b.transactions:
        latest_cred[tx.ids_id] = dict(zip(tx.peer_list, tx.cred_list))
        latest_trust[tx.ids_id] = dict(zip(tx.host_list, tx.trust_list))
    if b.header.leader_id:
        last_led[b.header.leader_id] = b.header.gen_time


# ---------------------------------------------------------------------------
# JSON Lines export (hex for hashes and signatures) for external audit.

def _tx_to_dict(tx: Transaction) -> dict:
    return {
        "tx_id": tx.tx_id.hex(),
        "ids_id": tx.ids_id,
        "peer_list": list(tx.peer_list),
        "cred_list": list(tx.cred_list),
        "host_list": list(tx.host_list),
        "trust_list": list(tx.trust_list),
        "evidence_list": [
            {
                "host": e.host,
                "alert_digests": [d.hex() for d in e.alert_digests],
                "normal_count": e.normal_count,
                "packet_count": e.packet_count,
            }
            for e in tx.evidence_list
        ],
        "signature": tx.signature.hex(),
    }


def _tx_from_dict(d: dict) -> Transaction:
    return Transaction(
        tx_id=bytes.fromhex(d["tx_id"]),
        ids_id=d["ids_id"],
        peer_list=tuple(d["peer_list"]),
        cred_list=tuple(float(x) for x in d["cred_list"]),
        host_list=tuple(d["host_list"]),
        trust_list=tuple(float(x) for x in d["trust_list"]),
        evidence_list=tuple(
            EvidenceRecord(
                e["host"],
                tuple(bytes.fromhex(x) for x in e["alert_digests"]),
                e["normal_count"],
                e["packet_count"],
            )
            for e in d["evidence_list"]
        ),
        signature=bytes.fromhex(d["signature"]),
    )


def block_to_dict(b: Block) -> dict:
    return {
        "header": {
            "block_id": b.header.block_id.hex(),
            "leader_id": b.header.leader_id,
            "gen_time": b.header.gen_time,
            "prev_hash": b.header.prev_hash.hex(),
            "ctr": b.header.ctr,
            "target_v": b.header.target_v,
        },
        "transactions": [_tx_to_dict(tx) for tx in b.transactions],
        "leader_signature": b.leader_signature.hex(),
    }


def block_from_dict(d: dict) -> Block:
    h = d["header"]
    header = BlockHeader(
        block_id=bytes.fromhex(h["block_id"]),
        leader_id=h["leader_id"],
        gen_time=int(h["gen_time"]),
        prev_hash=bytes.fromhex(h["prev_hash"]),
        ctr=int(h["ctr"]),
        target_v=float(h["target_v"]),
    )
    txs = tuple(_tx_from_dict(t) for t in d["transactions"])
    return Block(header, txs, bytes.fromhex(d["leader_signature"]))


def export_chain(chain: Chain, registry: KeyRegistry, path: str) -> None:
    """Write the chain as JSON Lines: a registry line, then one block per line."""
    with open(path, "w", encoding="utf-8") as fh:
        reg = {nid: pub.hex() for nid, pub in sorted(registry.as_dict().items())}
        fh.write(json.dumps({"type": "registry", "keys": reg}, sort_keys=True) + "\n")
        for b in chain.blocks:
            fh.write(json.dumps(block_to_dict(b), sort_keys=True) + "\n")


def import_chain(path: str) -> tuple[list[Block], KeyRegistry]:
    """Read blocks and the key registry back from a JSON Lines export."""
    registry = KeyRegistry()
    blocks: list[Block] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if d.get("type") == "registry":
                for pub_hex in d["keys"].values():
                    registry.register(bytes.fromhex(pub_hex))
            else:
                blocks.append(block_from_dict(d))
    return blocks, registry

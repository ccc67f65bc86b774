"""Mock blockchain harness for desk-scale round trips.

Transactions here are skeletal: opaque placeholder addresses and
signatures, one covert amount per transaction in a designated slot, filler
values for everything else. A chain is an append-only JSONL file ordered by
(block_height, position) with non-decreasing heights; re-reading it always
yields the same field sequence, which is all the receiver needs.

Two shapes are supported: a two-output transaction (pay-to-pubkey-hash
style, the covert value in one output slot or in the fee) and a one-output
transfer (account-model style).

Writes are single-writer; reads are safe concurrently.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec
from .dataset import SuffixTable, truncate_magnitude
from .errors import (
    BuildError,
    ChainFormatError,
    ChannelStageError,
    ChunkHeaderError,
    ExtractionError,
    FieldStegError,
)
from .nncore import Rng

CHAIN_OUTPUTS = {"bitcoin": 2, "ethereum": 1}


@dataclass(frozen=True)
class TxTemplate:
    """Filler fields and placement rules for building covert transactions."""

    chain: str = "bitcoin"
    covert_field: str = "amount"   # amount | fee
    covert_slot: int = 0           # output index when covert_field == amount
    filler_amount: int = 546
    filler_fee: int = 2000
    txs_per_block: int = 8
    start_height: int = 1

    def __post_init__(self):
        if self.chain not in CHAIN_OUTPUTS:
            raise ValueError(f"chain must be one of {sorted(CHAIN_OUTPUTS)}")
        if self.covert_field not in ("amount", "fee"):
            raise ValueError("covert_field must be 'amount' or 'fee'")
        n_out = CHAIN_OUTPUTS[self.chain]
        if not 0 <= self.covert_slot < n_out:
            raise ValueError(f"covert_slot must be in [0, {n_out})")
        if self.txs_per_block < 1:
            raise ValueError("txs_per_block must be >= 1")

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "covert_field": self.covert_field,
            "covert_slot": self.covert_slot,
            "filler_amount": self.filler_amount,
            "filler_fee": self.filler_fee,
            "txs_per_block": self.txs_per_block,
            "start_height": self.start_height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TxTemplate":
        return cls(**d)


@dataclass
class MockTransaction:
    tx_id: str
    inputs: list[str]
    outputs: list[tuple[str, int]]
    fee: int
    block_height: int

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "inputs": self.inputs,
            "outputs": [[addr, int(amount)] for addr, amount in self.outputs],
            "fee": int(self.fee),
            "block_height": self.block_height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MockTransaction":
        return cls(
            tx_id=d["tx_id"],
            inputs=list(d["inputs"]),
            outputs=[(o[0], int(o[1])) for o in d["outputs"]],
            fee=int(d["fee"]),
            block_height=int(d["block_height"]),
        )


def _placeholder(kind: str, seed: int, index: int) -> str:
    digest = hashlib.sha256(f"{kind}:{seed}:{index}".encode()).hexdigest()
    return f"{kind}_{digest[:20]}"


def build_transactions(amounts, template: TxTemplate, seed: int = 0,
                       index_offset: int = 0) -> list[MockTransaction]:
    """One transaction per covert value, deterministic ids from the seed.

    The covert value lands in the designated output slot (or the fee
    field); every other field is filler from the template.
    """
    amounts = [int(a) for a in amounts]
    if not amounts:
        raise BuildError("no amounts to embed")
    if any(a < 1 for a in amounts):
        raise BuildError("covert values must be positive integers")
    n_out = CHAIN_OUTPUTS[template.chain]
    txs = []
    for i, value in enumerate(amounts):
        index = index_offset + i
        height = template.start_height + index // template.txs_per_block
        if template.covert_field == "amount":
            outs = []
            for slot in range(n_out):
                amt = value if slot == template.covert_slot else template.filler_amount
                outs.append((_placeholder("addr", seed, index * n_out + slot), amt))
            fee = template.filler_fee
        else:
            outs = [
                (_placeholder("addr", seed, index * n_out + slot), template.filler_amount)
                for slot in range(n_out)
            ]
            fee = value
        tx_id = hashlib.sha256(
            f"{seed}:{index}:{value}:{template.chain}".encode()
        ).hexdigest()
        txs.append(MockTransaction(
            tx_id=tx_id,
            inputs=[_placeholder("in", seed, index)],
            outputs=outs,
            fee=fee,
            block_height=height,
        ))
    return txs


class ChainFile:
    """Append-only JSONL of transactions with non-decreasing heights."""

    def __init__(self, path):
        self.path = Path(path)
        self._last_height = None
        if self.path.exists():
            for tx in self.transactions():
                self._last_height = tx.block_height

    def append(self, txs: list[MockTransaction]) -> None:
        seen = {tx.tx_id for tx in self.transactions()} if self.path.exists() else set()
        last = self._last_height
        for tx in txs:
            if last is not None and tx.block_height < last:
                raise ChainFormatError(
                    f"height {tx.block_height} below previous {last}")
            if tx.tx_id in seen:
                raise ChainFormatError(f"duplicate tx_id {tx.tx_id}")
            seen.add(tx.tx_id)
            last = tx.block_height
        with open(self.path, "a", encoding="utf-8") as fh:
            for tx in txs:
                fh.write(json.dumps(tx.to_dict()) + "\n")
        self._last_height = last

    def transactions(self) -> list[MockTransaction]:
        if not self.path.exists():
            return []
        txs = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    txs.append(MockTransaction.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                    raise ChainFormatError(f"{self.path}:{lineno}: {exc}")
        return txs


@dataclass(frozen=True)
class Selector:
    """Which fields the receiver reads back: height window, slot, kind."""

    height_lo: int | None = None
    height_hi: int | None = None
    slot: int = 0
    field_kind: str = "amount"


def extract_fields(chain: ChainFile, selector: Selector) -> list[int]:
    """Covert-field values in chain order; exact inverse of placement."""
    values = []
    for tx in chain.transactions():
        if selector.height_lo is not None and tx.block_height < selector.height_lo:
            continue
        if selector.height_hi is not None and tx.block_height > selector.height_hi:
            continue
        if selector.field_kind == "fee":
            values.append(tx.fee)
        else:
            if selector.slot >= len(tx.outputs):
                raise ExtractionError(
                    f"tx {tx.tx_id} has no output slot {selector.slot}")
            values.append(tx.outputs[selector.slot][1])
    if not values:
        raise ExtractionError("selector matched no transactions")
    return values


@dataclass
class ChannelReport:
    """Outcome of one sender -> chain -> receiver pass."""

    recovered: bool
    payload_bits: int
    n_chunks: int
    n_transactions: int
    m: int
    n: int
    ac_bits_per_field: float
    lam: int
    attempts: list[int] = field(default_factory=list)
    min_recovered_bits: list[int] = field(default_factory=list)
    encode_seconds: float = 0.0
    total_seconds: float = 0.0
    error: str | None = None
    stage: str | None = None

    def to_dict(self) -> dict:
        return {
            "recovered": self.recovered,
            "payload_bits": self.payload_bits,
            "n_chunks": self.n_chunks,
            "n_transactions": self.n_transactions,
            "m": self.m,
            "n": self.n,
            "ac_bits_per_field": self.ac_bits_per_field,
            "lam": self.lam,
            "attempts": self.attempts,
            "min_recovered_bits": self.min_recovered_bits,
            "encode_seconds": self.encode_seconds,
            "total_seconds": self.total_seconds,
            "error": self.error,
            "stage": self.stage,
        }


def channel_roundtrip(payload: bytes, model, layout: codec.NoiseLayout,
                      template: TxTemplate, chain_path, rng: Rng,
                      lam: int = 0, suffix_table: SuffixTable | None = None,
                      receiver_model=None,
                      max_attempts: int = codec.DEFAULT_MAX_ATTEMPTS) -> ChannelReport:
    """Full pass: chunk, encode, build, persist, extract, decode, compare.

    With lam >= 1 the magnitude-trading path is active: the model operates
    in the reduced domain, each rounded amount is expanded on chain as
    amount * 10^lam + sampled suffix, and the receiver truncates the last
    lam digits before inverting. The negative-lam (capacity-increasing)
    variant is a dataset-level transform and is not wired through the
    simulator.

    Sender-side failures raise ChannelStageError tagged with the stage;
    receiver-side mismatches are reported, not raised, so a deliberate
    model mismatch shows up as recovered=False.
    """
    if lam < 0:
        raise ValueError("channel_roundtrip supports lam >= 0 only")
    if lam >= 1 and (suffix_table is None or suffix_table.lam != lam):
        raise ValueError(f"lam={lam} requires a suffix table built for lam")
    receiver = receiver_model if receiver_model is not None else model
    started = time.perf_counter()
    report = ChannelReport(
        recovered=False, payload_bits=len(payload) * 8, n_chunks=0,
        n_transactions=0, m=layout.m, n=layout.n,
        ac_bits_per_field=float(layout.m), lam=lam,
    )

    # sender
    try:
        bits = codec.bytes_to_bits(payload)
        chunks = codec.chunk_payload(bits, layout, dims=model.dims)
        report.n_chunks = len(chunks)
    except FieldStegError as exc:
        raise ChannelStageError("chunk", exc)

    chain = ChainFile(chain_path)
    sent_amounts: list[int] = []
    sent_noise: list[np.ndarray] = []
    encode_seconds = 0.0
    for ci, chunk in enumerate(chunks):
        try:
            result = codec.encode(model, chunk, layout, rng.derive(100 + ci),
                                  max_attempts=max_attempts)
        except FieldStegError as exc:
            raise ChannelStageError("encode", exc)
        encode_seconds += result.elapsed
        report.attempts.append(result.attempts)
        sent_noise.append(np.asarray(result.noise_values, dtype=np.uint64))
        amounts = result.amounts
        if lam >= 1:
            suffix_rng = rng.derive(500 + ci)
            scale = 10 ** lam
            amounts = [a * scale + int(suffix_table.sample(suffix_rng))
                       for a in amounts]
        try:
            txs = build_transactions(amounts, template, seed=rng.seed,
                                     index_offset=ci * model.dims)
            chain.append(txs)
        except FieldStegError as exc:
            raise ChannelStageError("build", exc)
        sent_amounts.extend(amounts)
    report.encode_seconds = encode_seconds
    report.n_transactions = len(sent_amounts)

    # receiver
    selector = Selector(slot=template.covert_slot,
                        field_kind=template.covert_field)
    try:
        extracted = extract_fields(ChainFile(chain_path), selector)
        if extracted != sent_amounts:
            raise ExtractionError("chain returned different fields than sent")
        model_domain = truncate_magnitude(extracted, lam) if lam >= 1 else extracted
        dims = receiver.dims
        got_chunks = []
        for ci, off in enumerate(range(0, len(model_domain), dims)):
            vec = np.asarray(model_domain[off:off + dims], dtype=np.float64)
            got_chunks.append(codec.decode(receiver, vec, layout))
            recovered_noise = codec.noise_to_values(receiver.invert(vec), layout.n)
            report.min_recovered_bits.append(int(
                codec.matching_leading_bits(sent_noise[ci], recovered_noise,
                                            layout.n).min()))
        recovered_bits = codec.assemble_payload(got_chunks,
                                                original_len=len(payload) * 8)
        recovered_payload = codec.bits_to_bytes(recovered_bits)
    except (FieldStegError, ChunkHeaderError) as exc:
        report.error = str(exc)
        report.stage = "receive"
        report.total_seconds = time.perf_counter() - started
        return report

    report.recovered = recovered_payload == payload
    if not report.recovered:
        report.error = "decoded payload differs from the original"
        report.stage = "compare"
    report.total_seconds = time.perf_counter() - started
    return report

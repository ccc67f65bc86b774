import numpy as np
import pytest

from fieldsteg import chainsim, codec, dataset
from fieldsteg.chainsim import ChainFile, Selector, TxTemplate
from fieldsteg.errors import (
    BuildError,
    ChainFormatError,
    ChannelStageError,
    ExtractionError,
)
from fieldsteg.nncore import Rng
from tests.conftest import train_ccrgan


# ---------------------------------------------------------------------------
# transactions
# ---------------------------------------------------------------------------

def test_bitcoin_template_two_outputs():
    txs = chainsim.build_transactions(list(range(1, 65)), TxTemplate())
    assert len(txs) == 64
    for tx in txs:
        assert len(tx.outputs) == 2
        assert len(tx.inputs) == 1
    assert [tx.outputs[0][1] for tx in txs] == list(range(1, 65))
    assert all(tx.outputs[1][1] == 546 for tx in txs)


def test_ethereum_template_one_output():
    txs = chainsim.build_transactions([5, 9], TxTemplate(chain="ethereum"))
    assert all(len(tx.outputs) == 1 for tx in txs)


def test_fee_template_places_value_in_fee():
    txs = chainsim.build_transactions([7777], TxTemplate(covert_field="fee"))
    assert txs[0].fee == 7777
    assert all(amount == 546 for _, amount in txs[0].outputs)


def test_build_rejects_empty_and_nonpositive():
    with pytest.raises(BuildError):
        chainsim.build_transactions([], TxTemplate())
    with pytest.raises(BuildError):
        chainsim.build_transactions([0], TxTemplate())


def test_tx_ids_deterministic_and_unique():
    a = chainsim.build_transactions([10, 20], TxTemplate(), seed=5)
    b = chainsim.build_transactions([10, 20], TxTemplate(), seed=5)
    assert [t.tx_id for t in a] == [t.tx_id for t in b]
    assert len({t.tx_id for t in a}) == 2


def test_block_heights_follow_template():
    txs = chainsim.build_transactions(list(range(1, 18)),
                                      TxTemplate(txs_per_block=8, start_height=100))
    heights = [t.block_height for t in txs]
    assert heights == [100] * 8 + [101] * 8 + [102]


# ---------------------------------------------------------------------------
# chain file
# ---------------------------------------------------------------------------

def test_chain_append_and_reload(tmp_path):
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    txs = chainsim.build_transactions([11, 22, 33], TxTemplate())
    chain.append(txs)
    first = chainsim.extract_fields(ChainFile(path), Selector())
    second = chainsim.extract_fields(ChainFile(path), Selector())
    assert first == [11, 22, 33]
    assert first == second


def test_extract_inverts_build(tmp_path):
    amounts = [int(v) for v in Rng(2).integers(1, 10**9, size=128)]
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    chain.append(chainsim.build_transactions(amounts, TxTemplate()))
    assert chainsim.extract_fields(chain, Selector()) == amounts


def test_fee_selector_returns_fee_column(tmp_path):
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    chain.append(chainsim.build_transactions([123, 456],
                                             TxTemplate(covert_field="fee")))
    assert chainsim.extract_fields(chain, Selector(field_kind="fee")) == [123, 456]
    assert chainsim.extract_fields(chain, Selector(slot=0)) == [546, 546]


def test_height_filter_excluding_all(tmp_path):
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    chain.append(chainsim.build_transactions([1, 2], TxTemplate(start_height=5)))
    with pytest.raises(ExtractionError):
        chainsim.extract_fields(chain, Selector(height_lo=100))


def test_heights_must_not_decrease(tmp_path):
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    chain.append(chainsim.build_transactions([1], TxTemplate(start_height=10)))
    with pytest.raises(ChainFormatError):
        chain.append(chainsim.build_transactions([2], TxTemplate(start_height=3)))


def test_duplicate_tx_id_rejected(tmp_path):
    path = tmp_path / "chain.jsonl"
    chain = ChainFile(path)
    txs = chainsim.build_transactions([9], TxTemplate(), seed=1)
    chain.append(txs)
    with pytest.raises(ChainFormatError):
        chain.append(txs)


def test_corrupt_chain_file(tmp_path):
    path = tmp_path / "chain.jsonl"
    path.write_text('{"bad": 1}\n')
    with pytest.raises(ChainFormatError):
        ChainFile(path).transactions()


def test_template_round_trips_through_json():
    t = TxTemplate(chain="ethereum", covert_field="fee", txs_per_block=3)
    assert TxTemplate.from_dict(t.to_dict()) == t


# ---------------------------------------------------------------------------
# end-to-end channel
# ---------------------------------------------------------------------------

def test_channel_roundtrip_small_payload(model, tmp_path):
    payload = b"pay to the order of nobody"
    layout = codec.NoiseLayout(m=14)
    report = chainsim.channel_roundtrip(
        payload, model, layout, TxTemplate(), tmp_path / "c.jsonl", Rng(70))
    assert report.recovered is True
    assert report.error is None
    assert report.ac_bits_per_field == 14
    assert report.n_transactions == report.n_chunks * 64
    assert all(b >= 15 for b in report.min_recovered_bits)
    assert len(report.attempts) == report.n_chunks


def test_channel_roundtrip_empty_payload(model, tmp_path):
    report = chainsim.channel_roundtrip(
        b"", model, codec.NoiseLayout(m=10), TxTemplate(),
        tmp_path / "c.jsonl", Rng(71))
    assert report.recovered is True
    assert report.n_chunks == 1          # header only


def test_channel_roundtrip_wrong_receiver_model(model, synth_corpus, tmp_path):
    other_model, _ = train_ccrgan(synth_corpus, epochs=2, seed=999)
    report = chainsim.channel_roundtrip(
        b"mismatch probe", model, codec.NoiseLayout(m=12), TxTemplate(),
        tmp_path / "c.jsonl", Rng(72), receiver_model=other_model)
    assert report.recovered is False
    assert report.stage in ("receive", "compare")
    assert report.error


def test_channel_roundtrip_t2c_lambda1(synth_corpus, tmp_path):
    lam = 1
    reduced = dataset.decrease_magnitude(synth_corpus, lam)
    norm = dataset.NormalizationParams.from_values(reduced)
    batches = dataset.group_batches(dataset.normalize(reduced, norm))
    import fieldsteg.rgan as rgan
    config = rgan.TrainConfig(mode="ccrgan", seed=13, max_epochs=4, patience=10)
    t2c_model, _ = rgan.train(config, batches, norm)
    table = dataset.build_suffix_table(synth_corpus, lam)
    report = chainsim.channel_roundtrip(
        b"suffix-expanded round trip", t2c_model, codec.NoiseLayout(m=10),
        TxTemplate(), tmp_path / "c.jsonl", Rng(73), lam=lam, suffix_table=table)
    assert report.recovered is True


def test_channel_roundtrip_requires_table_for_lam(model, tmp_path):
    with pytest.raises(ValueError):
        chainsim.channel_roundtrip(b"x", model, codec.NoiseLayout(m=10),
                                   TxTemplate(), tmp_path / "c.jsonl", Rng(74),
                                   lam=2, suffix_table=None)


def test_channel_stage_error_carries_stage(model, tmp_path):
    # impossible attempt budget forces an encode-stage failure
    with pytest.raises(ChannelStageError) as info:
        chainsim.channel_roundtrip(
            b"will not fit", model, codec.NoiseLayout(m=45), TxTemplate(),
            tmp_path / "c.jsonl", Rng(75), max_attempts=3)
    assert info.value.stage == "encode"

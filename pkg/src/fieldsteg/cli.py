"""Command-line surface for the pipeline.

Every subcommand writes a machine-readable JSON report to --out (when
given) and a short human summary to stdout. Runs are seed-governed: the
same flags and inputs produce the same artifacts. Exit codes: 0 success,
1 usage error, 2 domain error (ingestion failures, encoding timeouts, and
friends), tagged with the failing stage where known.

The seed comes from --seed, then the RGAN_SEED environment variable, then
0. No subcommand mutates its inputs; all outputs go to --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import chainsim, codec, dataset, metrics, rgan
from .errors import FieldStegError
from .nncore import Rng


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("RGAN_SEED")
    return int(env) if env else 0


def _write_report(args, payload: dict) -> None:
    if getattr(args, "out", None):
        metrics.write_json(payload, args.out)


def _load_dataset(args) -> dataset.FieldDataset:
    ds, rejected = dataset.load_fields(args.dataset, field_kind=args.field_kind)
    if rejected:
        print(f"ingest: rejected {len(rejected)} malformed line(s)")
    return ds


def _prepare_training_data(ds, args, lam: int = 0):
    values = ds
    if args.mode == "rgan" and args.digits:
        lo, hi = args.digits
        values = dataset.filter_by_digit_length(ds, lo, hi)
    elif args.mode == "ccrgan" and args.digits:
        print("train: ccrgan keeps every value; digit filter skipped")
    raw = np.asarray(values.values, dtype=np.float64)
    if lam:
        raw = dataset.decrease_magnitude(raw, lam)
    norm = dataset.NormalizationParams.from_values(raw)
    batches = dataset.group_batches(dataset.normalize(raw, norm))
    return batches, norm


def _train_model(args, ds, lam: int = 0):
    config = rgan.TrainConfig(
        mode=args.mode, seed=_resolve_seed(args.seed), max_epochs=args.epochs,
        patience=args.patience, theta=args.theta,
    )
    batches, norm = _prepare_training_data(ds, args, lam=lam)
    return rgan.train(config, batches, norm)


def _parse_theta(text: str):
    return "auto" if text == "auto" else float(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    ds, rejected = dataset.load_fields(args.dataset, field_kind=args.field_kind)
    summary = ds.summary()
    summary["rejected_lines"] = [[lineno, reason] for lineno, reason in rejected]
    _write_report(args, summary)
    print(f"ingested {summary['count']} values "
          f"(min {summary['min']}, max {summary['max']}), "
          f"rejected {len(rejected)} line(s)")
    return 0


def _cmd_train(args) -> int:
    ds = _load_dataset(args)
    model, report = _train_model(args, ds)
    rgan.save_model(model, args.out)
    if args.report:
        metrics.write_json(report.to_dict(), args.report)
    print(f"trained {args.mode} for {report.epochs_run} epoch(s), "
          f"stop: {report.stop_reason}, "
          f"inverse residual {report.final_residual:.3e}, "
          f"model -> {args.out}")
    return 0


def _cmd_estimate_m(args) -> int:
    model = rgan.load_model(args.model)
    rng = Rng(_resolve_seed(args.seed))
    report = metrics.estimate_m_report(
        model, rng, trials=args.trials, acceptance_quantile=args.quantile,
        probe_vectors=args.probes, attempt_budget=args.budget,
    )
    _write_report(args, report.to_dict())
    print(f"estimated m = {report.m} "
          f"(histogram max {report.histogram.max_bits} bits, "
          f"{report.histogram.failures} inversion failure(s))")
    return 0


def _cmd_encode(args) -> int:
    model = rgan.load_model(args.model)
    layout = codec.NoiseLayout(m=args.m)
    payload = Path(args.payload).read_bytes()
    rng = Rng(_resolve_seed(args.seed))
    bits = codec.bytes_to_bits(payload)
    chunks = codec.chunk_payload(bits, layout, dims=model.dims)
    results = []
    for ci, chunk in enumerate(chunks):
        results.append(codec.encode(model, chunk, layout, rng.derive(100 + ci),
                                    max_attempts=args.max_attempts))
    doc = {
        "format": "fieldsteg.encoded",
        "m": layout.m,
        "n": layout.n,
        "payload_bits": len(payload) * 8,
        "chunks": [r.to_dict() for r in results],
    }
    _write_report(args, doc)
    total_attempts = sum(r.attempts for r in results)
    print(f"encoded {len(payload)} byte(s) into {len(chunks)} vector(s), "
          f"{total_attempts} attempt(s) total")
    return 0


def _cmd_decode(args) -> int:
    model = rgan.load_model(args.model)
    with open(args.encoded, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "fieldsteg.encoded":
        raise UsageError(f"{args.encoded} is not an encode report")
    layout = codec.NoiseLayout(m=int(doc["m"]), n=int(doc["n"]))
    chunks = [codec.decode(model, np.asarray(c["amounts"], dtype=np.float64), layout)
              for c in doc["chunks"]]
    bits = codec.assemble_payload(chunks)
    payload = codec.bits_to_bytes(bits)
    Path(args.out).write_bytes(payload)
    print(f"decoded {len(payload)} byte(s) -> {args.out}")
    return 0


def _cmd_eval_capacity(args) -> int:
    ac = metrics.absolute_capacity(args.m * 64, 64)
    rows = metrics.cer_table({args.scheme: args.m})
    doc = {"scheme": args.scheme, "m": args.m, "ac_bits_per_field": ac, "cer": rows}
    _write_report(args, doc)
    if args.csv:
        metrics.write_csv(rows, args.csv)
    print(f"AC = {ac:.2f} bits/field")
    for row in rows:
        print(f"  vs {row['baseline']:<8} ({row['baseline_ac']:>3} bits/tx): "
              f"{row['cer_percent']:.2f}%")
    return 0


def _cmd_eval_concealment(args) -> int:
    ds = _load_dataset(args)
    model = rgan.load_model(args.model)
    rng = Rng(_resolve_seed(args.seed))
    n_fields = (len(ds.values) // model.dims) * model.dims
    real = ds.values[:n_fields]
    generated = []
    gen_rng = rng.derive(1)
    for i in range(n_fields // model.dims):
        noise = gen_rng.uniform(-1.0, 1.0, size=model.dims)
        amounts = dataset.round_half_away(model.generate(noise))
        generated.extend(int(a) for a in amounts)
    report = metrics.concealment_eval(real, generated, runs=args.runs,
                                      rng=rng.derive(2), dims=model.dims)
    _write_report(args, report.to_dict())
    print(f"concealment accuracy {report.accuracy:.3f} "
          f"(precision {report.precision:.3f}, recall {report.recall:.3f}, "
          f"f1 {report.f1:.3f}) over {report.runs} run(s)")
    return 0


def _cmd_eval_timing(args) -> int:
    model = rgan.load_model(args.model)
    rng = Rng(_resolve_seed(args.seed))
    report = metrics.timing_experiment(model, args.m, args.vectors, rng,
                                       max_attempts=args.max_attempts)
    _write_report(args, report.to_dict())
    if args.csv:
        q = report.vector_quartiles
        metrics.write_csv([{
            "m": report.m, "q1": q[0], "median": q[1], "q3": q[2],
            "mean": report.vector_mean, "timeouts": report.timeouts,
        }], args.csv)
    q = report.vector_quartiles
    print(f"m={report.m}: vector quartiles {q[0]:.4f}/{q[1]:.4f}/{q[2]:.4f} s, "
          f"mean {report.vector_mean:.4f} s, timeouts {report.timeouts}")
    return 0


def _cmd_t2c(args) -> int:
    ds = _load_dataset(args)
    lam = args.lam
    reduced = dataset.decrease_magnitude(ds, lam)
    doc = {
        "lam": lam,
        "original_min": ds.min,
        "original_max": ds.max,
        "reduced_min": float(reduced.min()),
        "reduced_max": float(reduced.max()),
    }
    if lam >= 1:
        table = dataset.build_suffix_table(ds, lam)
        doc["suffix_table"] = table.to_dict()
        print(f"lam={lam}: reduced range [{doc['reduced_min']}, {doc['reduced_max']}], "
              f"suffix table with {len(table.counts)} key(s)")
    else:
        print(f"lam={lam}: scaled range [{doc['reduced_min']}, {doc['reduced_max']}]")
    _write_report(args, doc)
    return 0


def _cmd_roundtrip(args) -> int:
    seed = _resolve_seed(args.seed)
    rng = Rng(seed)
    lam = args.lam
    suffix_table = None
    ds = None
    if args.dataset:
        ds = _load_dataset(args)
    if args.model:
        model = rgan.load_model(args.model)
        if lam >= 1:
            if not args.suffix_table:
                raise UsageError("--lambda >= 1 with --model needs --suffix-table")
            with open(args.suffix_table, "r", encoding="utf-8") as fh:
                suffix_table = dataset.SuffixTable.from_dict(json.load(fh))
    else:
        if ds is None:
            raise UsageError("roundtrip needs --dataset or --model")
        model, _ = _train_model(args, ds, lam=lam)
        if lam >= 1:
            suffix_table = dataset.build_suffix_table(ds, lam)

    if args.m is not None:
        m = args.m
    else:
        m = metrics.estimate_m(model, rng.derive(3), trials=args.trials)
        if m < 1:
            raise FieldStegError("no feasible m >= 1 for this model")
    layout = codec.NoiseLayout(m=m)

    payload = Path(args.payload).read_bytes() if args.payload \
        else b"expansion-field round trip probe"
    template = chainsim.TxTemplate(chain=args.chain, covert_field=args.field_kind)
    chain_path = args.chain_file or (str(args.out) + ".chain.jsonl" if args.out
                                     else "roundtrip.chain.jsonl")
    Path(chain_path).unlink(missing_ok=True)
    report = chainsim.channel_roundtrip(
        payload, model, layout, template, chain_path, rng.derive(4),
        lam=lam, suffix_table=suffix_table,
    )
    doc = report.to_dict()
    doc["seed"] = seed
    doc["chain_file"] = str(chain_path)
    _write_report(args, doc)
    print(f"roundtrip m={m} lam={lam}: recovered={report.recovered} "
          f"({report.n_transactions} tx, "
          f"attempts {report.attempts}, {report.total_seconds:.2f} s)")
    if not report.recovered:
        print(f"  failure at stage {report.stage}: {report.error}")
        return 2
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, *, needs_dataset=False, needs_model=False, needs_out=False):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (falls back to RGAN_SEED, then 0)")
    p.add_argument("--out", default=None, required=needs_out,
                   help="path for the JSON report/artifact")
    if needs_dataset:
        p.add_argument("--dataset", required=True, help="JSONL corpus path")
        p.add_argument("--field-kind", default="amount", choices=["amount", "fee"])
    if needs_model:
        p.add_argument("--model", required=True, help="trained model JSON")


def _add_train_flags(p):
    p.add_argument("--mode", default="ccrgan", choices=["rgan", "ccrgan"])
    p.add_argument("--epochs", type=int, default=40, help="epoch cap")
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--theta", type=_parse_theta, default=1e-20,
                   help="clip floor for ccrgan, or 'auto'")
    p.add_argument("--digits", type=int, nargs=2, metavar=("LO", "HI"),
                   default=None, help="digit-length filter (rgan mode only)")


def build_parser() -> _Parser:
    parser = _Parser(prog="fieldsteg",
                     description="covert channel over generated transaction fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and summarize a JSONL corpus")
    _add_common(p, needs_dataset=True)

    p = sub.add_parser("train", help="train a generator on a corpus")
    _add_common(p, needs_dataset=True, needs_out=True)
    _add_train_flags(p)
    p.add_argument("--report", default=None, help="training report JSON path")

    p = sub.add_parser("estimate-m", help="estimate covert bits per element")
    _add_common(p, needs_model=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--quantile", type=float, default=0.75)
    p.add_argument("--probes", type=int, default=16)
    p.add_argument("--budget", type=int, default=256)

    p = sub.add_parser("encode", help="embed a payload file into amounts")
    _add_common(p, needs_model=True, needs_out=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--payload", required=True)
    p.add_argument("--max-attempts", type=int, default=codec.DEFAULT_MAX_ATTEMPTS)

    p = sub.add_parser("decode", help="recover a payload from an encode report")
    _add_common(p, needs_model=True, needs_out=True)
    p.add_argument("--encoded", required=True, help="encode report JSON")

    p = sub.add_parser("eval-capacity", help="absolute capacity and expansion rates")
    _add_common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--scheme", default="ccrgan")
    p.add_argument("--csv", default=None)

    p = sub.add_parser("eval-concealment", help="steganalysis stand-in scores")
    _add_common(p, needs_dataset=True, needs_model=True)
    p.add_argument("--runs", type=int, default=10)

    p = sub.add_parser("eval-timing", help="embed/verify wall-clock quartiles")
    _add_common(p, needs_model=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--vectors", type=int, default=25)
    p.add_argument("--max-attempts", type=int, default=codec.DEFAULT_MAX_ATTEMPTS)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("t2c", help="magnitude reduction stats and suffix table")
    _add_common(p, needs_dataset=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)

    p = sub.add_parser("roundtrip", help="payload -> chain -> payload, end to end")
    _add_common(p)
    p.add_argument("--dataset", default=None, help="JSONL corpus path")
    p.add_argument("--field-kind", default="amount", choices=["amount", "fee"])
    p.add_argument("--model", default=None, help="pre-trained model JSON")
    p.add_argument("--suffix-table", default=None, help="suffix table JSON")
    _add_train_flags(p)
    p.add_argument("--m", type=int, default=None,
                   help="covert bits per element (default: estimate)")
    p.add_argument("--lambda", dest="lam", type=int, default=0)
    p.add_argument("--trials", type=int, default=500,
                   help="trials for m estimation when --m is omitted")
    p.add_argument("--payload", default=None, help="payload file (default: probe bytes)")
    p.add_argument("--chain", default="bitcoin", choices=sorted(chainsim.CHAIN_OUTPUTS))
    p.add_argument("--chain-file", default=None)

    return parser


_HANDLERS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "estimate-m": _cmd_estimate_m,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "eval-capacity": _cmd_eval_capacity,
    "eval-concealment": _cmd_eval_concealment,
    "eval-timing": _cmd_eval_timing,
    "t2c": _cmd_t2c,
    "roundtrip": _cmd_roundtrip,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except FieldStegError as exc:
        stage = getattr(exc, "stage", None)
        tag = f" [stage: {stage}]" if stage else ""
        print(f"error{tag}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

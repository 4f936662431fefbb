"""``clcnet`` command line: mix, train, enhance, evaluate, export-spec.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import PROFILES, RunConfig, help_text
from .data import MixConfig, load_corpus, make_mixture, measured_snr, read_wav, sample_spec
from .data import synthetic_corpus, write_wav
from .errors import ClcError, ConfigError, DataError, NumericError
from .filterbank import DEFAULT_BANK, N_BANDS, Waveform, algorithmic_latency
from .metrics import evaluate as score_items
from .model import Checkpoint, Enhancer, train
from .oracles import ORACLE_MODES, oracle_enhance

log = logging.getLogger("clcnet")

MANIFEST_FIELDS = ("id", "split", "speech_id", "noise_ids", "snr", "level_offsets",
                   "delta_snr_t", "seed", "measured_snr")
POWER_FLOOR_DB = -120.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- config plumbing ---------------------------------------------------------------------

def load_run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in getattr(args, "profile", None) or ():
        cfg.update(PROFILES[name])
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        cfg.set(key.strip(), value)
    return cfg


def load_corpus_from(cfg: RunConfig):
    src = cfg.get("data.corpus")
    if src == "synthetic":
        return synthetic_corpus(seed=cfg.get("data.synth_seed"), n_speech=cfg.get("data.n_speech"),
                                n_noise=cfg.get("data.n_noise"),
                                duration=cfg.get("data.duration_s"),
                                noise_duration=cfg.get("data.noise_duration_s"))
    return load_corpus(src, sample_rate=cfg.get("filterbank.sample_rate"))


def mix_config(cfg: RunConfig, snrs=None) -> MixConfig:
    return MixConfig(tuple(snrs) if snrs else cfg.get("data.snrs"), cfg.get("data.level_offsets"),
                     cfg.get("data.max_noises"), cfg.get("data.delta_snr_t"))


def run_root() -> Path:
    return Path(os.environ.get("CLC_RUN_DIR") or "runs")


def _join(values) -> str:
    return ";".join(repr(float(v)) if not isinstance(v, str) else v for v in values)


# --- commands ------------------------------------------------------------------------------

def cmd_mix(args) -> int:
    cfg = load_run_config(args)
    if args.seed is not None:
        cfg.set("train.seed", args.seed)
    if args.snr:
        cfg.set("data.snrs", tuple(args.snr))
    corpus = load_corpus_from(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.get("train.seed"))
    mcfg = mix_config(cfg)
    split = corpus.split[args.split]
    rows = []
    for i in range(args.count):
        spec = sample_spec(rng, split, mcfg)
        mix = make_mixture(spec, corpus)
        utt = f"mix{i:04d}"
        for kind in ("noisy", "clean", "target"):
            write_wav(out / f"{utt}_{kind}.wav", getattr(mix, kind))
        rows.append({
            "id": utt, "split": args.split, "speech_id": spec.speech_id,
            "noise_ids": ";".join(spec.noise_ids), "snr": repr(spec.snr),
            "level_offsets": _join(spec.level_offsets), "delta_snr_t": repr(spec.delta_snr_t),
            "seed": spec.seed,
            "measured_snr": repr(round(measured_snr(mix.clean.samples, mix.noise.samples), 6) + 0.0),
        })
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        w.writeheader()
        w.writerows(rows)
    cfg.write_echo(out, {"command": "mix", "count": args.count, "split": args.split})
    log.info("wrote %d mixtures to %s", args.count, out)
    return 0


def cmd_train(args) -> int:
    run_dir = run_root() / args.name
    if args.resume:
        ckpt_path = run_dir / "checkpoints" / "last.ckpt"
        if not ckpt_path.exists():
            raise DataError(f"{ckpt_path}: no checkpoint to resume from")
        resume = Checkpoint.load(ckpt_path)
        cfg = RunConfig.load(run_dir / "config.echo")
    else:
        resume = None
        cfg = load_run_config(args)
        if args.offset is not None:
            cfg.set("model.offset", args.offset)
        if args.seed is not None:
            cfg.set("train.seed", args.seed)
        if args.max_steps is not None:
            cfg.set("train.max_steps", args.max_steps)
    tcfg = cfg.train_config()
    corpus = load_corpus_from(cfg)
    cfg.write_echo(run_dir, {"command": "train", "name": args.name})
    log.info("run directory %s", run_dir)
    log.info("algorithmic latency %.3f ms (offset %d, pipeline delay %.3f ms)",
             algorithmic_latency(tcfg.offset), tcfg.offset,
             1000.0 * DEFAULT_BANK.latency_samples(tcfg.pipeline_lookahead) / tcfg.sample_rate)
    result = train(corpus, tcfg, out_dir=run_dir, resume=resume, stop_after=args.stop_after)
    if result.validation:
        log.info("best validation loss %.5f at step %d",
                 result.last.best_val_loss, result.last.best_step)
    return 0


def cmd_enhance(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    w = read_wav(args.input, ckpt.config.sample_rate)
    enh = Enhancer(ckpt.params, ckpt.config)
    log.info("algorithmic latency %.3f ms (%d samples)", enh.latency_ms, enh.delay)
    y = enh.stream(w)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_wav(args.output, y, fmt=args.format)
    RunConfig.from_train_config(ckpt.config).write_echo(Path(args.output).parent,
                           {"command": "enhance", "checkpoint": args.checkpoint,
                            "input": args.input, "output": args.output})
    return 0


def _mixdir_items(mix_dir: Path, sample_rate: int):
    manifest = mix_dir / "manifest.csv"
    try:
        with open(manifest, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"{manifest}: cannot read manifest ({exc})") from exc
    for row in rows:
        clean = read_wav(mix_dir / f"{row['id']}_clean.wav", sample_rate)
        noisy = read_wav(mix_dir / f"{row['id']}_noisy.wav", sample_rate)
        yield row["id"], clean, noisy, float(row["snr"])


def _generated_items(cfg: RunConfig):
    corpus = load_corpus_from(cfg)
    split = corpus.split.test
    if not split.speech or not split.noise:
        raise DataError("test split is empty")
    rng = np.random.default_rng(cfg.get("metrics.eval_seed"))
    for bucket in cfg.get("metrics.buckets"):
        mcfg = mix_config(cfg, snrs=(bucket,))
        for i in range(cfg.get("metrics.per_bucket")):
            mix = make_mixture(sample_spec(rng, split, mcfg), corpus)
            yield f"snr{bucket:+g}_{i:03d}", mix.clean, mix.noisy, bucket


def cmd_evaluate(args) -> int:
    cfg = load_run_config(args)
    if args.seed is not None:
        cfg.set("metrics.eval_seed", args.seed)
    if args.checkpoint:
        ckpt = Checkpoint.load(args.checkpoint)
        enh = Enhancer(ckpt.params, ckpt.config)
        delay = enh.delay
        log.info("algorithmic latency %.3f ms (%d samples)", enh.latency_ms, delay)

        def process(clean, noisy):
            return enh.enhance(noisy)
    else:
        delay = 0

        def process(clean, noisy):
            return oracle_enhance(args.oracle, clean, noisy, order=cfg.get("metrics.oracle_order"),
                                  offset=cfg.get("metrics.oracle_offset"),
                                  window=cfg.get("metrics.oracle_window"),
                                  ridge=cfg.get("metrics.oracle_ridge"),
                                  iam_cap=cfg.get("metrics.iam_cap"))

    rate = cfg.get("filterbank.sample_rate")
    source = _mixdir_items(Path(args.mix_dir), rate) if args.mix_dir else _generated_items(cfg)
    items = [(utt, clean, noisy, process(clean, noisy), snr) for utt, clean, noisy, snr in source]
    if not items:
        raise DataError("nothing to evaluate")
    report = score_items(items, delay=delay, sample_rate=rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "per_utterance.csv")
    report.write_aggregate_csv(out / "per_bucket.csv")
    cfg.write_echo(out, {"command": "evaluate",
                         "source": args.checkpoint or f"oracle:{args.oracle}",
                         "mix_dir": args.mix_dir or ""})
    for bucket in report.buckets():
        log.info("snr %+g dB: si_sdr %.2f dB (noisy %.2f), delta_stoi %.3f", bucket,
                 report.mean("si_sdr", bucket), report.mean("si_sdr_noisy", bucket),
                 report.mean("delta_stoi", bucket))
    return 0


def power_db(w: Waveform, n_bins: int = N_BANDS):
    x = DEFAULT_BANK.analyze(w).data[:, :n_bins]
    p = np.abs(x) ** 2
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p)
    return np.maximum(db, POWER_FLOOR_DB)


def cmd_export_spec(args) -> int:
    w = read_wav(args.input)
    db = power_db(w)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame"] + [f"bin{b}" for b in range(db.shape[1])])
        for k, row in enumerate(db):
            wr.writerow([k] + [repr(round(float(v), 6)) for v in row])
    return 0


# --- entry point ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file (sections filterbank/model/train/"
                                         "data/metrics)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP thread cap; 1 forces the deterministic reference path")
    common.add_argument("--log-level", default="INFO", help="logging level (default INFO)")

    p = _Parser(prog="clcnet", description="Complex linear coding speech enhancement.",
                epilog=help_text(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mix", parents=[common], help="write noisy/clean/target WAV triples")
    m.add_argument("--out", required=True, help="output directory")
    m.add_argument("--count", type=int, default=10, help="mixtures to write (default 10)")
    m.add_argument("--seed", type=int, default=None, help="sampling seed (default train.seed)")
    m.add_argument("--snr", type=float, action="append",
                   help="restrict the SNR set; repeatable (default data.snrs)")
    m.add_argument("--split", choices=("train", "validation", "test"), default="test",
                   help="corpus split to draw from (default test)")
    m.set_defaults(func=cmd_mix)

    t = sub.add_parser("train", parents=[common], help="train a coefficient predictor")
    t.add_argument("--name", required=True, help="run name; files go to $CLC_RUN_DIR/<name> "
                                                 "(default root ./runs)")
    t.add_argument("--offset", type=int, default=None, help="CLC offset l (default model.offset)")
    t.add_argument("--seed", type=int, default=None, help="training seed (default train.seed)")
    t.add_argument("--max-steps", type=int, default=None, help="default train.max_steps")
    t.add_argument("--profile", action="append", choices=sorted(PROFILES),
                   help="apply a named preset before --set overrides")
    t.add_argument("--resume", action="store_true",
                   help="continue from checkpoints/last.ckpt with the run's config.echo")
    t.add_argument("--stop-after", type=int, default=None,
                   help="stop after this many total steps (for interruption tests)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("enhance", parents=[common], help="enhance one WAV file (streaming)")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--format", choices=("float32", "pcm16"), default="float32",
                   help="output sample format (default float32)")
    e.set_defaults(func=cmd_enhance)

    v = sub.add_parser("evaluate", parents=[common], help="SI-SDR and STOI per SNR bucket")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", help="trained model checkpoint")
    src.add_argument("--oracle", choices=ORACLE_MODES, help="oracle baseline instead of a model")
    v.add_argument("--mix-dir", help="directory written by 'mix' (default: generate test "
                                     "mixtures per metrics.buckets)")
    v.add_argument("--seed", type=int, default=None, help="default metrics.eval_seed")
    v.add_argument("--out", required=True, help="output directory for the CSVs")
    v.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("export-spec", parents=[common],
                       help="frames x 48 power spectrogram in dB as CSV")
    x.add_argument("--input", required=True)
    x.add_argument("--output", required=True)
    x.set_defaults(func=cmd_export_spec)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except ClcError as exc:
        print(f"clcnet: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"clcnet: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"clcnet: error: {exc}", file=sys.stderr)
        return NumericError.exit_code


if __name__ == "__main__":
    sys.exit(main())

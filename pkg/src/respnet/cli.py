"""Command-line entry point: ``respnet <command> [options]``.

Commands: generate, train, eval, classify, compare, export.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    DatasetFormatError,
    FeatureSet,
    atomic_write,
    read_csv_signal,
    read_jsonl,
    split_holdout,
    write_csv_signal,
    write_jsonl,
)
from .evaluate import DISPLAY_ARCH, evaluate, predictions_jsonl, run_comparison, write_comparison
from .nn.model import ARCHITECTURES, init_params, normalize_arch, predict_proba
from .rsm import PATTERN_NAMES, RespiratoryPattern, Waveform, generate_dataset, generate_waveform
from .signal import DegenerateSignalError, PreprocessConfig, preprocess
from .train import NonFiniteLossError, TrainState, train, write_train_log

log = logging.getLogger("respnet")

CLI_ARCHS = tuple(a.replace("_", "-") for a in ARCHITECTURES)


class CliError(Exception):
    pass


def _seed_rng(seed: int, stream: int) -> np.random.Generator:
    # fixed stream ids keep generation, splitting and init independent
    return np.random.default_rng([seed, stream])


STREAM_GENERATE, STREAM_INIT, STREAM_SPLIT = 0, 1, 2


def resolve_config(args, overrides: dict | None = None) -> cfgmod.RunConfig:
    ov: dict = dict(overrides or {})
    if getattr(args, "seed", None) is not None:
        ov["seed"] = args.seed
    try:
        return cfgmod.resolve(getattr(args, "config", None), getattr(args, "profile", None), ov)
    except (OSError, ValueError) as exc:
        raise CliError(f"config: {exc}") from exc


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".config.json")


def _load_features(path, cfg: cfgmod.RunConfig, expect_len=None) -> FeatureSet:
    try:
        items = read_jsonl(path)
    except OSError as exc:
        raise CliError(f"cannot read dataset {path}: {exc}") from exc
    except DatasetFormatError as exc:
        raise CliError(str(exc)) from exc
    if not items:
        raise CliError(f"dataset {path} is empty")
    try:
        return FeatureSet.from_waveforms(items, cfg.preprocess, expect_len=expect_len)
    except DatasetFormatError as exc:
        raise CliError(f"{path}: {exc} (pass --resample to interpolate)") from exc
    except (DegenerateSignalError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    gen = {}
    if args.rate_hz is not None:
        gen["rate_hz"] = args.rate_hz
    if args.window_s is not None:
        gen["window_s"] = args.window_s
    cfg = resolve_config(args, {"generate": gen} if gen else None)
    if args.mix:
        counts = dict(zip(RespiratoryPattern, cfg.generate.test_counts))
    elif args.all:
        n = cfg.generate.train_per_class if args.count is None else args.count
        counts = {p: n for p in RespiratoryPattern}
    elif args.count is None:
        raise CliError("--pattern needs --count")
    else:
        try:
            counts = {RespiratoryPattern.parse(args.pattern): args.count}
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if any(n < 0 for n in counts.values()):
        raise CliError(f"--count must be >= 0, got {args.count}")
    data = generate_dataset(counts, cfg.pattern_templates(), _seed_rng(cfg.seed, STREAM_GENERATE))
    out = Path(args.out)
    if not data:
        log.warning("no records requested; writing an empty dataset")
    try:
        write_jsonl(out, data)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}") from exc
    cfgmod.write_sidecar(cfg, _sidecar_path(out), {"command": "generate", "counts": {
        p.display_name: n for p, n in counts.items()}})
    tally = np.bincount([int(d.label) for d in data], minlength=6) if data else np.zeros(6, int)
    for name, n in zip(PATTERN_NAMES, tally):
        print(f"{name:<14}{n:>8}")
    print(f"{'total':<14}{len(data):>8}  -> {out}")
    return 0


# ---------------------------------------------------------------- train


def _train_overrides(args) -> dict:
    train_ov, model_ov, top = {}, {}, {}
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr")):
        if getattr(args, flag, None) is not None:
            train_ov[key] = getattr(args, flag)
    for flag in ("hidden", "attention"):
        if getattr(args, flag, None) is not None:
            model_ov[flag] = getattr(args, flag)
    if getattr(args, "val_frac", None) is not None:
        top["val_frac"] = args.val_frac
    if train_ov:
        top["train"] = train_ov
    if model_ov:
        top["model"] = model_ov
    return top


def _with_train_seed(cfg: cfgmod.RunConfig) -> cfgmod.RunConfig:
    return cfgmod.merge(cfg, {"train": {"seed": cfg.seed}})


def cmd_train(args) -> int:
    cfg = _with_train_seed(resolve_config(args, _train_overrides(args)))
    arch = normalize_arch(args.arch)
    data = _load_features(args.train, cfg)
    if len(set(data.labels.tolist())) < 2:
        raise CliError(f"degenerate dataset {args.train}: fewer than two classes")
    train_set, val_set = split_holdout(data, cfg.val_frac, _seed_rng(cfg.seed, STREAM_SPLIT))
    model = init_params(
        arch, cfg.model.dims, _seed_rng(cfg.seed, STREAM_INIT),
        carry_bias=cfg.model.carry_bias,
        input_shift=cfg.model.input_shift,
        input_scale=cfg.model.input_scale,
    )
    out = Path(args.out_ckpt)
    meta = _ckpt_meta(cfg, arch, args.train)
    state = None
    if args.resume:
        ck = load_checkpoint(args.resume)
        state = TrainState(model=ck.model, optimizer=ck.optimizer, **_state_fields(ck.meta))
        model = ck.model

    def checkpoint(st: TrainState, report):
        save_checkpoint(st.model, st.optimizer, out, {**meta, "state": st.meta()})

    t0 = time.perf_counter()
    try:
        model, report, state = train(
            model, train_set, val_set if len(val_set) else None, cfg.train,
            state=state, on_epoch=checkpoint,
        )
    except NonFiniteLossError as exc:
        raise CliError(str(exc)) from exc
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.csv")
    write_train_log(log_path, report)
    cfgmod.write_sidecar(cfg, _sidecar_path(out), {"command": "train", "arch": arch,
                                                    "train": str(args.train)})
    print(f"trained {DISPLAY_ARCH[arch]} for {state.epoch} epochs in "
          f"{time.perf_counter() - t0:.1f} s; final loss {report.epoch_loss[-1]:.4f}")
    if report.val_accuracy:
        print(f"validation accuracy {report.val_accuracy[-1][1]:.4f}")
    print(f"checkpoint -> {out}\nlog -> {log_path}")
    return 0


def _ckpt_meta(cfg: cfgmod.RunConfig, arch: str, train_path) -> dict:
    return {
        "arch": arch,
        "preprocess": {
            "smooth_span": cfg.preprocess.smooth_span,
            "target_len": cfg.preprocess.target_len,
            "normalize": cfg.preprocess.normalize,
        },
        "window_s": cfg.generate.window_s,
        "rate_hz": cfg.generate.rate_hz,
        "seed_lineage": {
            "seed": cfg.seed,
            "init": [cfg.seed, STREAM_INIT],
            "split": [cfg.seed, STREAM_SPLIT],
            "shuffle": "[seed, epoch]",
        },
        "train_config": asdict(cfg.train),
        "val_frac": cfg.val_frac,
        "train_data": Path(train_path).name,
    }


def _state_fields(meta: dict) -> dict:
    st = meta.get("state", {})
    return {k: st[k] for k in ("epoch", "best_val", "evals_since_best") if k in st}


def _load_ckpt(path):
    try:
        return load_checkpoint(path)
    except OSError as exc:
        raise CliError(f"cannot read checkpoint {path}: {exc}") from exc
    except CheckpointError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _ckpt_preprocess(ck) -> PreprocessConfig:
    return PreprocessConfig(**ck.meta.get("preprocess", {}))


# ---------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    ck = _load_ckpt(args.ckpt)
    pre = _ckpt_preprocess(ck)
    cfg = cfgmod.merge(cfgmod.RunConfig(), {"preprocess": asdict(pre)})
    test = _load_features(args.test, cfg, expect_len=None if args.resample else pre.target_len)
    ev = evaluate(ck.model, test)
    rep = ev.report
    print(f"{DISPLAY_ARCH[ck.model.arch]} on {len(test)} samples")
    for k, v in rep.as_row().items():
        print(f"{k:<10}{100 * v:6.1f}%")
    print(rep.confusion.to_csv(), end="")
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.ckpt).parent
    stem = Path(args.ckpt).name
    with atomic_write(out_dir / f"{stem}.confusion.csv") as fh:
        fh.write(rep.confusion.to_csv())
    with atomic_write(out_dir / f"{stem}.predictions.jsonl") as fh:
        fh.write(predictions_jsonl(ev, test.labels))
    with atomic_write(out_dir / f"{stem}.metrics.json") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


# ---------------------------------------------------------------- classify


def split_recording(samples: np.ndarray, rate_hz: float, window_s: float) -> list[np.ndarray]:
    """Consecutive full windows; a recording shorter than one window is used whole."""
    n = int(round(rate_hz * window_s))
    if samples.size < n:
        return [samples]
    return [samples[i : i + n] for i in range(0, samples.size - n + 1, n)]


def cmd_classify(args) -> int:
    ck = _load_ckpt(args.ckpt)
    pre = _ckpt_preprocess(ck)
    try:
        raw = read_csv_signal(args.input)
    except (OSError, DatasetFormatError) as exc:
        raise CliError(str(exc)) from exc
    window_s = float(ck.meta.get("window_s", 60.0))
    windows = split_recording(raw, args.rate_hz, window_s)
    if len(windows) == 1 and raw.size < int(round(args.rate_hz * window_s)):
        log.warning("recording is %.1f s, shorter than the %.0f s training window",
                    raw.size / args.rate_hz, window_s)
    results = []
    for i, w in enumerate(windows):
        try:
            feats = preprocess(Waveform(w, args.rate_hz), pre)
        except DegenerateSignalError as exc:
            raise CliError(f"window {i}: {exc}") from exc
        probs = predict_proba(ck.model, feats[None])[0]
        k = int(np.argmax(probs))
        results.append({"window": i, "class": k, "pattern": PATTERN_NAMES[k],
                        "probs": [float(p) for p in probs]})
    for r in results:
        if args.json:
            print(json.dumps(r))
        else:
            probs = " ".join(f"{n}={p:.6f}" for n, p in zip(PATTERN_NAMES, r["probs"]))
            print(f"window {r['window']}: {r['pattern']} (class {r['class']})  {probs}")
    return 0


# ---------------------------------------------------------------- compare


def cmd_compare(args) -> int:
    seeds = args.seeds or [args.seed if args.seed is not None else 0]
    base = resolve_config(argparse.Namespace(config=args.config, profile=args.profile, seed=None),
                          _train_overrides(args))
    train_pool = _load_features(args.train, base)
    test = _load_features(args.test, base)
    archs = [normalize_arch(a) for a in (args.arch or CLI_ARCHS)]
    out_root = Path(args.out_dir)
    summary = {}
    for seed in seeds:
        cfg = _with_train_seed(cfgmod.merge(base, {"seed": seed}))
        tr, val = split_holdout(train_pool, cfg.val_frac, _seed_rng(seed, STREAM_SPLIT))
        t0 = time.perf_counter()
        result = run_comparison(
            tr, val if len(val) else None, test, cfg.train, cfg.model.dims, archs,
            init_kwargs={"carry_bias": cfg.model.carry_bias,
                         "input_shift": cfg.model.input_shift,
                         "input_scale": cfg.model.input_scale},
        )
        seconds = time.perf_counter() - t0
        out = out_root / f"seed{seed}" if len(seeds) > 1 else out_root
        meta = {"seed": seed, "seconds": seconds, "train": str(args.train), "test": str(args.test)}
        write_comparison(result, out, meta)
        cfgmod.write_sidecar(cfg, out / "comparison.config.json", {"command": "compare"})
        print(f"seed {seed} ({seconds:.0f} s)")
        print(result.table())
        check = result.ordering_check()
        if check:
            print("ordering BI-AT-GRU >= GRU:", "pass" if check["bi_at_gru_ge_gru"] else "fail")
        summary[seed] = {"ordering": check,
                         "accuracy": {a: r.accuracy for a, r in result.rows.items()}}
    if len(seeds) > 1:
        with atomic_write(out_root / "summary.json") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------- export


def cmd_export(args) -> int:
    """One raw + preprocessed window per pattern as CSV, for plotting."""
    cfg = resolve_config(args)
    templates = cfg.pattern_templates()
    rng = _seed_rng(cfg.seed, STREAM_GENERATE)
    out = Path(args.out_dir)
    for p in RespiratoryPattern:
        w = generate_waveform(templates[p], rng)
        slug = p.name.lower()
        write_csv_signal(out / f"{slug}_raw.csv", w.waveform.samples)
        write_csv_signal(out / f"{slug}_features.csv", preprocess(w.waveform, cfg.preprocess))
        print(f"{p.display_name:<14} -> {out / slug}_{{raw,features}}.csv")
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, seed=True) -> None:
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--profile", choices=sorted(cfgmod.PROFILES), help="settings profile (default desk)")
    if seed:
        p.add_argument("--seed", type=int, help="master seed")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--attention", type=int)
    p.add_argument("--val-frac", dest="val_frac", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="respnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a labeled dataset (JSON lines)")
    which = g.add_mutually_exclusive_group(required=True)
    which.add_argument("--pattern", help="one pattern, e.g. tachypnea, cheyne-stokes")
    which.add_argument("--all", action="store_true", help="all six patterns")
    which.add_argument("--mix", choices=["test"],
                       help="the configured per-class test counts (605 windows by default)")
    g.add_argument("--count", type=int,
                   help="windows per pattern (with --all defaults to the profile's train size)")
    g.add_argument("--out", required=True)
    g.add_argument("--rate-hz", dest="rate_hz", type=float)
    g.add_argument("--window-s", dest="window_s", type=float)
    _add_common(g)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one architecture")
    t.add_argument("--arch", required=True, choices=CLI_ARCHS)
    t.add_argument("--train", required=True, help="dataset JSON lines")
    t.add_argument("--out-ckpt", dest="out_ckpt", required=True)
    t.add_argument("--log", help="training log CSV (default <ckpt>.log.csv)")
    t.add_argument("--resume", help="continue from this checkpoint")
    _add_train_flags(t)
    _add_common(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--out-dir", dest="out_dir")
    e.add_argument("--resample", action="store_true",
                   help="interpolate records whose length differs from the model's T")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("classify", help="classify a raw recording (CSV, one value per line)")
    c.add_argument("--ckpt", required=True)
    c.add_argument("--input", required=True)
    c.add_argument("--rate-hz", dest="rate_hz", type=float, default=10.0)
    c.add_argument("--json", action="store_true", help="one JSON object per window")
    c.set_defaults(func=cmd_classify)

    m = sub.add_parser("compare", help="train and score all four architectures")
    m.add_argument("--train", required=True)
    m.add_argument("--test", required=True)
    m.add_argument("--out-dir", dest="out_dir", default="comparison")
    m.add_argument("--seeds", type=int, nargs="+", help="run once per seed")
    m.add_argument("--arch", nargs="+", choices=CLI_ARCHS)
    _add_train_flags(m)
    _add_common(m)
    m.set_defaults(func=cmd_compare)

    x = sub.add_parser("export", help="write one example window per pattern as CSV")
    x.add_argument("--out-dir", dest="out_dir", required=True)
    _add_common(x)
    x.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Train the four recurrent classifiers on simulated data and tabulate them.

Defaults to a quick run (100 windows per class, 6 epochs, under 2 minutes
on one core). Pass ``--desk`` for the desk profile (500 per class, 15 epochs).

    python demos/04_compare_models.py [--desk] [--seed N]
"""
import argparse
import logging
import time

from respnet import cli
from respnet import config as cfgmod
from respnet.data import FeatureSet, split_holdout
from respnet.evaluate import run_comparison
from respnet.rsm import RespiratoryPattern, generate_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = cfgmod.profile_config("desk")
    if not args.desk:
        cfg = cfgmod.merge(cfg, {"generate": {"train_per_class": 100}, "train": {"epochs": 6}})
    cfg = cli._with_train_seed(cfgmod.merge(cfg, {"seed": args.seed}))
    templates = cfg.pattern_templates()

    counts = [cfg.generate.train_per_class] * len(RespiratoryPattern)
    pool = FeatureSet.from_waveforms(
        generate_dataset(counts, templates, cli._seed_rng(args.seed, cli.STREAM_GENERATE)))
    test = FeatureSet.from_waveforms(
        generate_dataset(list(cfg.generate.test_counts), templates,
                         cli._seed_rng(args.seed + 1000, cli.STREAM_GENERATE)))
    train, val = split_holdout(pool, cfg.val_frac, cli._seed_rng(args.seed, cli.STREAM_SPLIT))
    print(f"train {len(train)}  validation {len(val)}  test {len(test)}")

    t0 = time.perf_counter()
    result = run_comparison(
        train, val, test, cfg.train, cfg.model.dims,
        init_kwargs={"carry_bias": cfg.model.carry_bias, "input_shift": cfg.model.input_shift,
                     "input_scale": cfg.model.input_scale},
    )
    print(f"\n{time.perf_counter() - t0:.0f} s\n")
    print(result.table())
    print("\nBI-AT-GRU confusion (rows true, columns predicted):")
    print(result.rows["bi_at_gru"].confusion.to_csv())


if __name__ == "__main__":
    main()

"""Command-line pipeline driver.

Subcommands: synth, stats, train, predict, postprocess, evaluate, augment.
Exit codes: 0 success, 1 usage error, 2 data error. All randomness flows from
explicit --seed flags; given identical flags and inputs every subcommand
rewrites identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import imgio
from .augment import AugmentConfig, Sample, random_augment
from .metrics import evaluate_dataset
from .postprocess import PostprocessConfig, postprocess_pipeline
from .rasters import Mask, RgbImage, ScoreMap
from .stats import ChannelStats, dataset_stats, mask_proportion, normalize_image, spatial_prior
from .synth import SynthConfig, synth_dataset
from .training import TrainConfig, class_weights_from_proportion, predict_scores, train
from .unet import UNetConfig


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _read(path: Path) -> bytes:
    return Path(path).read_bytes()


def _load_image(path: Path) -> RgbImage:
    return imgio.decode_ppm(_read(path))


def _load_mask(path: Path) -> Mask:
    return imgio.mask_from_gray(imgio.decode_pgm(_read(path)))


def _listing(directory: Path, pattern: str) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    files = sorted(directory.glob(pattern))
    if not files:
        raise FileNotFoundError(f"no {pattern} files in {directory}")
    return files


def _sibling(path: Path, old_prefix: str, new_prefix: str, suffix: str) -> str:
    stem = path.stem
    if stem.startswith(old_prefix):
        stem = new_prefix + stem[len(old_prefix) :]
    return stem + suffix


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    cfg = SynthConfig(n_images=args.n, size=args.size, seed=args.seed, noise_std=args.noise_std)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images, masks = synth_dataset(cfg)
    for i, (img, mask) in enumerate(zip(images, masks)):
        (out / f"img_{i:04d}.ppm").write_bytes(imgio.encode_ppm(img))
        (out / f"mask_{i:04d}.pgm").write_bytes(imgio.encode_pgm(mask))
    print(f"wrote {cfg.n_images} image/mask pairs to {out}")
    return 0


def _cmd_stats(args) -> int:
    images = [_load_image(p) for p in _listing(Path(args.img_dir), "*.ppm")]
    mask_files = _listing(Path(args.mask_dir), "*.pgm")
    masks = [_load_mask(p) for p in mask_files]
    stats = dataset_stats(images)
    proportion = float(np.mean([mask_proportion(m) for m in masks]))
    print(
        json.dumps(
            {
                "mean": list(stats.mean),
                "std": list(stats.std),
                "mole_proportion": proportion,
                "n_images": len(images),
            }
        )
    )
    if args.prior_out:
        if args.prior_size:
            pw, ph = args.prior_size
        else:
            pw, ph = masks[0].width, masks[0].height
        prior = spatial_prior(masks, pw, ph)
        Path(args.prior_out).write_bytes(imgio.encode_smf(prior))
    return 0


def _load_pairs(data_dir: Path) -> tuple[list[RgbImage], list[Mask]]:
    images, masks = [], []
    for img_path in _listing(data_dir, "*.ppm"):
        mask_path = img_path.with_name(_sibling(img_path, "img_", "mask_", ".pgm"))
        if not mask_path.exists():
            raise FileNotFoundError(f"no mask for {img_path.name}: expected {mask_path.name}")
        images.append(_load_image(img_path))
        masks.append(_load_mask(mask_path))
    return images, masks


def _cmd_train(args) -> int:
    images, masks = _load_pairs(Path(args.data))
    stats = dataset_stats(images)
    if args.center_only:
        stats = ChannelStats(stats.mean, (1.0, 1.0, 1.0))
    proportion = float(np.mean([mask_proportion(m) for m in masks]))
    if not (0.0 < proportion < 1.0):
        raise ValueError(f"dataset is single-class (foreground proportion {proportion})")
    w_bg, w_fg = class_weights_from_proportion(proportion)

    samples = [Sample(normalize_image(img, stats), m) for img, m in zip(images, masks)]
    tcfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        class_weights=(w_bg, w_fg),
        seed=args.seed,
    )
    ucfg = UNetConfig(depth=args.depth, base_channels=args.base)

    def progress(rec):
        print(
            f"epoch {rec.epoch}/{tcfg.epochs} loss={rec.loss:.6g} "
            f"val_jaccard={rec.val_jaccard:.6g} lr={rec.lr:.6g}",
            file=sys.stderr,
        )

    checkpoint, history = train(samples, args.val_frac, tcfg, ucfg, stats, on_epoch=progress)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(imgio.encode_checkpoint(checkpoint))
    history_path = Path(args.history) if args.history else out.with_suffix(out.suffix + ".history.csv")
    history_path.write_text(history.to_csv())
    final = history.records[-1] if history.records else None
    print(
        json.dumps(
            {
                "checkpoint": str(out),
                "history": str(history_path),
                "epochs": tcfg.epochs,
                "final_val_jaccard": final.val_jaccard if final else None,
                "final_loss": final.loss if final else None,
            }
        )
    )
    return 0


def _cmd_predict(args) -> int:
    checkpoint = imgio.decode_checkpoint(_read(Path(args.checkpoint)))
    in_path = Path(args.input)
    out_path = Path(args.out_scores)
    if in_path.is_dir():
        files = _listing(in_path, "*.ppm")
        out_path.mkdir(parents=True, exist_ok=True)
        targets = [out_path / _sibling(p, "img_", "scores_", ".smf") for p in files]
    else:
        files = [in_path]
        out_path.parent.mkdir(parents=True, exist_ok=True)
        targets = [out_path]
    images = [_load_image(p) for p in files]
    batch = np.stack([normalize_image(img, checkpoint.normalization) for img in images])
    scores = predict_scores(checkpoint.params, checkpoint.config, batch, args.batch)
    for row, target in enumerate(targets):
        smap = ScoreMap(scores[row, 0], scores[row, 1])
        target.write_bytes(imgio.encode_smf(smap))
    print(f"wrote {len(targets)} score map(s)")
    return 0


def _cmd_postprocess(args) -> int:
    cfg = PostprocessConfig(sigma=args.sigma, bins=args.bins, mode=args.mode)
    in_path = Path(args.scores)
    out_path = Path(args.out_mask)
    if in_path.is_dir():
        files = _listing(in_path, "*.smf")
        out_path.mkdir(parents=True, exist_ok=True)
        targets = [out_path / _sibling(p, "scores_", "mask_", ".pgm") for p in files]
    else:
        files = [in_path]
        out_path.parent.mkdir(parents=True, exist_ok=True)
        targets = [out_path]
    for src, target in zip(files, targets):
        smap = imgio.scoremap_from_smf(_read(src))
        mask, otsu = postprocess_pipeline(smap, cfg)
        target.write_bytes(imgio.encode_pgm(mask))
        print(
            json.dumps(
                {
                    "file": src.name,
                    "mode": cfg.mode,
                    "threshold": otsu.threshold,
                    "between_class_variance": otsu.between_class_variance,
                    "degenerate": otsu.degenerate,
                }
            )
        )
    return 0


def _cmd_evaluate(args) -> int:
    pred_dir = Path(args.pred)
    truth_dir = Path(args.truth)
    pairs = []
    for pred_path in _listing(pred_dir, "*.pgm"):
        truth_path = truth_dir / pred_path.name
        if not truth_path.exists():
            raise FileNotFoundError(f"no ground truth for {pred_path.name}")
        pairs.append((_load_mask(pred_path), _load_mask(truth_path), pred_path.stem))
    report = evaluate_dataset(pairs, cutoff=args.cutoff)
    csv_text = report.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv_text)
    print(csv_text, end="")
    print(json.dumps(report.summary()))
    return 0


def _cmd_augment(args) -> int:
    image = _load_image(Path(args.image))
    mask = _load_mask(Path(args.mask))
    if image.data.shape[1:] != mask.data.shape:
        raise ValueError("image and mask dimensions differ")
    cfg = AugmentConfig(p_flip_h=args.p_flip_h, p_flip_v=args.p_flip_v, rot90=args.rot90)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    sample = Sample(image.data, mask)
    for i in range(args.n):
        augmented = random_augment(sample, rng, cfg)
        (out / f"aug_{i:04d}.ppm").write_bytes(imgio.encode_ppm(RgbImage(augmented.image)))
        (out / f"aug_{i:04d}.pgm").write_bytes(imgio.encode_pgm(augmented.mask))
    print(f"wrote {args.n} augmented pair(s) to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="lesionseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic ellipse dataset")
    p.add_argument("--n", type=int, required=True, help="number of image/mask pairs")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="dataset statistics and spatial prior")
    p.add_argument("img_dir")
    p.add_argument("mask_dir")
    p.add_argument("--prior-out", help="write the prior map as 1-plane SMF")
    p.add_argument("--prior-size", type=int, nargs=2, metavar=("W", "H"))
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("train", help="train the net on an image/mask directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--base", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--center-only", action="store_true", help="re-center without dividing by std")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write raw score maps for images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="input", required=True, help="PPM file or directory")
    p.add_argument("--out-scores", required=True, help="SMF file or directory")
    p.add_argument("--batch", type=int, default=8)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("postprocess", help="turn score maps into masks")
    p.add_argument("--scores", required=True, help="SMF file or directory")
    p.add_argument("--out-mask", required=True, help="PGM file or directory")
    p.add_argument("--mode", choices=("naive", "otsu"), default="otsu")
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--bins", type=int, default=256)
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--cutoff", type=float, default=0.65)
    p.add_argument("--csv", help="also write the per-image CSV here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("augment", help="write augmented copies of one image/mask pair")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-flip-h", type=float, default=0.5)
    p.add_argument("--p-flip-v", type=float, default=0.5)
    p.add_argument("--rot90", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=_cmd_augment)

    return parser


def dispatch(argv=None) -> int:
    """Run one subcommand; returns the process exit code instead of exiting."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help exits directly
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    try:
        return args.func(args)
    except (imgio.FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

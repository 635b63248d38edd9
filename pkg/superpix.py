#!/usr/bin/env python3
"""
Superpixel Segmenter - Command Line Interface

Usage:
    python superpix.py segment path/to/image.png -n 100 -o out/
    python superpix.py eval path/to/dataset -o results.csv --jobs 4
    python superpix.py sweep path/to/dataset -o sweep.csv --counts 25,50,100

Each image is segmented by optimising a small convolutional network on that
image alone; no training data or pretrained weights are involved.

Exit codes: 0 success, 1 input/output or configuration failure,
2 optimisation aborted on a non-finite loss.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Tuple

# Make the src package importable when run from any directory
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.config import LossWeights, NetworkConfig, TrainConfig, get_config  # noqa: E402
from src.exceptions import ConfigurationError, NonFiniteLossError, SuperpixError  # noqa: E402
from src.logger import set_console_level  # noqa: E402
from src.metrics import DEFAULT_TOLERANCE  # noqa: E402
from src.processor import DEFAULT_SWEEP_COUNTS, SegmentationProcessor  # noqa: E402

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NON_FINITE = 2


def parse_counts(text: str) -> List[int]:
    """Parse a comma-separated list of superpixel counts"""
    try:
        counts = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"counts must be comma-separated integers, got '{text}'")
    if not counts:
        raise argparse.ArgumentTypeError("at least one count is required")
    return counts


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    weights = LossWeights()
    net = NetworkConfig()
    train = TrainConfig()

    parser.add_argument('-n', '--superpixels', type=int, default=net.n_superpixels,
                        help=f'Maximum number of superpixels N (default: {net.n_superpixels})')
    parser.add_argument('--iterations', type=int, default=train.iterations,
                        help=f'Adam iterations per image (default: {train.iterations})')
    parser.add_argument('--lr', type=float, default=train.learning_rate,
                        help=f'Learning rate (default: {train.learning_rate})')
    parser.add_argument('--lambda', dest='lambda_', type=float, default=weights.lambda_,
                        help=f'Weight of the balanced-area term inside the clustering loss (default: {weights.lambda_})')
    parser.add_argument('--alpha', type=float, default=weights.alpha,
                        help=f'Smoothness weight (default: {weights.alpha})')
    parser.add_argument('--beta', type=float, default=weights.beta,
                        help=f'Reconstruction weight (default: {weights.beta})')
    parser.add_argument('--eta', type=float, default=weights.eta,
                        help=f'Edge-distribution weight (default: {weights.eta})')
    parser.add_argument('--sigma', type=float, default=weights.sigma,
                        help=f'Color bandwidth of the smoothness term (default: {weights.sigma})')
    parser.add_argument('--seed', type=int, default=0,
                        help='Seed for weight initialisation and training (default: 0)')
    parser.add_argument('--enforce-connectivity', action='store_true',
                        help='Merge small disconnected fragments so every superpixel is 4-connected')
    parser.add_argument('--no-soft-reconstruction', action='store_true',
                        help='Drop the soft superpixelated image from the reconstruction and edge terms')
    parser.add_argument('--no-laplacian-features', action='store_true',
                        help='Skip the Laplacian feature concatenation before ASPP')
    parser.add_argument('--last-block-only', action='store_true',
                        help='Feed only the last feature block into ASPP')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Enable verbose output')


def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('dataset_dir',
                        help='Directory with images and <image_id>_gt<k>.png/.csv annotations')
    parser.add_argument('--tolerance', type=int, default=DEFAULT_TOLERANCE,
                        help=f'Boundary recall tolerance r in pixels (default: {DEFAULT_TOLERANCE})')
    parser.add_argument('--jobs', type=int, default=0,
                        help='Images processed in parallel (default: all cores; SUPERPIX_THREADS overrides)')
    parser.add_argument('--oracle', action='store_true',
                        help='Score the first annotation as the prediction instead of training')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Superpixel Segmenter - unsupervised per-image superpixels with ASA/BR evaluation',
        epilog='Example: python superpix.py segment image.png --superpixels 100 --seed 7 -o out/'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    segment_parser = subparsers.add_parser('segment', help='Segment a single image')
    segment_parser.add_argument('image_path', help='PNG or JPEG image')
    segment_parser.add_argument('-o', '--out', default=None,
                                help='Output directory (default: SUPERPIX_OUTPUT_DIR)')
    segment_parser.add_argument('--save-superpixelated', action='store_true',
                                help='Also write the mean-color superpixelated image')
    segment_parser.add_argument('--save-weights', action='store_true',
                                help='Also write the trained network weights')
    _add_common_arguments(segment_parser)

    eval_parser = subparsers.add_parser('eval', help='Segment and score every image of a dataset')
    _add_dataset_arguments(eval_parser)
    eval_parser.add_argument('-o', '--out', default=None,
                             help='Output CSV (default: SUPERPIX_OUTPUT_DIR/eval.csv)')
    _add_common_arguments(eval_parser)

    sweep_parser = subparsers.add_parser('sweep', help='Evaluate a dataset over several superpixel counts')
    _add_dataset_arguments(sweep_parser)
    sweep_parser.add_argument('-o', '--out', default=None,
                              help='Output CSV (default: SUPERPIX_OUTPUT_DIR/sweep.csv)')
    sweep_parser.add_argument('--counts', type=parse_counts, default=list(DEFAULT_SWEEP_COUNTS),
                              help='Comma-separated superpixel counts (default: 25,50,100,200,400)')
    _add_common_arguments(sweep_parser)

    return parser


def build_configs(args: argparse.Namespace) -> Tuple[NetworkConfig, TrainConfig]:
    """Turn parsed flags into validated configs; raises ConfigurationError"""
    weights = LossWeights(
        lambda_=args.lambda_,
        alpha=args.alpha,
        beta=args.beta,
        eta=args.eta,
        sigma=args.sigma,
        soft_reconstruction=not args.no_soft_reconstruction
    )
    net_cfg = NetworkConfig(
        n_superpixels=args.superpixels,
        seed=args.seed,
        concat_all_blocks=not args.last_block_only,
        laplacian_features=not args.no_laplacian_features
    )
    train_cfg = TrainConfig(
        iterations=args.iterations,
        learning_rate=args.lr,
        loss_weights=weights,
        seed=args.seed,
        enforce_connectivity=args.enforce_connectivity
    )
    return net_cfg, train_cfg


def cmd_segment(args: argparse.Namespace) -> int:
    net_cfg, train_cfg = build_configs(args)
    out_dir = Path(args.out or get_config().output_dir)
    processor = SegmentationProcessor(net_cfg, train_cfg)
    manifest = processor.run_command('segment', processor.segment_image, args.image_path, out_dir,
                                     save_superpixelated=args.save_superpixelated,
                                     save_model_weights=args.save_weights)
    print(f"[SUCCESS] Segmented {args.image_path} into "
          f"{manifest.settings['n_superpixels_used']} superpixels")
    for output in manifest.outputs:
        print(f"  - {output}")
    return EXIT_OK


def _dataset_processor(args: argparse.Namespace) -> SegmentationProcessor:
    if args.tolerance < 0:
        raise ConfigurationError(f"--tolerance must be >= 0, got {args.tolerance}", setting_name='tolerance')
    net_cfg, train_cfg = build_configs(args)
    return SegmentationProcessor(net_cfg, train_cfg, jobs=args.jobs,
                                 tolerance=args.tolerance, oracle=args.oracle)


def _print_skipped(skipped: dict) -> None:
    if skipped:
        print(f"  - {len(skipped)} images skipped:")
        for image_id, reason in sorted(skipped.items()):
            print(f"      {image_id}: {reason}")


def cmd_eval(args: argparse.Namespace) -> int:
    processor = _dataset_processor(args)
    out_csv = Path(args.out or Path(get_config().output_dir) / 'eval.csv')
    manifest = processor.run_command('eval', processor.evaluate_dataset, args.dataset_dir, out_csv)
    reports = manifest.metric_reports()
    mean_asa = sum(r.asa for r in reports) / len(reports)
    mean_br = sum(r.br for r in reports) / len(reports)
    print(f"[SUCCESS] Evaluated {len(reports)} images: mean ASA={mean_asa:.4f} mean BR={mean_br:.4f}")
    print(f"  - {out_csv}")
    _print_skipped(manifest.skipped)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    processor = _dataset_processor(args)
    out_csv = Path(args.out or Path(get_config().output_dir) / 'sweep.csv')
    manifest = processor.run_command('sweep', processor.sweep, args.dataset_dir, out_csv, args.counts)
    print(f"[SUCCESS] Swept {len(args.counts)} superpixel counts over {len(manifest.inputs)} input files")
    print(f"  - {out_csv}")
    _print_skipped(manifest.skipped)
    return EXIT_OK


COMMANDS = {
    'segment': cmd_segment,
    'eval': cmd_eval,
    'sweep': cmd_sweep,
}


def main(argv: List[str] = None) -> int:
    """Main command line interface"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        set_console_level('DEBUG')
        print("=" * 70)
        print("SUPERPIXEL SEGMENTER")
        print("=" * 70)
        print(f"Command: {args.command}")
        print(f"Superpixels: {args.superpixels}")
        print(f"Iterations: {args.iterations}")
        print(f"Seed: {args.seed}")
        print()

    try:
        return COMMANDS[args.command](args)

    except NonFiniteLossError as e:
        print(f"ERROR: {e} (iteration {e.iteration})")
        if e.remediation:
            print(f"  {e.remediation}")
        return EXIT_NON_FINITE

    except SuperpixError as e:
        print(f"ERROR: {e}")
        if e.remediation:
            print(f"  {e.remediation}")
        return EXIT_FAILURE

    except OSError as e:
        print(f"ERROR: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

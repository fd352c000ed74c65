#!/usr/bin/env python3
"""
Command-line front end for the PQ sparse pipeline.

Each stage writes files the next stage can read:
    generate -> dataset/ (signals.csv, manifest.json)
    encode   -> encoded/<dictionary>_<mode>/ (coefficients, summary, features)
    run      -> result.json, CSV tables, results.xlsx
    sweep    -> sweep.csv, one result.json per SNR
    report   -> tables and workbook rebuilt from a saved result.json
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from rich.panel import Panel
from rich.table import Table

from .classification.features import extract_feature_matrix, feature_names, write_features
from .config import PROFILES, PipelineConfig, load_config
from .evaluation.experiment import DictionaryStore, parse_snr, run_experiment, snr_sweep
from .evaluation.reports import (
    load_result,
    print_experiment_summary,
    print_sweep_summary,
    write_experiment_report,
    write_sweep_report,
)
from .exceptions import ConfigurationError, PQSparseError
from .logging_setup import console, setup_logging
from .representation.atoms import PRESETS, load_or_build
from .representation.encoding import SPARSE_MODES, encode_dataset, write_encoded
from .signals.dataset import Dataset, add_noise_to_dataset, generate_dataset, read_dataset, snr_tag, write_dataset

logger = logging.getLogger(__name__)


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON config file overlaid on the profile')
    common.add_argument('--profile', choices=sorted(PROFILES), default='full',
                        help='Base settings (default: full)')
    common.add_argument('--seed', type=int, help='Master seed (overrides experiment.seed)')
    common.add_argument('--jobs', type=int, default=1, help='Worker processes for encoding (default: 1)')
    common.add_argument('--out', help='Output directory (overrides io.out_dir / PQ_SPARSE_OUT_DIR)')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    return common


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog='pq-sparse',
        description='Synthesize PQ disturbances, encode them over time-frequency dictionaries and classify them',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  # Generate the 1330-signal dataset
  pq-sparse generate --out results

  # Encode it over the GWST dictionary with Group Lasso, 4 workers
  pq-sparse encode --dataset results/dataset --dictionary GWST --mode group_lasso --jobs 4

  # Small end-to-end run for a quick check
  pq-sparse run --profile desk --seed 7 --out desk_results

  # Noise sweep
  pq-sparse sweep --profile desk --snr 20 30 40 50 clean

  # Rebuild tables from a saved result
  pq-sparse report --result desk_results/result.json --out desk_tables

Environment Setup:
  Paths may come from a .env file in the project root:
  PQ_SPARSE_OUT_DIR=results
  PQ_SPARSE_DATASET=results/dataset
  PQ_SPARSE_CACHE_DIR=.cache/dictionaries
        '''
    )
    commands = parser.add_subparsers(dest='command', required=True)

    generate = commands.add_parser('generate', parents=[common], help='Generate the labeled dataset')
    generate.add_argument('--snr', help='Also corrupt the dataset with white noise at this SNR in dB')

    encode = commands.add_parser('encode', parents=[common], help='Encode a dataset over one dictionary')
    encode.add_argument('--dataset', help='Dataset directory or manifest (default: io.dataset, else generate)')
    encode.add_argument('--dictionary', type=str.upper, choices=sorted(PRESETS), default='GWST',
                        help='Dictionary preset (default: GWST)')
    encode.add_argument('--mode', choices=SPARSE_MODES, default='group_lasso',
                        help='Sparse mode (default: group_lasso)')

    run = commands.add_parser('run', parents=[common], help='Run the repeated train/test experiment')
    run.add_argument('--dataset', help='Dataset directory or manifest (default: io.dataset, else generate)')

    sweep = commands.add_parser('sweep', parents=[common], help='Repeat the experiment over noise levels')
    sweep.add_argument('--dataset', help='Dataset directory or manifest (default: io.dataset, else generate)')
    sweep.add_argument('--snr', nargs='+', help="SNR values in dB; 'clean' means no noise "
                                                "(default: experiment.snr_db)")

    report = commands.add_parser('report', parents=[common], help='Rebuild tables from a saved result')
    report.add_argument('--result', required=True, help='result.json or the directory holding it')

    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error(f"--jobs must be >= 1, got {args.jobs}")
    return args


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.profile, args.config)
    return config.with_overrides(seed=args.seed, out_dir=args.out, dataset=getattr(args, 'dataset', None))


def _load_or_generate(config: PipelineConfig) -> Dataset:
    if config.io.dataset:
        return read_dataset(config.io.dataset)
    return generate_dataset(config.dataset_config(), config.seed)


# ===== COMMANDS =====

def _stamp(result, config: PipelineConfig):
    """Embed the resolved pipeline document (paths excluded) and its hash"""
    document = config.to_dict()
    del document['io']
    result.config = document
    result.config_hash = config.config_hash()


def cmd_generate(config: PipelineConfig, snr: Optional[str] = None) -> Path:
    dataset = generate_dataset(config.dataset_config(), config.seed)
    out_dir = Path(config.io.out_dir) / "dataset"
    if snr is not None:
        level = parse_snr(snr)
        dataset = add_noise_to_dataset(dataset, level, config.seed)
        out_dir = Path(config.io.out_dir) / f"dataset_snr_{snr_tag(level)}"
    manifest = write_dataset(dataset, out_dir, config_hash=config.config_hash())

    table = Table(title="Generated Dataset", show_header=True, header_style="bold magenta")
    table.add_column("Class", style="cyan")
    table.add_column("Signals", style="white", justify="right")
    for code, count in dataset.class_counts().items():
        table.add_row(code, str(count))
    console.print(table)
    return manifest


def cmd_encode(config: PipelineConfig, dictionary_name: str, sparse_mode: str, jobs: int = 1) -> Path:
    dataset = _load_or_generate(config)
    if len(dataset) == 0:
        raise PQSparseError("dataset has no signals to encode")
    dictionary_config = replace(config.dictionaries, kinds=PRESETS[dictionary_name])
    dictionary = load_or_build(dictionary_config, dataset.grid, dataset.fundamental_hz, config.io.cache_dir)
    encoded = encode_dataset(dataset, dictionary, sparse_mode, config.solver, jobs=jobs,
                             dictionary_name=dictionary_name, show_progress=True)

    out_dir = Path(config.io.out_dir) / "encoded" / f"{dictionary_name}_{sparse_mode}"
    header = write_encoded(encoded, out_dir, config_hash=config.config_hash())
    per_group = config.features.per_group
    features = extract_feature_matrix(encoded.coefficients, per_group, [g.columns for g in dictionary.groups])
    write_features(features, encoded.labels, out_dir / "features.csv",
                   names=feature_names(per_group, encoded.group_names))

    flagged = int(encoded.flagged.sum()) if sparse_mode != "none" else 0
    console.print(f"Encoded {len(encoded)} signals: max RMSE {encoded.rmse.max():.3e}, "
                  f"mean sparsity {100 * encoded.overall_sparsity.mean():.2f}%", style="green")
    if flagged:
        console.print(f"{flagged} signals above the RMSE target", style="yellow")
    return header


def cmd_run(config: PipelineConfig, jobs: int = 1) -> Path:
    dataset = _load_or_generate(config)
    result = run_experiment(config.experiment_config(), dataset, jobs=jobs, cache_dir=config.io.cache_dir,
                            show_progress=True)
    _stamp(result, config)
    written = write_experiment_report(result, config.io.out_dir)
    print_experiment_summary(result)
    return written['result']


def cmd_sweep(config: PipelineConfig, snr_values: Optional[List[str]] = None, jobs: int = 1) -> Path:
    levels = [parse_snr(s) for s in snr_values] if snr_values else list(config.experiment.snr_db)
    if not levels:
        raise ConfigurationError("no SNR values: pass --snr or set experiment.snr_db")
    experiment = config.experiment_config()
    dataset = _load_or_generate(config)
    store = DictionaryStore(experiment.dictionary, experiment.dataset, config.io.cache_dir)
    sweep = snr_sweep(experiment, levels, dataset, jobs=jobs, store=store, show_progress=True)
    for result in sweep.results.values():
        _stamp(result, config)
    written = write_sweep_report(sweep, config.io.out_dir)
    print_sweep_summary(sweep)
    return written['sweep']


def cmd_report(result_path: str, out_dir: str) -> Path:
    result = load_result(result_path)
    write_experiment_report(result, out_dir)
    print_experiment_summary(result)
    return Path(out_dir)


def main(argv: Optional[List[str]] = None) -> int:
    """Main function for command line interface"""
    args = parse_arguments(argv)

    try:
        config = _resolve_config(args)
    except PQSparseError as e:
        console.print(f"[bold red]Configuration error: {e}[/bold red]")
        sys.exit(1)

    setup_logging(config.io.out_dir, args.verbose, name=f"pq_sparse_{args.command}")
    console.print(Panel.fit(f"PQ Sparse - {args.command}", style="bold blue"))
    logger.info(f"Profile {args.profile}, seed {config.seed}, config hash {config.config_hash()[:16]}")

    try:
        if args.command == 'generate':
            output = cmd_generate(config, args.snr)
        elif args.command == 'encode':
            output = cmd_encode(config, args.dictionary, args.mode, args.jobs)
        elif args.command == 'run':
            output = cmd_run(config, args.jobs)
        elif args.command == 'sweep':
            output = cmd_sweep(config, args.snr, args.jobs)
        else:
            output = cmd_report(args.result, config.io.out_dir)
    except PQSparseError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[bold red]Error: {e}[/bold red]")
        sys.exit(1)

    console.print(f"\n✅ Done: {output}", style="bold green")
    return 0


def _subcommand(name: str) -> int:
    return main([name, *sys.argv[1:]])


def generate_main() -> int:
    return _subcommand('generate')


def encode_main() -> int:
    return _subcommand('encode')


def run_main() -> int:
    return _subcommand('run')


def sweep_main() -> int:
    return _subcommand('sweep')


def report_main() -> int:
    return _subcommand('report')


if __name__ == "__main__":
    sys.exit(main())

"""
Result tables: pandas frames, CSV files, an Excel workbook and rich console tables.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Font
from rich.table import Table

from ..exceptions import DatasetError
from ..io_utils import atomic_write_json, atomic_write_text, load_json
from ..logging_setup import console
from ..signals.disturbances import DisturbanceClass
from .experiment import ExperimentResult, SweepResult

logger = logging.getLogger(__name__)

RESULT_FILE = "result.json"
WORKBOOK_FILE = "results.xlsx"


def format_mean_std(mean: float, std: float) -> str:
    return f"{100 * mean:.2f} ± {100 * std:.2f}"


# =============================================================================
# FRAMES
# =============================================================================

def accuracy_frame(result: ExperimentResult) -> pd.DataFrame:
    """One row per (dictionary, sparse mode, classifier) with mean and std accuracy"""
    return pd.DataFrame([{
        'dictionary': c.dictionary,
        'sparse_mode': c.sparse_mode,
        'classifier': c.classifier,
        'mean_accuracy': c.mean,
        'std_accuracy': c.std,
        'repetitions': len(c.accuracies),
    } for c in result.cells])


def accuracy_table(result: ExperimentResult) -> pd.DataFrame:
    """Classifiers as rows, (sparse mode, dictionary) as columns, cells 'μ ± σ' in percent"""
    frame = accuracy_frame(result)
    frame['cell'] = [format_mean_std(m, s) for m, s in zip(frame['mean_accuracy'], frame['std_accuracy'])]
    table = frame.pivot(index='classifier', columns=['sparse_mode', 'dictionary'], values='cell')
    classifiers = list(dict.fromkeys(frame['classifier']))
    columns = list(dict.fromkeys(zip(frame['sparse_mode'], frame['dictionary'])))
    table = table.reindex(index=classifiers, columns=pd.MultiIndex.from_tuples(columns))
    table.index.name = 'classifier'
    return table


def sparsity_frame(result: ExperimentResult) -> pd.DataFrame:
    """Mean sparsity percentage per class and group for every encoding"""
    rows = []
    for summary in result.sparsity:
        for code, groups in summary.per_class.items():
            row = {'dictionary': summary.dictionary, 'sparse_mode': summary.sparse_mode, 'class': code}
            row.update(groups)
            row['overall'] = summary.overall_per_class[code]
            rows.append(row)
    return pd.DataFrame(rows)


def confusion_frame(result: ExperimentResult, dictionary: str, sparse_mode: str, classifier: str,
                    pooled: bool = False) -> pd.DataFrame:
    cell = result.cell(dictionary, sparse_mode, classifier)
    matrix = cell.confusion_pooled if pooled else cell.confusion_first
    codes = [DisturbanceClass(c).code for c in matrix.classes]
    return pd.DataFrame(matrix.counts, index=pd.Index(codes, name='true'), columns=pd.Index(codes, name='predicted'))


def wilcoxon_frame(result: ExperimentResult) -> pd.DataFrame:
    return pd.DataFrame(result.wilcoxon, columns=['sparse_mode', 'classifier', 'a', 'b',
                                                  'statistic', 'p_value', 'exact'])


def rmse_frame(result: ExperimentResult) -> pd.DataFrame:
    return pd.DataFrame([{
        'dictionary': s.dictionary, 'sparse_mode': s.sparse_mode, 'max_rmse': s.max_rmse,
        'flagged': s.flagged, 'unconverged': s.unconverged,
    } for s in result.sparsity])


def sweep_frame(sweep: Union[SweepResult, Iterable[dict]]) -> pd.DataFrame:
    rows = sweep.rows if isinstance(sweep, SweepResult) else list(sweep)
    return pd.DataFrame(rows, columns=['snr_db', 'dictionary', 'sparse_mode', 'classifier', 'mean_accuracy'])


# =============================================================================
# FILES
# =============================================================================

def _write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
    return atomic_write_text(path, frame.to_csv(index=index, float_format="%.10g"))


def write_workbook(sheets: Dict[str, pd.DataFrame], path: Union[str, Path]) -> Path:
    """One worksheet per frame, bold header row"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    workbook = Workbook()
    workbook.remove(workbook.active)
    for title, frame in sheets.items():
        sheet = workbook.create_sheet(title=title[:31])
        flat = frame.reset_index() if frame.index.name or isinstance(frame.columns, pd.MultiIndex) else frame
        headers = [" / ".join(str(p) for p in c if p != "") if isinstance(c, tuple) else str(c) for c in flat.columns]
        sheet.append(headers)
        for cell in sheet[1]:
            cell.font = Font(bold=True)
        for row in flat.itertuples(index=False):
            sheet.append([None if pd.isna(v) else (v.item() if hasattr(v, 'item') else v) for v in row])
    workbook.save(path)
    return path


def write_experiment_report(result: ExperimentResult, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write result.json, the CSV tables and results.xlsx into out_dir.

    Returns:
        Mapping of table name to written path
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {'result': atomic_write_json(out_dir / RESULT_FILE, result.to_dict())}

    frames = {
        'accuracy': accuracy_frame(result),
        'sparsity': sparsity_frame(result),
        'wilcoxon': wilcoxon_frame(result),
        'rmse': rmse_frame(result),
    }
    for name, frame in frames.items():
        written[name] = _write_csv(frame, out_dir / f"{name}.csv")
    table = accuracy_table(result)
    written['accuracy_table'] = _write_csv(table, out_dir / "accuracy_table.csv", index=True)

    confusion_dir = out_dir / "confusion"
    for cell in result.cells:
        stem = f"{cell.dictionary}_{cell.sparse_mode}_{cell.classifier}".replace("-", "")
        _write_csv(confusion_frame(result, cell.dictionary, cell.sparse_mode, cell.classifier),
                   confusion_dir / f"{stem}.csv", index=True)
        _write_csv(confusion_frame(result, cell.dictionary, cell.sparse_mode, cell.classifier, pooled=True),
                   confusion_dir / f"{stem}_pooled.csv", index=True)
    written['confusion'] = confusion_dir

    sheets = {'Accuracy': table, 'Accuracy (tidy)': frames['accuracy'], 'Sparsity': frames['sparsity'],
              'Wilcoxon': frames['wilcoxon'], 'RMSE': frames['rmse']}
    written['workbook'] = write_workbook(sheets, out_dir / WORKBOOK_FILE)
    logger.info(f"Report written to {out_dir}")
    return written


def write_sweep_report(sweep: SweepResult, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    written = {'sweep': _write_csv(sweep_frame(sweep), out_dir / "sweep.csv")}
    for tag, result in sweep.results.items():
        written[f"snr_{tag}"] = atomic_write_json(out_dir / f"snr_{tag}" / RESULT_FILE, result.to_dict())
    written['workbook'] = write_workbook({'Sweep': sweep_frame(sweep)}, out_dir / WORKBOOK_FILE)
    logger.info(f"Sweep report written to {out_dir}")
    return written


def load_result(path: Union[str, Path]) -> ExperimentResult:
    path = Path(path)
    if path.is_dir():
        path = path / RESULT_FILE
    if not path.exists():
        raise DatasetError(f"result file not found: {path}")
    return ExperimentResult.from_dict(load_json(path))


# =============================================================================
# CONSOLE
# =============================================================================

def accuracy_rich_table(result: ExperimentResult, sparse_mode: Optional[str] = None) -> Table:
    modes = [sparse_mode] if sparse_mode else list(dict.fromkeys(c.sparse_mode for c in result.cells))
    dictionaries = list(dict.fromkeys(c.dictionary for c in result.cells))
    classifiers = list(dict.fromkeys(c.classifier for c in result.cells))

    table = Table(title=f"Accuracy % (SNR {result.to_dict()['snr_db']})", show_header=True,
                  header_style="bold magenta")
    table.add_column("Classifier", style="cyan")
    for mode in modes:
        for name in dictionaries:
            table.add_column(f"{name} / {mode}", style="white", justify="right")
    for classifier in classifiers:
        row: List[str] = [classifier]
        for mode in modes:
            for name in dictionaries:
                cell = result.cell(name, mode, classifier)
                row.append(format_mean_std(cell.mean, cell.std))
        table.add_row(*row)
    return table


def wilcoxon_rich_table(result: ExperimentResult) -> Table:
    table = Table(title="Wilcoxon rank-sum", show_header=True, header_style="bold magenta")
    for column in ("Mode", "Classifier", "Pair", "W", "p-value"):
        table.add_column(column, style="cyan" if column == "Mode" else "white")
    for row in result.wilcoxon:
        p_value = f"{row['p_value']:.4g}" + ("" if row['exact'] else " (approx)")
        table.add_row(row['sparse_mode'], row['classifier'], f"{row['a']} vs {row['b']}",
                      f"{row['statistic']:g}", p_value)
    return table


def print_experiment_summary(result: ExperimentResult):
    console.print(accuracy_rich_table(result))
    if result.wilcoxon:
        console.print(wilcoxon_rich_table(result))
    flagged = [s for s in result.sparsity if s.flagged]
    for summary in flagged:
        console.print(f"[yellow]{summary.dictionary}/{summary.sparse_mode}: {summary.flagged} signals "
                      f"above the RMSE target (max {summary.max_rmse:.3e})[/yellow]")


def print_sweep_summary(sweep: SweepResult):
    frame = sweep_frame(sweep)
    table = Table(title="Mean accuracy % by SNR", show_header=True, header_style="bold magenta")
    table.add_column("SNR (dB)", style="cyan")
    keys = list(dict.fromkeys(zip(frame['dictionary'], frame['sparse_mode'], frame['classifier'])))
    for d, m, c in keys:
        table.add_column(f"{c} {d}/{m}", style="white", justify="right")
    for tag in dict.fromkeys(frame['snr_db']):
        subset = frame[frame['snr_db'] == tag]
        lookup = {(r.dictionary, r.sparse_mode, r.classifier): r.mean_accuracy for r in subset.itertuples()}
        table.add_row(str(tag), *[f"{100 * lookup[k]:.2f}" for k in keys])
    console.print(table)

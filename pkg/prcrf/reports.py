from pathlib import Path
from typing import List, Tuple, Union
import logging

from prcrf.models import METRIC_NAMES, BenchmarkReport
from prcrf.data import write_text_atomic

logger = logging.getLogger(__name__)

COLUMN_TITLES = ("Recall", "Specificity", "Precision", "Accuracy", "F1 Score")
RECORD_HEADER = ("algorithm", "repetition") + METRIC_NAMES + ("seed",)


class ReportingService:
    """Renders a BenchmarkReport as an aligned table and as delimited records."""

    def __init__(self, report: BenchmarkReport):
        self.report = report

    def render_table(self) -> str:
        """Mean metrics per algorithm, 4 decimal places."""
        report = self.report
        summary = report.dataset
        name_width = max([len("Algorithms")] + [len(a) for a in report.algorithms])
        widths = [max(len(t), 6) for t in COLUMN_TITLES]

        lines = [
            f"Dataset: {summary.name} ({summary.n_observations} observations, "
            f"{summary.minority_fraction:.4f} minority, {summary.n_features} features)",
            f"Repetitions: {report.repetitions - len(report.excluded_repetitions)} of {report.repetitions}",
            "",
            "  ".join(["Algorithms".ljust(name_width)] + [t.rjust(w) for t, w in zip(COLUMN_TITLES, widths)]),
        ]
        for algorithm in report.algorithms:
            means = report.means[algorithm]
            cells = [f"{v:.4f}".rjust(w) for v, w in zip(means.values(), widths)]
            lines.append("  ".join([algorithm.ljust(name_width)] + cells))

        if report.paired_differences:
            lines.append("")
            lines.append(f"Paired differences against {report.algorithms[0]}:")
            for algorithm, diffs in report.paired_differences.items():
                cells = [f"{diffs[m]:+.4f}".rjust(w) for m, w in zip(METRIC_NAMES, widths)]
                lines.append("  ".join([algorithm.ljust(name_width)] + cells))

        undefined = {a: m.undefined for a, m in report.means.items() if m.undefined}
        if undefined:
            lines.append("")
            for algorithm, names in undefined.items():
                lines.append(f"Note: {algorithm} had 0/0 ratios reported as 0 for: {', '.join(names)}")
        if report.excluded_repetitions:
            lines.append(f"Excluded repetitions: {', '.join(map(str, report.excluded_repetitions))}")
        return "\n".join(lines) + "\n"

    def record_rows(self) -> List[Tuple[str, ...]]:
        rows = [RECORD_HEADER]
        for result in self.report.results:
            rows.append(
                (result.algorithm, str(result.repetition))
                + tuple(f"{v:.10g}" for v in result.metrics.values())
                + (str(result.seed),)
            )
        return rows

    def render_records(self, delimiter: str = ",") -> str:
        return "".join(delimiter.join(row) + "\n" for row in self.record_rows())

    def write(self, out_prefix: Union[str, Path]) -> Tuple[Path, Path]:
        """Write ``<prefix>.txt`` (table) and ``<prefix>.csv`` (records)."""
        out_prefix = Path(out_prefix)
        table_path = out_prefix.with_name(out_prefix.name + ".txt")
        records_path = out_prefix.with_name(out_prefix.name + ".csv")
        write_text_atomic(records_path, self.render_records())
        write_text_atomic(table_path, self.render_table())
        logger.info(f"Wrote benchmark report to {table_path} and {records_path}")
        return table_path, records_path

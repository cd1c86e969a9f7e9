import sys
from pathlib import Path
from typing import List, Optional

from jobs.benchmark import BenchmarkJob, format_table
from utils.csv_exporter import export_bench_to_csv


def cmd_bench(shapes: List[str], seed: int = 0, activation: str = "relu", csv_path: Optional[Path] = None) -> int:
    """Print the growth table for each shape, optionally saving it as CSV"""
    rows = BenchmarkJob(activation, seed).run(shapes)
    sys.stdout.write(format_table(rows))
    if csv_path is not None:
        export_bench_to_csv([row.to_dict() for row in rows], csv_path)
    return 0

import csv
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from loguru import logger


class BenchCSVExporter:
    """Write benchmark growth tables as CSV"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def create_bench_csv_headers(self) -> List[str]:
        return [
            'shape',
            'activation',
            'omega_bound',
            'enumerated',
            'feasible',
            'forks',
            'pruned',
            'peak_constraints',
            'seconds',
            'export_timestamp'
        ]

    def export_rows(self, rows: Sequence[Dict[str, Any]]) -> Path:
        """Overwrite the file with one line per benchmarked shape"""
        if self.path.parent and not self.path.parent.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now(timezone.utc).isoformat()
        with open(self.path, 'w', newline='', encoding='utf-8') as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=self.create_bench_csv_headers())
            writer.writeheader()
            for row in rows:
                writer.writerow({**row, 'export_timestamp': timestamp})
        logger.info(f"Wrote {len(rows)} benchmark rows to {self.path}")
        return self.path


def export_bench_to_csv(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> Path:
    return BenchCSVExporter(path).export_rows(rows)

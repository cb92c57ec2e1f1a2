import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, TextIO, Union

from ..utils.schemas import IntervalRow, StatsReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "interval_start_s",
    "flow_id",
    "sent",
    "received",
    "destroyed",
    "below_sensitivity",
    "false_pos",
    "false_neg",
    "jam_airtime_us",
]


def _csv_record(row: IntervalRow) -> Dict[str, str]:
    return {
        "interval_start_s": f"{row.interval_start_s:.3f}",
        "flow_id": row.flow_id,
        "sent": str(row.sent),
        "received": str(row.received),
        "destroyed": str(row.destroyed),
        "below_sensitivity": str(row.below_sensitivity),
        "false_pos": str(row.false_pos),
        "false_neg": str(row.false_neg),
        "jam_airtime_us": f"{row.jam_airtime_us:.2f}",
    }


def write_csv(report: StatsReport, stream: TextIO) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        writer.writerow(_csv_record(row))


def report_to_csv(report: StatsReport) -> str:
    buffer = io.StringIO()
    write_csv(report, buffer)
    return buffer.getvalue()


def summary_dict(report: StatsReport) -> Dict[str, Any]:
    """Totals per flow and per node plus jamming load, for the JSON summary."""
    return {
        "duration_s": report.duration_s,
        "seed": report.seed,
        "flows": {flow_id: totals.model_dump() for flow_id, totals in report.flows.items()},
        "nodes": {node_id: counters.model_dump() for node_id, counters in report.nodes.items()},
        "jam_transmissions": report.jam_transmissions,
        "jam_airtime_us": round(report.jam_airtime_us, 2),
        "jam_duty_cycle": float(f"{report.jam_duty_cycle:.6g}"),
    }


def report_to_json(report: StatsReport) -> str:
    return json.dumps(summary_dict(report), indent=2, sort_keys=True) + "\n"


def save_report(report: StatsReport, csv_path: Union[str, Path, None] = None, summary_path: Union[str, Path, None] = None) -> None:
    if csv_path is not None:
        logger.info(f"Writing interval CSV to {csv_path}")
        with open(csv_path, "w", newline="") as f:
            write_csv(report, f)
    if summary_path is not None:
        logger.info(f"Writing summary to {summary_path}")
        with open(summary_path, "w") as f:
            f.write(report_to_json(report))

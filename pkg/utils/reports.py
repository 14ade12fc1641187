import csv
import logging
import os
from datetime import datetime, timezone
from typing import Iterable, List, Sequence

from pydantic import BaseModel

from models.schemas import SCHEMA_VERSION, ReportMetadata

logger = logging.getLogger(__name__)


def make_metadata(seed: int, argv: Sequence[str] = ()) -> ReportMetadata:
    return ReportMetadata(timestamp=datetime.now(timezone.utc).isoformat(), seed=seed, argv=list(argv))


def write_json(report: BaseModel, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(report.model_dump_json(indent=2))
        handle.write("\n")
    logger.info("Report written to %s", path)
    return path


def write_csv(path: str, header: List[str], rows: Iterable[Sequence[float]]) -> str:
    """
        Writes a CSV artifact; the first line records the schema version as a comment row.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("# schema_version={}\n".format(SCHEMA_VERSION))
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(value)) for value in row])
    logger.info("CSV written to %s", path)
    return path

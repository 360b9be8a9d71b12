"""
Report Artifacts

Plot-ready CSV tables and JSON summaries. Every artifact carries the config
hash of the run that produced it; aggregation refuses mixed hashes.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from errors import ConfigMismatchError, InvalidInputError

logger = logging.getLogger(__name__)

HASH_PREFIX = "# config_hash "


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-friendly values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_csv(rows: Sequence[Dict[str, Any]], path: Union[str, Path], config_hash: str) -> Path:
    """CSV with a leading '# config_hash' line; columns in first-row order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames: List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    with open(path, "w", newline="") as f:
        f.write(f"{HASH_PREFIX}{config_hash}\n")
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) for k, v in row.items()})
    logger.info(f"CSV written to {path} ({len(rows)} rows)")
    return path


def read_csv(path: Union[str, Path]) -> Dict[str, Any]:
    """{"config_hash": ..., "rows": [...]} with values left as strings"""
    path = Path(path)
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith(HASH_PREFIX):
            raise InvalidInputError(f"{path} has no config hash line")
        rows = list(csv.DictReader(f))
    return {"config_hash": first[len(HASH_PREFIX):].strip(), "rows": rows}


def write_json(summary: Dict[str, Any], path: Union[str, Path], config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _plain(dict(summary))
    payload["config_hash"] = config_hash
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    logger.info(f"Summary written to {path}")
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    data = json.loads(path.read_text())
    if "config_hash" not in data:
        raise InvalidInputError(f"{path} has no config hash")
    return data


def check_hashes(hashes: Sequence[str], expected: Optional[str] = None) -> str:
    """The common hash; raises ConfigMismatchError on any difference"""
    distinct = sorted(set(hashes) | ({expected} if expected else set()))
    if len(distinct) > 1:
        raise ConfigMismatchError(f"artifacts come from different configs: {', '.join(distinct)}")
    if not distinct:
        raise InvalidInputError("no artifacts to aggregate")
    return distinct[0]


def aggregate_summaries(paths: Sequence[Union[str, Path]], expected: Optional[str] = None) -> Dict[str, Any]:
    """Merge JSON summaries of one run keyed by file stem"""
    summaries = {Path(p).stem: read_json(p) for p in paths}
    common = check_hashes([s["config_hash"] for s in summaries.values()], expected)
    merged: Dict[str, Any] = {"config_hash": common, "artifacts": {}}
    for name, data in sorted(summaries.items()):
        merged["artifacts"][name] = {k: v for k, v in data.items() if k != "config_hash"}
    logger.info(f"Aggregated {len(summaries)} summaries | hash={common}")
    return merged

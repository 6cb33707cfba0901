"""Atomic output files: JSON documents, JSON-lines metrics and the plotting CSV."""

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
  """Write ``text`` to a temp file beside ``path`` and rename it into place."""
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
  try:
    with os.fdopen(fd, "w", newline="") as f:
      f.write(text)
    os.replace(tmp, path)
  except BaseException:
    if os.path.exists(tmp):
      os.unlink(tmp)
    raise
  return path


def dumps_json(data: Any) -> str:
  return json.dumps(data, indent=2) + "\n"


def write_json(path: PathLike, data: Any) -> Path:
  return atomic_write_text(path, dumps_json(data))


def read_json(path: PathLike) -> Any:
  with open(path, "r") as f:
    return json.load(f)


def dumps_jsonl(records: Iterable[Dict[str, Any]]) -> str:
  """One compact JSON object per line; key order is the record's own."""
  return "".join(json.dumps(record, separators=(", ", ": ")) + "\n" for record in records)


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> Path:
  return atomic_write_text(path, dumps_jsonl(records))


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
  with open(path, "r") as f:
    return [json.loads(line) for line in f if line.strip()]


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
  buffer = io.StringIO()
  writer = csv.writer(buffer, lineterminator="\n")
  writer.writerow(header)
  for row in rows:
    writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
  return atomic_write_text(path, buffer.getvalue())


def sidecar_csv_path(path: PathLike) -> Path:
  """``run.jsonl`` -> ``run.csv``."""
  return Path(path).with_suffix(".csv")

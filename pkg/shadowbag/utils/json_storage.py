import csv
import io
import json
import os
import uuid
from pathlib import Path


def _replace_atomically(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)

    # Unique temp name so concurrent sweep workers never collide on it
    tmp = path.parent / f"{path.name}.{uuid.uuid4()}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)

    os.replace(tmp, path)


def write_json(path: Path, data: dict | list) -> None:
    _replace_atomically(Path(path), json.dumps(data, indent=2, ensure_ascii=False))


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(path: Path, header: list[str], rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _replace_atomically(Path(path), buffer.getvalue())


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))

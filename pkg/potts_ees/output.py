"""
輸出工具：CSV / JSON 寫入與參數清單（manifest）。

- 浮點數一律以 17 位有效數字輸出，確保重跑時檔案逐位元組相同。
- 每個輸出檔旁都會產生 <檔名>.manifest.json，內含子命令、完整設定、種子、版本與 git describe。
- manifest 不含時間戳記。
"""
from __future__ import annotations

import csv
import json
import logging
import subprocess
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__

logger = logging.getLogger(__name__)


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True, default=_json_default)


def get_version(cmd: list[str]) -> str:
    try:
        out = subprocess.check_output(
            cmd, stderr=subprocess.STDOUT, text=True, timeout=5, cwd=Path(__file__).resolve().parent
        )
        return out.strip().splitlines()[0]
    except Exception as e:
        return f"unknown ({type(e).__name__})"


def build_manifest(subcommand: str, config: Mapping[str, Any], extra: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    manifest = {
        "subcommand": subcommand,
        "config": dict(config),
        "version": __version__,
        "git_describe": get_version(["git", "describe", "--always", "--dirty"]),
    }
    if extra:
        manifest.update(extra)
    return manifest


def manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def _write_manifest(path: Path, manifest: Optional[Mapping[str, Any]]) -> None:
    if manifest is None:
        return
    entry = dict(manifest)
    entry["file"] = path.name
    manifest_path(path).write_text(to_json(entry) + "\n", encoding="utf-8")


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    manifest: Optional[Mapping[str, Any]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    _write_manifest(path, manifest)
    logger.info("wrote %s", path)
    return path


def write_json(path: Path, payload: Any, manifest: Optional[Mapping[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload) + "\n", encoding="utf-8")
    _write_manifest(path, manifest)
    logger.info("wrote %s", path)
    return path

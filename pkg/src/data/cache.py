from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np


def digest_key(payload: Dict[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class DiskCache:
    """sha256-keyed store of named numpy arrays plus a JSON metadata blob."""

    def __init__(self, cache_dir: Optional[Path] = None) -> None:
        if cache_dir is None:
            cache_dir = Path(os.getenv("TNODE_CACHE_DIR") or Path.cwd() / ".cache" / "embeddings")
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _key_to_path(self, key: str) -> Path:
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.npz"

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        path = self._key_to_path(key)
        if not path.exists():
            return None
        with np.load(path, allow_pickle=False) as archive:
            entry: Dict[str, Any] = {name: archive[name] for name in archive.files if name != "__meta__"}
            if "__meta__" in archive.files:
                entry["meta"] = json.loads(str(archive["__meta__"]))
        return entry

    def set(self, key: str, arrays: Dict[str, np.ndarray], meta: Optional[Dict[str, Any]] = None) -> None:
        path = self._key_to_path(key)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, __meta__=np.array(json.dumps(meta or {})), **arrays)
        tmp.replace(path)

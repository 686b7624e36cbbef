from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from src.data.synthetic import SynthConfig
from src.embedding.skipgram import SkipGramConfig
from src.embedding.walks import WalkConfig
from src.model.training import TrainConfig
from src.pipeline.types import RunConfig

SECTIONS = {
    "walk": WalkConfig,
    "skipgram": SkipGramConfig,
    "train": TrainConfig,
    "synthetic": SynthConfig,
}
PATH_KEYS = ("edges", "labels")


def load_config_file(path: Path | str) -> Dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"config at {path} must be a table/object")
    # relative data paths resolve against the config file's directory
    for key in PATH_KEYS:
        value = data.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            data[key] = str((path.parent / value).resolve())
    return data


def parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    target = data
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ValueError(f"cannot set {key}: {part} is not a section")
    target[parts[-1]] = value


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    merged = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        set_dotted(merged, key.strip(), parse_value(raw.strip()))
    return merged


def merge_dicts(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    data = copy.deepcopy(data)
    kwargs: Dict[str, Any] = {}
    for section, cls in SECTIONS.items():
        raw = data.pop(section, None)
        if raw is None:
            continue
        if not isinstance(raw, dict):
            raise ValueError(f"[{section}] must be a table")
        kwargs[section] = cls(**raw)
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    kwargs.update(data)
    return RunConfig(**kwargs)


def load_run_config(
    path: Optional[Path | str] = None,
    overrides: Iterable[str] = (),
    **explicit: Any,
) -> RunConfig:
    data = load_config_file(path) if path else {}
    data = apply_overrides(data, overrides)
    for key, value in explicit.items():
        if value is not None:
            data[key] = value
    return run_config_from_dict(data)

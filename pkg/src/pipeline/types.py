from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

from src.data.synthetic import SynthConfig
from src.embedding.skipgram import SkipGramConfig
from src.embedding.walks import WalkConfig
from src.model.recurrent import COMBINERS
from src.model.training import TrainConfig

TASKS = ("link", "nodeclass")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": "stage_failed",
            "stage": self.stage,
            "type": type(self.cause).__name__,
            "message": str(self.cause),
        }


@dataclass
class RunConfig:
    task: str = "link"
    edges: Optional[str] = None
    labels: Optional[str] = None
    dataset: str = ""
    directed: bool = False
    weighted: bool = False
    granularity: Optional[int] = None
    T: int = 10
    train_fraction: float = 0.8
    timestep_fraction: float = 1.0
    alignment: bool = True
    proper_rotation: bool = False
    refine_rotation: bool = False
    combiner: str = "lstm"
    walk: WalkConfig = field(default_factory=WalkConfig)
    skipgram: SkipGramConfig = field(default_factory=SkipGramConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synthetic: Optional[SynthConfig] = None
    output_dir: str = field(default_factory=lambda: os.getenv("TNODE_OUT_DIR", "runs/latest"))
    cache_dir: Optional[str] = None
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.edges is None and self.synthetic is None:
            raise ValueError("either an edges path or a [synthetic] section is required")
        if self.task == "nodeclass" and not self.labels:
            raise ValueError("task 'nodeclass' needs a labels path")
        if self.combiner not in COMBINERS:
            raise ValueError(f"combiner must be one of {COMBINERS}, got {self.combiner!r}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 < self.timestep_fraction <= 1:
            raise ValueError(f"timestep_fraction must be in (0, 1], got {self.timestep_fraction}")
        if self.granularity is not None and self.granularity <= 0:
            raise ValueError(f"granularity must be positive, got {self.granularity}")
        if not self.dataset:
            if self.synthetic is not None:
                self.dataset = f"synthetic-{self.synthetic.target}"
            else:
                self.dataset = os.path.splitext(os.path.basename(self.edges))[0]

    def to_dict(self) -> Dict[str, Any]:
        """Config echo for reports; the output location is not part of a run's identity."""
        data = asdict(self)
        data.pop("output_dir", None)
        data.pop("cache_dir", None)
        return data

"""
Trained model stack: everything the learning phase produces.

On disk a stack is a directory:

    schedule.json          NoiseSchedule
    models/level_<l>.json  PiecewiseScoreModel fit at t_l (l = 1..N)
    warmstarts.json        l -> WarmStartSet in force for level l
    audit.jsonl            one LevelAudit per level, in fitting order
    stack.json             train config, degree info, refresh levels
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

from gmdiffuse.core.errors import ArtifactError
from gmdiffuse.core.storage import read_json, read_jsonl, sha256_file, write_json, write_jsonl
from gmdiffuse.models.score_model import PiecewiseScoreModel
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.schemas.training import LevelAudit, TrainConfig
from gmdiffuse.schemas.warm_start import WarmStartSet


class TrainedStack:
    """
    Score models for every schedule time above t_1 plus training records.

    Attributes:
        schedule: Noise schedule
        models: t_l -> model for l = 2..N (what generation consumes)
        terminal_model: Model fit at t_1 (the loop fits every level)
        warm_start_history: l -> WarmStartSet in force for level l
        audit: LevelAudit records, from l = N down to 1
        config: TrainConfig used
        degree_info: Formula and effective Hermite degree
        refresh_levels: Levels at which warm starts were refreshed
    """

    def __init__(
        self,
        schedule: NoiseSchedule,
        models: Dict[float, PiecewiseScoreModel],
        terminal_model: Optional[PiecewiseScoreModel],
        warm_start_history: Dict[int, WarmStartSet],
        audit: List[LevelAudit],
        config: Optional[TrainConfig] = None,
        degree_info: Optional[Dict[str, int]] = None,
        refresh_levels: Optional[List[int]] = None,
    ):
        self.schedule = schedule
        self.models = models
        self.terminal_model = terminal_model
        self.warm_start_history = warm_start_history
        self.audit = audit
        self.config = config
        self.degree_info = degree_info or {}
        self.refresh_levels = sorted(refresh_levels or [])

    def model_at(self, level: int) -> PiecewiseScoreModel:
        """Model fit at t_level (1-based)."""
        if level == 1:
            if self.terminal_model is None:
                raise KeyError("no model at level 1")
            return self.terminal_model
        return self.models[self.schedule.time_at(level)]

    @property
    def final_warm_starts(self) -> WarmStartSet:
        """Most recent warm-start set (smallest level key)."""
        return self.warm_start_history[min(self.warm_start_history)]

    def check_invariants(self) -> List[str]:
        """Models keyed by t_2..t_N; warm-start radius nonincreasing as l decreases."""
        problems: List[str] = []
        if sorted(self.models) != sorted(self.schedule.times[1:]):
            problems.append("models are not keyed exactly by the schedule times above t_1")

        radii = [self.warm_start_history[level].radius for level in sorted(self.warm_start_history, reverse=True)]
        if any(later > earlier for earlier, later in zip(radii, radii[1:])):
            problems.append("warm-start radius increases as the level decreases")
        return problems

    def save(self, directory) -> Path:
        """Write the stack directory; returns its path."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        write_json(directory / "schedule.json", self.schedule.model_dump(mode="json"))
        for level in range(1, self.schedule.N + 1):
            try:
                model = self.model_at(level)
            except KeyError:
                continue
            write_json(directory / "models" / f"level_{level}.json", model.to_dict())

        write_json(
            directory / "warmstarts.json",
            {str(level): ws.model_dump(mode="json") for level, ws in sorted(self.warm_start_history.items())},
        )
        write_jsonl(directory / "audit.jsonl", (record.model_dump(mode="json") for record in self.audit))
        write_json(
            directory / "stack.json",
            {
                "config": None if self.config is None else self.config.model_dump(mode="json"),
                "degree": self.degree_info,
                "refresh_levels": self.refresh_levels,
                "levels": self.schedule.N,
            },
        )
        return directory

    @classmethod
    def load(cls, directory) -> "TrainedStack":
        """
        Read a stack directory written by save().

        Raises:
            ArtifactError: If the directory or a required file is missing
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise ArtifactError(f"Model directory not found: {directory}", path=str(directory))

        schedule = NoiseSchedule.model_validate(read_json(directory / "schedule.json"))
        models: Dict[float, PiecewiseScoreModel] = {}
        terminal: Optional[PiecewiseScoreModel] = None
        for level in range(1, schedule.N + 1):
            path = directory / "models" / f"level_{level}.json"
            if not path.is_file():
                if level == 1:
                    continue
                raise ArtifactError(f"Missing model file: {path}", path=str(path))
            model = PiecewiseScoreModel.from_dict(read_json(path))
            if level == 1:
                terminal = model
            else:
                models[schedule.time_at(level)] = model

        history = {
            int(level): WarmStartSet.model_validate(payload)
            for level, payload in read_json(directory / "warmstarts.json").items()
        }
        audit = [LevelAudit.model_validate(r) for r in read_jsonl(directory / "audit.jsonl")]
        meta: Dict[str, Any] = read_json(directory / "stack.json")
        config = None if meta.get("config") is None else TrainConfig.model_validate(meta["config"])

        return cls(
            schedule=schedule,
            models=models,
            terminal_model=terminal,
            warm_start_history=history,
            audit=audit,
            config=config,
            degree_info=meta.get("degree"),
            refresh_levels=meta.get("refresh_levels"),
        )

    @staticmethod
    def file_hashes(directory) -> Dict[str, str]:
        """SHA-256 of the schedule and every model file in a stack directory."""
        directory = Path(directory)
        files = [directory / "schedule.json"] + sorted((directory / "models").glob("level_*.json"))
        return {str(p.relative_to(directory)): sha256_file(p) for p in files if p.is_file()}

    def __repr__(self) -> str:
        return (
            f"<TrainedStack(levels={self.schedule.N}, models={len(self.models)}, "
            f"refreshes={len(self.refresh_levels)})>"
        )

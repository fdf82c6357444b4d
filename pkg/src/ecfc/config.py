"""Training configuration and its JSON form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError
from .features import FeatureSchema, SplitSpec, check_split
from .ingest import SLOTS_PER_DAY

DEFAULT_VAL_DAYS = 10


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run.

    Defaults are sized for a laptop.  ``split=None`` means "train from the
    first point and hold out the last ten days".
    """

    batch_size: int = 10
    epochs: int = 50
    learning_rate: float = 1e-3
    dropout_keep: float = 1.0
    window_size: int = 96
    layer_count: int = 1
    units: int = 32
    input_mode: str = "sequence"
    schema_variant: str = "windowed"
    seed: int = 0
    shuffle: bool = False
    clip_norm: float | None = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    zero_floor: float = 1e-9
    split: SplitSpec | None = field(default=None)

    def __post_init__(self):
        if isinstance(self.split, dict):
            object.__setattr__(self, "split", SplitSpec(**self.split))
        problems = []
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.learning_rate < 0:
            problems.append("learning_rate must be >= 0")
        if not 0.0 < self.dropout_keep <= 1.0:
            problems.append("dropout_keep must lie in (0, 1]")
        if self.layer_count < 1 or self.units < 1:
            problems.append("layer_count and units must be >= 1")
        if self.schema_variant == "windowed" and self.window_size < 1:
            problems.append("window_size must be >= 1 for the windowed schema")
        if self.clip_norm is not None and self.clip_norm <= 0:
            problems.append("clip_norm must be positive or null")
        if self.shuffle and self.input_mode == "flat":
            problems.append("shuffle breaks state continuity in flat mode")
        if problems:
            raise ConfigError("; ".join(problems))
        try:
            self.schema
        except ContractError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def schema(self) -> FeatureSchema:
        window = self.window_size if self.schema_variant == "windowed" else 0
        return FeatureSchema(self.schema_variant, window, self.input_mode)

    def resolve_split(self, length: int) -> SplitSpec:
        """The explicit split, or the default ten-day hold-out for ``length``."""
        if self.split is not None:
            split = self.split
        else:
            split = SplitSpec(0, length - DEFAULT_VAL_DAYS * SLOTS_PER_DAY, length)
        history = self.schema.history
        if split.train_len <= history or split.val_end > length or split.val_end <= split.train_end:
            need = max(split.train_start + history + 1, split.val_end)
            raise ConfigError(
                f"series of {length} points cannot hold split {split.to_dict()} "
                f"with window {history} (needs at least {need} points, "
                f"training longer than the window and a nonempty validation range)"
            )
        try:
            check_split(split, history, length)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        return split

    def with_split(self, split: SplitSpec) -> "TrainConfig":
        return dataclasses.replace(self, split=split)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split"] = None if self.split is None else self.split.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

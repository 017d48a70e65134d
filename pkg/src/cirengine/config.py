"""Engine configuration: component toggles, hyperparameters, dependency rules.

Some components only make sense on top of others: projection operates on
centered features, and the Harris criterion needs min-normalized scores.
Violations are configuration errors, not silent fallbacks.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from .exceptions import ConfigDependencyViolation


@dataclass(frozen=True)
class EngineConfig:
    """Component toggles plus the scalar knobs of the retrieval pipeline."""

    centering: bool = True
    min_norm: bool = True
    harris: bool = True
    contextualization: bool = True
    projection: bool = True
    query_expansion: bool = False

    alpha: float = 0.2
    k: int = 250
    harris_lambda: float = 0.1
    beta: float = 0.1
    k_neighbors: int = 10
    n_phrases: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.projection and not self.centering:
            raise ConfigDependencyViolation(
                "projection assumes centered features; enable centering"
            )
        if self.harris and not self.min_norm:
            raise ConfigDependencyViolation(
                "the Harris step requires min-normalized scores; enable min_norm"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        doc = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()

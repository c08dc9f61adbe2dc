# conlab/models.py
from enum import Enum
from typing import Dict, List, Optional
from pydantic import BaseModel, Field, model_validator

class DefenseKind(str, Enum):
    NONE = "none"
    WAIT_BEFORE_REPLY = "wait_before_reply"
    DELAY_FIRST_K = "delay_first_k"
    COLLABORATIVE = "collaborative"
    PROBABILISTIC = "probabilistic"

class AttackKind(str, Enum):
    TIMING = "timing"
    MONITOR = "monitor"
    DUMP = "dump"

class Replacement(str, Enum):
    LRU = "lru"
    FIFO = "fifo"
    RANDOM = "random"

class SimParams(BaseModel):
    seed: int = 1
    cache_capacity: int = Field(64, ge=0)
    capacity_overrides: Dict[str, int] = {}
    replacement: Replacement = Replacement.LRU
    processing_us: int = Field(100, ge=0)
    jitter_us: int = Field(0, ge=0)
    pit_lifetime_us: int = Field(4_000_000, gt=0)
    bloom_m: int = Field(2048, gt=0)
    bloom_h: int = Field(5, gt=0)
    bloom_seed: int = 0
    verify_signatures: bool = True

class DefenseConfig(BaseModel):
    kind: DefenseKind = DefenseKind.NONE
    k_min: int = Field(1, ge=0)
    k_max: int = Field(8, ge=0)
    p0: float = Field(0.7, ge=0.0, le=1.0)
    members: List[str] = []
    ewma_weight: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _k_range(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self

class AttackConfig(BaseModel):
    kind: AttackKind = AttackKind.TIMING
    adversary: str = ""
    epsilon_us: List[int] = []
    trials: int = Field(30, ge=1)
    scope: int = Field(2, ge=1)
    period_us: int = Field(500_000, gt=0)
    horizon_us: int = Field(10_000_000, gt=0)
    start_us: int = Field(0, ge=0)
    prefix: str = "/"
    victims: List[str] = []
    samples: int = Field(1, ge=1)

class MetricRow(BaseModel):
    defense: str
    metric: str
    value: float

class ExperimentResult(BaseModel):
    scenario_id: str
    seed: int
    defense: str
    attack: str = ""
    rows: List[MetricRow] = []

    def as_dict(self) -> Dict[str, float]:
        return {r.metric: r.value for r in self.rows}

class JobStatus(BaseModel):
    status: str
    result: Optional[dict] = None
    error: Optional[str] = None

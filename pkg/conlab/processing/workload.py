# conlab/processing/workload.py
import logging
from typing import List, Optional, Sequence

import numpy as np

from ..net.names import Name
from ..net.simnet import Request

logger = logging.getLogger("conlab")


def zipf_probabilities(catalog_size: int, exponent: float) -> np.ndarray:
    if catalog_size < 1:
        raise ValueError("catalog_size must be >= 1")
    if exponent < 0:
        raise ValueError("exponent must be >= 0")
    weights = 1.0 / np.arange(1, catalog_size + 1, dtype=np.float64) ** exponent
    return weights / weights.sum()


def workload_zipf(catalog_size: int, exponent: float, requests: int, seed: int, *,
                  names: Optional[Sequence[Name]] = None, consumers: Sequence[str] = ("c1",),
                  start_us: int = 0, interval_us: int = 1000) -> List[Request]:
    """Deterministic Zipf request schedule; names[0] is the most popular.

    Consumers are drawn uniformly per request from the same seeded stream.
    """
    if names is None:
        names = [Name.of("content", f"{i:05d}") for i in range(catalog_size)]
    if len(names) < catalog_size:
        raise ValueError(f"need {catalog_size} names, got {len(names)}")
    if not consumers:
        raise ValueError("need at least one consumer")
    rng = np.random.default_rng(seed)
    ranks = rng.choice(catalog_size, size=requests, p=zipf_probabilities(catalog_size, exponent))
    who = rng.integers(len(consumers), size=requests)
    schedule = [
        Request(start_us + i * interval_us, consumers[int(who[i])], names[int(ranks[i])])
        for i in range(requests)
    ]
    logger.info("Zipf workload: %d requests over %d names (s=%.2f)", requests, catalog_size, exponent,
                extra={"seed": seed})
    return schedule


def render_schedule(schedule: Sequence[Request]) -> str:
    """Schedule lines in scenario-file syntax."""
    lines = ["[schedule]"]
    for r in schedule:
        extra = ""
        if r.scope is not None:
            extra += f" scope={r.scope}"
        if r.lifetime is not None:
            extra += f" lifetime={r.lifetime}us"
        lines.append(f"{r.time}us {r.consumer} {r.name}{extra}")
    return "\n".join(lines) + "\n"

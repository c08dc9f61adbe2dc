# conlab/processing/metrics.py
import logging
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from ..models import ExperimentResult, MetricRow
from ..net.simnet import Topology, Trace, anonymity_set

logger = logging.getLogger("conlab")

MATRIX_COLUMNS = ["defense", "metric", "value"]
FLOAT_FORMAT = "%.6f"


def run_metrics(trace: Trace, topology: Topology) -> Dict[str, float]:
    """Latency, cache effectiveness, anonymity and relay cost of one run."""
    lat = np.asarray(trace.latencies(), dtype=np.float64)
    requests = sum(1 for e in trace.events if e.action == "request")
    origin = sum(1 for e in trace.events if e.action == "send_data" and e.detail == "origin")
    timeouts = sum(1 for e in trace.events if e.action == "timeout")

    stats = trace.router_stats
    hits = sum(s.hits for s in stats.values())
    misses = sum(s.misses for s in stats.values())
    relays = sum(s.relays for s in stats.values())
    fallbacks = sum(s.fallbacks for s in stats.values())

    weighted = 0
    for r, s in stats.items():
        if s.hits:
            weighted += s.hits * anonymity_set(topology, r)

    return {
        "requests": float(requests),
        "delivered": float(lat.size),
        "timeouts": float(timeouts),
        "latency_mean_us": float(lat.mean()) if lat.size else 0.0,
        "latency_p95_us": float(np.percentile(lat, 95)) if lat.size else 0.0,
        # share of requests the producer never saw
        "hit_ratio": 1.0 - origin / requests if requests else 0.0,
        "router_hit_ratio": hits / (hits + misses) if hits + misses else 0.0,
        "anonymity_set_mean": weighted / hits if hits else 0.0,
        "relay_overhead": relays / requests if requests else 0.0,
        "fallbacks": float(fallbacks),
    }


def to_rows(defense: str, metrics: Dict[str, float]) -> List[MetricRow]:
    return [MetricRow(defense=defense, metric=k, value=float(v)) for k, v in metrics.items()]


def results_frame(results: Iterable[ExperimentResult]) -> pd.DataFrame:
    rows = [{"defense": r.defense, "metric": m.metric, "value": m.value} for r in results for m in r.rows]
    return pd.DataFrame(rows, columns=MATRIX_COLUMNS)


def matrix_csv(results: Sequence[ExperimentResult]) -> str:
    return results_frame(results).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def pivot(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """defense x metric view of a comparison."""
    df = results_frame(results)
    if df.empty:
        return df
    return df.pivot(index="defense", columns="metric", values="value")


def zero_duplicates(trace: Trace, members: Sequence[str]) -> bool:
    """No full name held by two members at any point of the trace."""
    held: Dict[str, set] = {m: set() for m in members}
    for e in trace.events:
        if e.node not in held or e.action != "cache":
            continue
        if e.detail.startswith("evicted="):
            held[e.node].discard(e.detail[len("evicted="):])
        held[e.node].add(e.name)
        if any(e.name in names for m, names in held.items() if m != e.node):
            return False
    return True

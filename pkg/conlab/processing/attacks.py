# conlab/processing/attacks.py
"""Cache-privacy adversary: RTT classification, scoped monitoring, exclusion dumps."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from ..errors import CalibrationError, ScenarioError
from ..models import AttackConfig, AttackKind, DefenseConfig, DefenseKind
from ..net.names import Interest, Name, is_prefix_of
from ..net.simnet import Network, Request, Scenario, path, shared_anonymity_set

logger = logging.getLogger("conlab")


class Verdict(str, Enum):
    CACHED_AT_CLOSEST = "cached_at_closest"
    CACHED_UPSTREAM = "cached_upstream"
    NOT_CACHED = "not_cached"


@dataclass(frozen=True)
class CacheVerdict:
    kind: Verdict
    distance: Optional[int] = None
    anomaly: bool = False


@dataclass(frozen=True)
class TimingCalibration:
    rtt_c: int
    rtt_s: int
    epsilon: int
    # round trip added by each router hop beyond the first
    per_hop_rtt: int

    def __post_init__(self):
        if self.rtt_c >= self.rtt_s:
            raise CalibrationError(f"cached RTT {self.rtt_c}us is not below source RTT {self.rtt_s}us")
        if self.per_hop_rtt <= 0:
            raise CalibrationError("per-hop round trip must be positive")

    def with_epsilon(self, epsilon: int) -> "TimingCalibration":
        return TimingCalibration(self.rtt_c, self.rtt_s, epsilon, self.per_hop_rtt)


def _median(values: Sequence[int]) -> int:
    return int(round(float(np.median(np.asarray(values, dtype=np.int64)))))


def _producer_of(net: Network, name: Name) -> str:
    entry = net.scenario.catalog.get(name)
    if entry is None:
        raise ScenarioError(f"{name} is not in the catalog")
    return entry.producer


def per_hop_rtt(net: Network, adv: str, name: Name) -> int:
    """Round trip of the second router hop on the adversary's path; falls back to the first."""
    route = path(net.topology, adv, _producer_of(net, name))
    routers = route[1:-1] if route else []
    if len(routers) >= 2:
        return net.scoped_rtt(adv, name, 2) - net.scoped_rtt(adv, name, 1)
    return net.scoped_rtt(adv, name, 1)


def calibrate(net: Network, adv: str, cached_ref: Name, source_ref: Name | Sequence[Name], epsilon: int,
              now: Optional[int] = None, samples: int = 1) -> TimingCalibration:
    """Measure cached and source RTTs from the adversary's seat.

    cached_ref is planted by fetching it once before measuring; every source
    sample uses its own never-fetched name. Multiple samples are reduced by median.
    """
    sources = [source_ref] if isinstance(source_ref, Name) else list(source_ref)
    if net.params.jitter_us and samples == 1:
        samples = 5
    if len(sources) < samples:
        raise CalibrationError(f"{samples} source samples need {samples} uncached names, got {len(sources)}")
    if now is not None:
        net.run_until(now)
    if net.measure_rtt(adv, Interest(cached_ref)) is None:
        raise CalibrationError(f"could not plant {cached_ref}")
    cached = [net.measure_rtt(adv, Interest(cached_ref)) for _ in range(samples)]
    source = [net.measure_rtt(adv, Interest(n)) for n in sources[:samples]]
    if any(v is None for v in cached + source):
        raise CalibrationError("calibration probe timed out")
    return TimingCalibration(_median(cached), _median(source), int(epsilon), per_hop_rtt(net, adv, cached_ref))


def classify(t: TimingCalibration, rtt_t: Optional[int]) -> CacheVerdict:
    if rtt_t is None:
        return CacheVerdict(Verdict.NOT_CACHED, anomaly=True)
    if abs(rtt_t - t.rtt_c) < t.epsilon:
        return CacheVerdict(Verdict.CACHED_AT_CLOSEST)
    if abs(rtt_t - t.rtt_s) < t.epsilon:
        return CacheVerdict(Verdict.NOT_CACHED)
    if t.rtt_c < rtt_t < t.rtt_s:
        return CacheVerdict(Verdict.CACHED_UPSTREAM, distance=int(round((rtt_t - t.rtt_c) / t.per_hop_rtt)))
    return CacheVerdict(Verdict.NOT_CACHED, anomaly=True)


def ground_truth(net: Network, adv: str, name: Name) -> CacheVerdict:
    """Where the adversary's next interest would find name, read from router state."""
    route = path(net.topology, adv, _producer_of(net, name)) or []
    for i, r in enumerate(route[1:-1]):
        if name in net.router(r).cs:
            return CacheVerdict(Verdict.CACHED_AT_CLOSEST) if i == 0 else CacheVerdict(Verdict.CACHED_UPSTREAM, i)
    return CacheVerdict(Verdict.NOT_CACHED)


# ----------------- monitoring -----------------

def monitor_content(net: Network, adv: str, m: Name, scope: int, period: int, horizon: int,
                    start: int = 0) -> Optional[int]:
    """First time m shows up within scope, probing every period until horizon.

    A probe answered within the in-scope round trip reports its issue time; a
    probe that was satisfied later (it waited in a PIT for someone else's
    fetch) reports the satisfaction time.
    """
    if scope < 1:
        raise ValueError("scope must be >= 1")
    bound = net.scoped_rtt(adv, m, scope)
    t = start
    while t <= horizon:
        net.run_until(t)
        got = net.wait(net.fetch(adv, Interest(m, scope=scope, lifetime=period)))
        if got is not None:
            return got.issued if got.rtt <= bound else net.now
        t += period
    return None


# ----------------- dumping -----------------

@dataclass
class DumpResult:
    names: Set[Name]
    probes: int
    order: List[Name] = field(default_factory=list)


def dump_cache(net: Network, adv: str, prefix: Name, scope: int, lifetime: Optional[int] = None) -> DumpResult:
    """Enumerate the first-hop router's cache under prefix by growing the exclusion set.

    Only the first interest carries the requested scope. A reply slower than a
    first-hop hit came from farther up, so it is excluded but not reported, and
    every later interest is held to scope 1 so the walk stays on the first hop.
    """
    if scope < 1:
        raise ValueError("scope must be >= 1")
    seen: List[Name] = []
    excluded: List[Name] = []
    probes = 0
    current = scope
    while True:
        probes += 1
        i = Interest(prefix, scope=current, exclusions=frozenset(excluded), lifetime=lifetime)
        got = net.wait(net.fetch(adv, i))
        if got is None:
            break
        n = got.obj.name
        excluded.append(n)
        if current == 1 or got.rtt <= first_hop_bound(net, adv, n):
            seen.append(n)
        else:
            logger.debug("Dump skipped %s answered upstream in %dus", n, got.rtt)
        current = 1
    return DumpResult(set(seen), probes, seen)


def first_hop_bound(net: Network, adv: str, name: Name) -> int:
    """Slowest RTT still attributed to a hit at the adversary's first-hop router."""
    return net.scoped_rtt(adv, name, 1) + per_hop_rtt(net, adv, name) // 2


# ----------------- scoring -----------------

def score_verdicts(predicted: Sequence[str], truth: Sequence[str]) -> Dict[str, float]:
    pred = np.asarray(predicted, dtype=object)
    true = np.asarray(truth, dtype=object)
    out: Dict[str, float] = {"accuracy": float(np.mean(pred == true)) if len(true) else 0.0}
    for cls in Verdict:
        tp = int(np.sum((pred == cls.value) & (true == cls.value)))
        fp = int(np.sum((pred == cls.value) & (true != cls.value)))
        fn = int(np.sum((pred != cls.value) & (true == cls.value)))
        out[f"precision_{cls.value}"] = tp / (tp + fp) if tp + fp else 0.0
        out[f"recall_{cls.value}"] = tp / (tp + fn) if tp + fn else 0.0
    return out


def jaccard(a: Iterable, b: Iterable) -> float:
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


@dataclass
class AttackReport:
    kind: AttackKind
    rows: List[Dict[str, object]] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)
    recovered: Set[Name] = field(default_factory=set)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator="\n")


def score(report: AttackReport, ground_truth: Optional[Iterable[Name]] = None) -> Dict[str, float]:
    if report.kind == AttackKind.DUMP:
        truth = set(ground_truth or ())
        return {"jaccard": jaccard(report.recovered, truth), "recovered": float(len(report.recovered)),
                "truth": float(len(truth))}
    if report.kind == AttackKind.MONITOR:
        rows = report.rows
        hits = [r for r in rows if r["truth_us"] != ""]
        correct = [r for r in hits if r["reported_us"] != "" and 0 < int(r["reported_us"]) - int(r["truth_us"])
                   <= int(r["period_us"])]
        false_pos = [r for r in rows if r["truth_us"] == "" and r["reported_us"] != ""]
        return {"accuracy": len(correct) / len(hits) if hits else 0.0,
                "false_positives": float(len(false_pos)), "runs": float(len(rows))}
    metrics: Dict[str, float] = {}
    eps_values = sorted({int(r["epsilon_us"]) for r in report.rows})
    for eps in eps_values:
        sub = [r for r in report.rows if int(r["epsilon_us"]) == eps]
        s = score_verdicts([r["verdict"] for r in sub], [r["truth"] for r in sub])
        if len(eps_values) == 1:
            metrics.update(s)
        else:
            metrics.update({f"{k}@{eps}": v for k, v in s.items()})
            if eps == eps_values[0]:
                metrics.update(s)
    return metrics


# ----------------- trial drivers -----------------

@dataclass(frozen=True)
class TimingSetup:
    adversary: str
    neighbor: Optional[str]
    distant: Optional[str]
    cached_ref: Name
    source_refs: Tuple[Name, ...]
    targets: Tuple[Name, ...]


def _plan_timing(scenario: Scenario, cfg: AttackConfig) -> TimingSetup:
    t = scenario.topology
    consumers = t.consumers()
    if not consumers:
        raise ScenarioError("timing attack needs consumers")
    adv = cfg.adversary or consumers[0]
    if adv not in consumers:
        raise ScenarioError(f"adversary {adv!r} is not a consumer")
    candidates = cfg.victims or [c for c in consumers if c != adv]
    first_hop = t.attached_router(adv)
    neighbor = next((c for c in candidates if t.attached_router(c) == first_hop), None)
    distant = None
    for c in candidates:
        router, _size = shared_anonymity_set(t, adv, c)
        if router is not None and router != first_hop:
            distant = c
            break
    names = sorted(scenario.catalog)
    samples = max(cfg.samples, 5 if scenario.params.jitter_us else 1)
    if len(names) < 2 + samples:
        raise ScenarioError(f"timing attack needs at least {2 + samples} catalog names")
    return TimingSetup(adv, neighbor, distant, names[0], tuple(names[1:1 + samples]),
                       tuple(names[1 + samples:]) or (names[-1],))


def _default_epsilons(cal: TimingCalibration) -> List[int]:
    half = cal.per_hop_rtt // 2
    return [max(1, int(half * f)) for f in (0.1, 0.5, 1.0)]


def run_timing_trials(scenario: Scenario, defense: Optional[DefenseConfig] = None,
                      epsilons: Optional[Sequence[int]] = None, trials: Optional[int] = None,
                      seed: Optional[int] = None) -> AttackReport:
    """Balanced-class single-probe trials, one fresh network per trial.

    Calibration runs on an undefended replica, standing for what the adversary
    knows about the topology before the defense is switched on.
    """
    cfg = scenario.attack or AttackConfig()
    defense = defense if defense is not None else scenario.defense
    seed = scenario.params.seed if seed is None else seed
    trials = trials or cfg.trials
    setup = _plan_timing(scenario, cfg)

    replica = Network(scenario, DefenseConfig(kind=DefenseKind.NONE), seed=seed)
    base = calibrate(replica, setup.adversary, setup.cached_ref, setup.source_refs, 1,
                     samples=len(setup.source_refs))
    eps_list = list(epsilons or cfg.epsilon_us or _default_epsilons(base))

    classes = [Verdict.NOT_CACHED]
    if setup.neighbor:
        classes.append(Verdict.CACHED_AT_CLOSEST)
    if setup.distant:
        classes.append(Verdict.CACHED_UPSTREAM)
    rng = np.random.default_rng(seed)
    plan = rng.permutation(np.resize(np.arange(len(classes)), trials))

    report = AttackReport(AttackKind.TIMING)
    for trial, cls_ix in enumerate(plan):
        cls = classes[int(cls_ix)]
        target = setup.targets[int(rng.integers(len(setup.targets)))]
        net = Network(scenario, defense, seed=seed + trial + 1)
        victim = {Verdict.CACHED_AT_CLOSEST: setup.neighbor, Verdict.CACHED_UPSTREAM: setup.distant}.get(cls)
        if victim is not None:
            net.wait(net.fetch(victim, Interest(target)))
        truth = ground_truth(net, setup.adversary, target)
        rtt = net.measure_rtt(setup.adversary, Interest(target))
        for eps in eps_list:
            v = classify(base.with_epsilon(eps), rtt)
            report.rows.append({
                "trial": trial,
                "name": str(target),
                "planted": cls.value,
                "truth": truth.kind.value,
                "truth_distance": "" if truth.distance is None else truth.distance,
                "rtt_us": "" if rtt is None else rtt,
                "epsilon_us": eps,
                "verdict": v.kind.value,
                "distance": "" if v.distance is None else v.distance,
                "anomaly": int(v.anomaly),
            })
    report.metrics = score(report)
    anomalies = sum(int(r["anomaly"]) for r in report.rows)
    if anomalies:
        logger.warning("Timing classification flagged %d anomalies", anomalies)
    logger.info("Timing attack: accuracy=%.3f over %d trials", report.metrics.get("accuracy", 0.0), trials,
                extra={"defense": defense.kind.value, "seed": seed})
    return report


def run_monitor_trials(scenario: Scenario, defense: Optional[DefenseConfig] = None,
                       trials: Optional[int] = None, seed: Optional[int] = None,
                       victim_time: Optional[int] = None, abstain_every: int = 2) -> AttackReport:
    """Victim fetches the target at victim_time in most runs and abstains in every abstain_every-th."""
    cfg = scenario.attack or AttackConfig(kind=AttackKind.MONITOR)
    defense = defense if defense is not None else scenario.defense
    seed = scenario.params.seed if seed is None else seed
    trials = trials or cfg.trials
    t = scenario.topology
    adv = cfg.adversary or t.consumers()[0]
    victims = cfg.victims or [c for c in t.consumers() if c != adv]
    if not victims:
        raise ScenarioError("monitoring needs a victim consumer")
    names = sorted(scenario.catalog)
    rng = np.random.default_rng(seed)
    report = AttackReport(AttackKind.MONITOR)
    for trial in range(trials):
        target = names[int(rng.integers(len(names)))]
        victim = victims[trial % len(victims)]
        if victim_time is not None:
            when = victim_time
        else:
            lo = cfg.start_us + cfg.period_us
            when = int(rng.integers(lo, max(lo + 1, cfg.horizon_us - 2 * cfg.period_us)))
        abstain = abstain_every > 0 and trial % abstain_every == abstain_every - 1
        net = Network(scenario, defense, seed=seed + trial + 1)
        if not abstain:
            net.schedule([Request(when, victim, target)])
        reported = monitor_content(net, adv, target, cfg.scope, cfg.period_us, cfg.horizon_us, cfg.start_us)
        report.rows.append({
            "trial": trial,
            "name": str(target),
            "victim": victim,
            "truth_us": "" if abstain else when,
            "reported_us": "" if reported is None else reported,
            "period_us": cfg.period_us,
            "scope": cfg.scope,
        })
    report.metrics = score(report)
    logger.info("Monitor attack: accuracy=%.3f false_positives=%d", report.metrics["accuracy"],
                int(report.metrics["false_positives"]), extra={"defense": defense.kind.value, "seed": seed})
    return report


def run_dump(scenario: Scenario, defense: Optional[DefenseConfig] = None, seed: Optional[int] = None) -> AttackReport:
    """Replay the scenario schedule, then dump the adversary's first-hop cache."""
    cfg = scenario.attack or AttackConfig(kind=AttackKind.DUMP)
    defense = defense if defense is not None else scenario.defense
    t = scenario.topology
    adv = cfg.adversary or t.consumers()[0]
    prefix = Name.parse(cfg.prefix)
    net = Network(scenario, defense, seed=seed)
    net.schedule(scenario.schedule)
    net.run()
    first_hop = t.attached_router(adv)
    snapshot = {n for n in net.router(first_hop).cs.names() if is_prefix_of(prefix, n)}
    result = dump_cache(net, adv, prefix, cfg.scope)
    report = AttackReport(AttackKind.DUMP, recovered=result.names)
    for i, n in enumerate(result.order):
        report.rows.append({"probe": i + 1, "name": str(n), "in_snapshot": int(n in snapshot)})
    inserted = result.names - snapshot
    if inserted:
        logger.warning("Dump recovered %d names inserted after the snapshot", len(inserted))
    report.metrics = score(report, snapshot)
    report.metrics["probes"] = float(result.probes)
    return report


def run_attack(scenario: Scenario, kind: Optional[AttackKind] = None,
               defense: Optional[DefenseConfig] = None, seed: Optional[int] = None) -> AttackReport:
    kind = kind or (scenario.attack.kind if scenario.attack else AttackKind.TIMING)
    if kind == AttackKind.TIMING:
        return run_timing_trials(scenario, defense, seed=seed)
    if kind == AttackKind.MONITOR:
        return run_monitor_trials(scenario, defense, seed=seed)
    if kind == AttackKind.DUMP:
        return run_dump(scenario, defense, seed=seed)
    raise ValueError(f"unknown attack {kind!r}; expected one of {[k.value for k in AttackKind]}")

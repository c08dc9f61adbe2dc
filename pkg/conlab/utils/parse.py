"""Scenario file grammar.

Sections start with a ``[name]`` line; ``#`` starts a comment; blank lines are
ignored. Durations take an ``us``, ``ms`` or ``s`` suffix (bare integers are
microseconds).

    [topology]   router|consumer|producer <id>
                 link <a> <b> <latency>
    [catalog]    <name> <size> <producer>
                 generate <count> <stem> <size> <producer>
    [schedule]   <time> <consumer> <name> [scope=N] [lifetime=T]
    [workload]   zipf exponent=S requests=N seed=N [interval=T] [start=T]
                      [consumers=a,b] [catalog=N]
    [attack]     <key> <value...>    (kind, adversary, epsilon, trials, scope,
                                      period, horizon, start, prefix, victims, samples)
    [defense]    <key> <value...>    (kind, k_min, k_max, p0, members, ewma_weight)
    [params]     <key> <value...>    (id, seed, cache_capacity, capacity <router> <n>,
                                      replacement, processing, jitter, pit_lifetime,
                                      bloom_m, bloom_h, bloom_seed, verify_signatures)
"""
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from ..errors import NameParseError, ScenarioError, ScenarioParseError
from ..models import AttackConfig, AttackKind, DefenseConfig, DefenseKind, Replacement, SimParams
from ..net.names import Name
from ..net.simnet import NodeKind, Request, Scenario, Topology
from ..processing.workload import workload_zipf

__all__ = ["parse_duration", "parse_scenario", "load_scenario"]

SECTIONS = ("topology", "catalog", "schedule", "workload", "attack", "defense", "params")
DURATION_RE = re.compile(r"^(\d+)(us|ms|s)?$")
UNITS = {None: 1, "us": 1, "ms": 1_000, "s": 1_000_000}
SECTION_RE = re.compile(r"^\[(\w+)\]$")


def parse_duration(text: str) -> int:
    m = DURATION_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad duration {text!r}; expected <int>[us|ms|s]")
    return int(m.group(1)) * UNITS[m.group(2)]


def _choices(enum) -> str:
    return ", ".join(e.value for e in enum)


def _enum(enum, value: str, what: str):
    try:
        return enum(value)
    except ValueError:
        raise ValueError(f"unknown {what} {value!r}; expected one of {_choices(enum)}") from None


def _kv(tokens: List[str]) -> Dict[str, str]:
    out = {}
    for t in tokens:
        k, sep, v = t.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {t!r}")
        out[k] = v
    return out


ATTACK_DURATIONS = {"period": "period_us", "horizon": "horizon_us", "start": "start_us"}
PARAM_DURATIONS = {"processing": "processing_us", "jitter": "jitter_us", "pit_lifetime": "pit_lifetime_us"}


class _Parser:
    def __init__(self):
        self.topology = Topology()
        self.catalog: List[Tuple[int, Name, int, str]] = []
        self.schedule: List[Tuple[int, Request]] = []
        self.workloads: List[Tuple[int, Dict[str, str]]] = []
        self.attack: Dict[str, object] = {}
        self.defense: Dict[str, object] = {}
        self.params: Dict[str, object] = {}
        self.overrides: Dict[str, int] = {}
        self.scenario_id = "scenario"
        self.lines: Dict[str, int] = {}

    def topology_line(self, tok: List[str]) -> None:
        head = tok[0]
        if head in ("router", "consumer", "producer"):
            if len(tok) != 2:
                raise ValueError(f"expected '{head} <id>'")
            self.topology.add_node(tok[1], NodeKind(head))
        elif head == "link":
            if len(tok) != 4:
                raise ValueError("expected 'link <a> <b> <latency>'")
            self.topology.add_link(tok[1], tok[2], parse_duration(tok[3]))
        else:
            raise ValueError(f"unknown topology statement {head!r}; expected router, consumer, producer or link")

    def catalog_line(self, tok: List[str], lineno: int) -> None:
        if tok[0] == "generate":
            if len(tok) != 5:
                raise ValueError("expected 'generate <count> <stem> <size> <producer>'")
            count, stem, size, producer = int(tok[1]), Name.parse(tok[2]), int(tok[3]), tok[4]
            width = len(str(max(count - 1, 0)))
            for i in range(count):
                self.catalog.append((lineno, stem.append(f"{i:0{width}d}"), size, producer))
            return
        if len(tok) != 3:
            raise ValueError("expected '<name> <size> <producer>'")
        self.catalog.append((lineno, Name.parse(tok[0]), int(tok[1]), tok[2]))

    def schedule_line(self, tok: List[str], lineno: int) -> None:
        if len(tok) < 3:
            raise ValueError("expected '<time> <consumer> <name> [scope=N] [lifetime=T]'")
        opts = _kv(tok[3:])
        unknown = set(opts) - {"scope", "lifetime"}
        if unknown:
            raise ValueError(f"unknown request options {sorted(unknown)}; expected scope, lifetime")
        req = Request(
            time=parse_duration(tok[0]),
            consumer=tok[1],
            name=Name.parse(tok[2]),
            scope=int(opts["scope"]) if "scope" in opts else None,
            lifetime=parse_duration(opts["lifetime"]) if "lifetime" in opts else None,
        )
        self.schedule.append((lineno, req))

    def workload_line(self, tok: List[str], lineno: int) -> None:
        if tok[0] != "zipf":
            raise ValueError(f"unknown workload {tok[0]!r}; expected zipf")
        self.workloads.append((lineno, _kv(tok[1:])))

    def attack_line(self, tok: List[str], lineno: int) -> None:
        key, vals = tok[0], tok[1:]
        self.lines[f"attack.{key}"] = lineno
        if key == "kind":
            self.attack["kind"] = _enum(AttackKind, vals[0], "attack")
        elif key == "epsilon":
            self.attack["epsilon_us"] = [parse_duration(v) for v in vals]
        elif key == "victims":
            self.attack["victims"] = vals
        elif key in ATTACK_DURATIONS:
            self.attack[ATTACK_DURATIONS[key]] = parse_duration(vals[0])
        elif key in ("adversary", "prefix"):
            self.attack[key] = vals[0]
        elif key in ("trials", "scope", "samples"):
            self.attack[key] = int(vals[0])
        else:
            raise ValueError(f"unknown attack key {key!r}")

    def defense_line(self, tok: List[str], lineno: int) -> None:
        key, vals = tok[0], tok[1:]
        self.lines[f"defense.{key}"] = lineno
        if key == "kind":
            self.defense["kind"] = _enum(DefenseKind, vals[0], "defense")
        elif key == "members":
            self.defense["members"] = vals
        elif key in ("k_min", "k_max"):
            self.defense[key] = int(vals[0])
        elif key in ("p0", "ewma_weight"):
            self.defense[key] = float(vals[0])
        else:
            raise ValueError(f"unknown defense key {key!r}")

    def params_line(self, tok: List[str], lineno: int) -> None:
        key, vals = tok[0], tok[1:]
        self.lines[f"params.{key}"] = lineno
        if key == "id":
            self.scenario_id = vals[0]
        elif key == "capacity":
            if len(vals) != 2:
                raise ValueError("expected 'capacity <router> <n>'")
            self.overrides[vals[0]] = int(vals[1])
        elif key == "replacement":
            self.params["replacement"] = _enum(Replacement, vals[0], "replacement policy")
        elif key in PARAM_DURATIONS:
            self.params[PARAM_DURATIONS[key]] = parse_duration(vals[0])
        elif key == "verify_signatures":
            self.params[key] = vals[0].lower() in ("1", "true", "yes", "on")
        elif key in ("seed", "cache_capacity", "bloom_m", "bloom_h", "bloom_seed"):
            self.params[key] = int(vals[0])
        else:
            raise ValueError(f"unknown params key {key!r}")

    def feed(self, section: str, tok: List[str], lineno: int) -> None:
        if section == "topology":
            self.topology_line(tok)
        elif section == "catalog":
            self.catalog_line(tok, lineno)
        elif section == "schedule":
            self.schedule_line(tok, lineno)
        elif section == "workload":
            self.workload_line(tok, lineno)
        elif section == "attack":
            self.attack_line(tok, lineno)
        elif section == "defense":
            self.defense_line(tok, lineno)
        else:
            self.params_line(tok, lineno)

    def _model(self, cls, data: Dict[str, object], section: str):
        try:
            return cls(**data)
        except ValidationError as e:
            err = e.errors()[0]
            field = str(err["loc"][0]) if err.get("loc") else ""
            line = next((n for k, n in self.lines.items() if k.startswith(section + ".")), 0)
            for k, n in self.lines.items():
                if k.startswith(section + ".") and field.startswith(k.split(".", 1)[1]):
                    line = n
            raise ScenarioParseError(line, f"[{section}] {field}: {err['msg']}") from None

    def build(self) -> Scenario:
        params = self._model(SimParams, {**self.params, "capacity_overrides": self.overrides}, "params")
        defense = self._model(DefenseConfig, self.defense, "defense")
        attack = self._model(AttackConfig, self.attack, "attack") if self.attack else None
        s = Scenario(topology=self.topology, attack=attack, defense=defense, params=params,
                     scenario_id=self.scenario_id)
        for lineno, name, size, producer in self.catalog:
            if self.topology.nodes.get(producer) != NodeKind.PRODUCER:
                raise ScenarioParseError(lineno, f"unknown producer {producer!r}")
            s.add_content(name, size, producer)

        requests = list(self.schedule)
        names = list(s.catalog)
        for lineno, opts in self.workloads:
            try:
                size = int(opts.get("catalog", len(names)))
                consumers = opts["consumers"].split(",") if "consumers" in opts else self.topology.consumers()
                reqs = workload_zipf(
                    size, float(opts.get("exponent", "1.0")), int(opts["requests"]),
                    int(opts.get("seed", params.seed)), names=names[:size], consumers=consumers,
                    start_us=parse_duration(opts.get("start", "0")),
                    interval_us=parse_duration(opts.get("interval", "1ms")),
                )
            except (KeyError, ValueError) as e:
                raise ScenarioParseError(lineno, f"bad zipf workload: {e}") from None
            requests.extend((lineno, r) for r in reqs)

        # stable: ties keep file order
        requests.sort(key=lambda lr: lr[1].time)
        for lineno, req in requests:
            if self.topology.nodes.get(req.consumer) != NodeKind.CONSUMER:
                raise ScenarioParseError(lineno, f"unknown consumer {req.consumer!r}")
            if req.name not in s.catalog:
                raise ScenarioParseError(lineno, f"{req.name} is not in the catalog")
        s.schedule = [r for _, r in requests]
        return s


def parse_scenario(text: str) -> Scenario:
    p = _Parser()
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = SECTION_RE.match(line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ScenarioParseError(lineno, f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}")
            continue
        if section is None:
            raise ScenarioParseError(lineno, "statement outside of a section")
        tok = line.split()
        try:
            p.feed(section, tok, lineno)
        except ScenarioParseError:
            raise
        except (ValueError, IndexError, NameParseError, ScenarioError) as e:
            msg = str(e) if not isinstance(e, IndexError) else "missing value"
            raise ScenarioParseError(lineno, msg) from None
    s = p.build()
    s.validate()
    return s


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text)

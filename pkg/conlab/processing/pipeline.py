# conlab/processing/pipeline.py
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..config import settings
from ..models import AttackConfig, AttackKind, DefenseConfig, DefenseKind, ExperimentResult
from ..net.simnet import Network, Scenario, Trace
from ..processing import attacks
from ..processing.metrics import run_metrics, to_rows

logger = logging.getLogger("conlab")

SWEEP_PARAMETERS = ("k_max", "k_min", "p0", "ewma_weight", "epsilon", "jitter", "cache_capacity", "seed")


def effective_seed(scenario: Scenario, seed: Optional[int] = None) -> int:
    """Explicit seed, else CONLAB_SEED, else the scenario's own."""
    if seed is not None:
        return seed
    env = settings.seed_override()
    return scenario.params.seed if env is None else env


def as_defense(d: Union[str, DefenseKind, DefenseConfig], base: Optional[DefenseConfig] = None) -> DefenseConfig:
    if isinstance(d, DefenseConfig):
        return d
    try:
        kind = DefenseKind(d)
    except ValueError:
        raise ValueError(f"unknown defense {d!r}; expected one of {', '.join(k.value for k in DefenseKind)}") from None
    template = base if base is not None else DefenseConfig()
    return template.model_copy(update={"kind": kind})


def run_simulation(scenario: Scenario, seed: Optional[int] = None,
                   defense: Optional[DefenseConfig] = None) -> Tuple[Trace, ExperimentResult]:
    seed = effective_seed(scenario, seed)
    defense = defense if defense is not None else scenario.defense
    base_extra = {"scenario": scenario.scenario_id, "seed": seed, "defense": defense.kind.value}
    logger.info("Simulation: Start (%d requests)", len(scenario.schedule), extra=base_extra)

    net = Network(scenario, defense, seed=seed)
    net.schedule(scenario.schedule)
    net.run()
    trace = net.finish()

    metrics = run_metrics(trace, scenario.topology)
    result = ExperimentResult(scenario_id=scenario.scenario_id, seed=seed, defense=defense.kind.value,
                              rows=to_rows(defense.kind.value, metrics))
    logger.info("Simulation: Finished (%d events)", len(trace), extra=base_extra)
    return trace, result


def evaluate_defense(scenario: Scenario, defense: DefenseConfig, seed: int) -> ExperimentResult:
    """Run metrics plus, when the scenario names an attack, its scores under this defense."""
    _trace, result = run_simulation(scenario, seed=seed, defense=defense)
    if scenario.attack is not None:
        report = attacks.run_attack(scenario, scenario.attack.kind, defense=defense, seed=seed)
        result.attack = scenario.attack.kind.value
        for k, v in report.metrics.items():
            if "@" not in k:
                result.rows += to_rows(defense.kind.value, {f"attack_{k}": v})
    return result


def compare_defenses(scenario: Scenario, defenses: Sequence[Union[str, DefenseConfig]],
                     seed: Optional[int] = None, workers: Optional[int] = None) -> List[ExperimentResult]:
    """One result per defense, "none" baseline always included, in the requested order."""
    seed = effective_seed(scenario, seed)
    configs: List[DefenseConfig] = [as_defense(d, scenario.defense) for d in defenses]
    if not any(c.kind == DefenseKind.NONE for c in configs):
        configs.insert(0, DefenseConfig(kind=DefenseKind.NONE))
    base_extra = {"scenario": scenario.scenario_id, "seed": seed, "defense": "-"}
    logger.info("Compare: %d defenses", len(configs), extra=base_extra)

    results: Dict[int, ExperimentResult] = {}
    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as ex:
        futs = {ex.submit(evaluate_defense, scenario, c, seed): i for i, c in enumerate(configs)}
        for fut in as_completed(futs):
            results[futs[fut]] = fut.result()

    logger.info("Compare: Finished", extra=base_extra)
    return [results[i] for i in range(len(configs))]


def _variant(scenario: Scenario, parameter: str, value: float) -> Tuple[Scenario, DefenseConfig, str]:
    label = f"{scenario.defense.kind.value}[{parameter}={value:g}]"
    if parameter in ("k_max", "k_min"):
        d = scenario.defense.model_copy(update={parameter: int(value)})
        if d.k_min > d.k_max:
            raise ValueError(f"{parameter}={value:g} leaves k_min > k_max")
        return scenario, d, label
    if parameter in ("p0", "ewma_weight"):
        return scenario, scenario.defense.model_copy(update={parameter: float(value)}), label
    if parameter == "epsilon":
        attack = (scenario.attack or AttackConfig()).model_copy(update={"epsilon_us": [int(value)]})
        return replace(scenario, attack=attack), scenario.defense, label
    if parameter == "jitter":
        return scenario.with_params(jitter_us=int(value)), scenario.defense, label
    if parameter == "cache_capacity":
        return scenario.with_params(cache_capacity=int(value)), scenario.defense, label
    if parameter == "seed":
        return scenario.with_seed(int(value)), scenario.defense, label
    raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {', '.join(SWEEP_PARAMETERS)}")


def sweep(scenario: Scenario, parameter: str, values: Sequence[float], seed: Optional[int] = None,
          workers: Optional[int] = None) -> List[ExperimentResult]:
    variants = [_variant(scenario, parameter, v) for v in values]
    results: Dict[int, ExperimentResult] = {}
    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as ex:
        futs = {}
        for i, (s, d, label) in enumerate(variants):
            run_seed = s.params.seed if parameter == "seed" else effective_seed(s, seed)
            futs[ex.submit(evaluate_defense, s, d, run_seed)] = (i, label)
        for fut in as_completed(futs):
            i, label = futs[fut]
            r = fut.result()
            r.defense = label
            for row in r.rows:
                row.defense = label
            results[i] = r
    return [results[i] for i in range(len(variants))]


def run_attack(scenario: Scenario, kind: Optional[AttackKind] = None, seed: Optional[int] = None):
    seed = effective_seed(scenario, seed)
    return attacks.run_attack(scenario, kind, seed=seed)

"""Command line: ``gesturesync {plan,simulate,eval}``.

Exit codes: 0 success, 2 invalid input, 3 planning failure, 4 provider or
network failure. Settings come from flags first, then the scenario file's
``config`` block, then built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from .constraints import ConstraintSet, load_constraints
from .emotion_input import ScenarioError, Scenario, read_scenario, speech_params
from .execution_sim import (
    MODES,
    DeviationModel,
    EMOTION_FIXTURES,
    predefined_label,
    make_eval_scenarios,
    plan_mode,
    run_ablation,
    run_eval,
)
from .joint_model import serialize_keyframe_script
from .metrics import SCHEMA_VERSION
from .motion_library import LibraryIndex, build_index, load_library
from .planner import HttpProvider, PlanningError, ProviderError, ScriptedMock
from .sync_monitor import MonitorConfig

EXIT_OK, EXIT_INPUT, EXIT_PLANNING, EXIT_PROVIDER = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "mode": "Full",
    "seed": 0,
    "sample_rate": 50.0,
    "epsilon_th": 0.150,
    "drift": None,
    "jitter": None,
    "speech_noise": 0.0,
}

log = logging.getLogger("gesturesync")


class InputError(Exception):
    pass


def _common(p: argparse.ArgumentParser, modes: Sequence[str]) -> None:
    p.add_argument("--scenario", action="append", help="scenario JSON file (repeatable for eval)")
    p.add_argument("--library", help="gesture library JSON (default: packaged NAO library)")
    p.add_argument("--constraints", help="joint table / constraints JSON (default: packaged NAO table)")
    p.add_argument("--mode", choices=modes, default=None)
    p.add_argument(
        "--provider",
        default="mock",
        help="'mock', a mock fixture JSON path, or an http(s) endpoint URL",
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--sample-rate", type=float, default=None, help="trajectory sample rate in Hz")
    p.add_argument("--epsilon-th", type=float, default=None, help="sync error threshold in seconds")
    p.add_argument("--drift", type=float, default=None, help="constant speech drift rate, e.g. 1.2")
    p.add_argument("--jitter", type=float, default=None, help="speech jitter stddev in seconds")
    p.add_argument("--speech-noise", type=float, default=None, help="relative speech-duration noise")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesturesync", description="Emotion-aware co-speech gesture planning and execution for a simulated NAO robot.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("plan", help="plan keyframe scripts and the alignment plan"), MODES)
    _common(sub.add_parser("simulate", help="plan, then execute against a simulated speech clock"), MODES)
    ev = sub.add_parser("eval", help="run the ablation over a scenario set")
    _common(ev, MODES + ("all",))
    ev.add_argument("--n-scenarios", type=int, default=10, help="size of the generated set when no --scenario")
    ev.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    return parser


# --------------------------------------------------------------------------
# configuration


def _resolve(args: argparse.Namespace, scenario: Scenario | None, key: str) -> Any:
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if scenario is not None and key in scenario.config:
        return scenario.config[key]
    return DEFAULTS[key]


def _existing(path: str | None, what: str) -> str | None:
    if path is not None and not Path(path).is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _load_scenarios(args: argparse.Namespace) -> list[Scenario]:
    return [read_scenario(_existing(p, "scenario file")) for p in args.scenario or []]


def _library(args: argparse.Namespace) -> LibraryIndex:
    return build_index(load_library(_existing(args.library, "library file")))


def _constraints(args: argparse.Namespace, scenario: Scenario | None = None) -> ConstraintSet:
    base = load_constraints(_existing(args.constraints, "constraints file"))
    # an explicit --constraints file wins over the scenario's own overrides
    if args.constraints is None and scenario is not None and "constraints" in scenario.config:
        return ConstraintSet.from_dict(scenario.config["constraints"], base)
    return base


def provider_factory(spec: str, constraints: ConstraintSet) -> Callable[[int], object]:
    if spec == "mock":
        return lambda seed: ScriptedMock(seed, constraints)
    if spec.startswith(("http://", "https://")):
        return lambda seed: HttpProvider(spec)
    path = _existing(spec, "provider fixture")
    return lambda seed: ScriptedMock.from_fixture(path, seed=seed, constraints=constraints)


def _deviation(args, scenario: Scenario | None, seed: int) -> DeviationModel:
    drift = _resolve(args, scenario, "drift")
    jitter = _resolve(args, scenario, "jitter")
    if drift is not None and jitter is not None:
        raise InputError("--drift and --jitter are mutually exclusive")
    if drift is not None:
        return DeviationModel.drift(float(drift))
    if jitter is not None:
        return DeviationModel.jitter(float(jitter), seed)
    return DeviationModel()


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def cmd_plan(args: argparse.Namespace) -> int:
    scenarios = _load_scenarios(args)
    if len(scenarios) != 1:
        raise InputError("plan needs exactly one --scenario")
    sc = scenarios[0]
    mode = _resolve(args, sc, "mode")
    seed = int(_resolve(args, sc, "seed"))
    constraints = _constraints(args, sc)
    provider = provider_factory(args.provider, constraints)(seed)
    mp = plan_mode(sc, mode, seed=seed, library=_library(args), constraints=constraints, provider=provider)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (seg, motion) in enumerate(zip(sc.segments, mp.motions)):
        name = f"segment_{i:02d}.txt"
        (out / name).write_text(serialize_keyframe_script(motion), encoding="utf-8")
        sp = speech_params(seg.valence, seg.arousal)
        entries.append(
            {
                "index": i,
                "script": name,
                "phrase": seg.phrase,
                "duration": motion.duration,
                "emotion_tag": motion.emotion_tag or predefined_label(seg),
                "speech": {"pitch_modifier": sp.pitch_modifier, "volume_modifier": sp.volume_modifier},
            }
        )
    log_data = {"schema_version": SCHEMA_VERSION, "segments": [s.to_dict() for s in mp.recovery_log]}
    _write_json(
        out / "plan.json",
        {
            "schema_version": SCHEMA_VERSION,
            "scenario": sc.name,
            "mode": mode,
            "seed": seed,
            "alignment": mp.plan.to_dict() if mp.plan else None,
            "segments": entries,
            "recovery_log": "recovery_log.json",
        },
    )
    _write_json(out / "recovery_log.json", log_data)
    print(f"planned {len(entries)} segment(s) -> {out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    scenarios = _load_scenarios(args)
    if len(scenarios) != 1:
        raise InputError("simulate needs exactly one --scenario")
    sc = scenarios[0]
    mode = _resolve(args, sc, "mode")
    seed = int(_resolve(args, sc, "seed"))
    constraints = _constraints(args, sc)
    result = run_ablation(
        sc,
        mode,
        seed=seed,
        deviation=_deviation(args, sc, seed),
        library=_library(args),
        constraints=constraints,
        provider=provider_factory(args.provider, constraints)(seed),
        monitor_config=MonitorConfig(epsilon_th=float(_resolve(args, sc, "epsilon_th"))),
        sample_rate=float(_resolve(args, sc, "sample_rate")),
        speech_noise=float(_resolve(args, sc, "speech_noise")),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.trajectory.to_csv(out / "trajectory.csv")
    (out / "events.jsonl").write_text(result.trace.events_jsonl(), encoding="utf-8")
    emotion = predefined_label(sc.segments[0])
    metrics = result.metrics(emotion)
    metrics["stage_latency_ms"] = {k: round(v, 3) for k, v in sorted(result.trace.latencies_ms.items())}
    _write_json(out / "metrics.json", metrics)
    print(f"{mode}: tsa {metrics['tsa_ms']:.1f} ms, {len(result.trace.events)} degrade event(s) -> {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    mode = args.mode or "all"
    modes = MODES if mode == "all" else (mode,)
    seed = args.seed if args.seed is not None else DEFAULTS["seed"]
    scenarios = _load_scenarios(args)
    if scenarios:
        pairs = [(sc, _deviation(args, sc, seed)) for sc in scenarios]
    else:
        pairs = make_eval_scenarios(args.n_scenarios, seed)
    constraints = _constraints(args)
    factory = provider_factory(args.provider, constraints)
    report = run_eval(
        pairs,
        modes,
        seed=seed,
        speech_noise=args.speech_noise if args.speech_noise is not None else 0.04,
        monitor_config=MonitorConfig(epsilon_th=args.epsilon_th or DEFAULTS["epsilon_th"]),
        sample_rate=args.sample_rate or DEFAULTS["sample_rate"],
        provider_factory=factory,
        library=_library(args),
        constraints=constraints,
        workers=max(1, args.workers),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    _write_json(out / "report.json", data)
    header = f"{'mode':<11} {'TSA ms (mean±sd)':>18} " + " ".join(f"{e:>8}" for e in EMOTION_FIXTURES) + f" {'lat ms':>8}"
    print(header)
    for row in data["rows"]:
        jerk = " ".join(f"{row['jerk_by_emotion'].get(e, float('nan')):8.2f}" for e in EMOTION_FIXTURES)
        tsa_txt = f"{row['tsa_ms_mean']:.1f}±{row['tsa_ms_sd']:.1f}"
        print(f"{row['mode']:<11} {tsa_txt:>18} {jerk} {row['latency_ms']['mean']:8.2f}")
    if "spearman_vs_reference" in data:
        print(f"Spearman vs reference ranking: {data['spearman_vs_reference']:.3f}")
    if "full_beats_nosync_every_scenario" in data:
        print(f"Full < NoSync on every scenario: {data['full_beats_nosync_every_scenario']}")
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "simulate": cmd_simulate, "eval": cmd_eval}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        dump = {"schema_version": SCHEMA_VERSION, "failed": exc.state.to_dict(),
                "segments": [s.to_dict() for s in exc.recovery_log]}
        print(json.dumps(dump, indent=2), file=sys.stderr)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "recovery_state.json", dump)
        return EXIT_PLANNING
    except ProviderError as exc:
        print(f"provider error (attempts: {exc.attempts}): {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (InputError, ScenarioError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

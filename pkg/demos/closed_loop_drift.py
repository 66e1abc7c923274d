"""Speech runs 20% slower than predicted; watch the monitor catch up.

Run: python3 demos/closed_loop_drift.py
"""

from gesturesync import EmotionSegment, MonitorConfig, Scenario
from gesturesync.execution_sim import DeviationModel, default_index, run_ablation

phrases = [e.key_phrase for e in default_index().examples][:4]
scenario = Scenario(tuple(EmotionSegment(p, p + ".", 0, 0, 1.0) for p in phrases), name="drift-demo")
config = MonitorConfig(epsilon_th=0.150)

for mode in ("Full", "NoSync"):
    res = run_ablation(scenario, mode, deviation=DeviationModel.drift(1.2), monitor_config=config)
    tr = res.trace
    print(f"{mode}:")
    print("  windowed e_sync per checkpoint:", [round(e, 3) for e in tr.e_sync])
    print("  classes:", [c.value for c in tr.classes])
    for ev in tr.events:
        print(f"  t={ev.t:.2f}s {ev.action} segments {list(ev.segments_affected)} "
              f"pace {ev.pace:.2f}, projected error {ev.e_sync_before:.3f} -> {ev.e_sync_after:.3f} s")
    print(f"  TSA {res.tsa_ms:.1f} ms\n")

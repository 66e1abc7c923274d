"""Plan the two-segment utterance and look at every stage.

Run: python3 demos/two_segment_walkthrough.py
"""

from importlib import resources

from gesturesync import (
    ScriptedMock,
    build_index,
    default_constraints,
    estimate_beta,
    load_library,
    plan_alignment,
    plan_sequence,
    read_scenario,
    semantic_search,
    serialize_keyframe_script,
    speech_params,
    synthesize_trajectory,
)

scenario = read_scenario(resources.files("gesturesync") / "data" / "scenarios" / "two_segment.json")
library = build_index(load_library())
constraints = default_constraints()

# Affect first: arousal sets the duration scale, valence/arousal the voice.
for seg in scenario.segments:
    sp = speech_params(seg.valence, seg.arousal)
    print(f"{seg.phrase!r}: beta {estimate_beta(seg.arousal):.2f}, "
          f"pitch x{sp.pitch_modifier:.2f}, volume x{sp.volume_modifier:.2f}")

plan = plan_alignment(scenario.segments)
print("\nweights", [round(w, 4) for w in plan.weights])
print("starts ", [round(t, 4) for t in plan.start_times], "total", round(plan.total_duration, 4))

# What the generator is shown for the first segment.
hits = semantic_search(library, scenario.segments[0].phrase, 3)
print("\nretrieved:", [(ex.key_phrase, round(score, 3)) for ex, score in hits])

result = plan_sequence(scenario.segments, library, constraints, ScriptedMock(0, constraints),
                       durations=list(plan.interval_durations))
print("\n" + result.prompts[0].render()[:600] + "...\n")
for i, motion in enumerate(result.segments):
    print(f"segment {i}: {motion.duration:.4f} s, {len(motion.tracks)} tracks")
    print(serialize_keyframe_script(motion).splitlines()[1][:100])

traj = synthesize_trajectory(result.segments, plan, 50.0, "bezier")
print(f"\ntrajectory: {traj.angles.shape[0]} samples x {len(traj.joints)} joints")

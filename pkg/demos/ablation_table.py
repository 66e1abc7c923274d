"""Six pipeline configurations over the seeded ten-scenario set.

Run: python3 demos/ablation_table.py
"""

from gesturesync.execution_sim import MODES, REFERENCE_RANKING, make_eval_scenarios, run_eval

report = run_eval(make_eval_scenarios(10, 0), MODES, seed=0)
data = report.to_dict()
print(f"{'mode':<11}{'TSA ms':>10}{'happy':>9}{'sad':>9}{'angry':>9}")
for row in sorted(data["rows"], key=lambda r: r["tsa_ms_mean"]):
    j = row["jerk_by_emotion"]
    print(f"{row['mode']:<11}{row['tsa_ms_mean']:>10.1f}{j['happy']:>9.1f}{j['sad']:>9.1f}{j['angry']:>9.1f}")
print("\nreference order:", " < ".join(REFERENCE_RANKING))
print(f"Spearman {report.spearman():.3f}; Full beats NoSync on "
      f"{sum(report.paired_better())}/{len(report.paired_better())} scenarios")

"""The six-scenario comparison on the random 20-job workload.

Runs NONE, CM, CM_S, CM_G, CM_S_TG and CM_G_TG over five seeds with the
bundled calibrated parameters and prints the mean table plus the four
headline improvements of CM_G_TG.
"""

from grainsched.experiments import compare, matrix

table = compare(matrix("exp2"), seeds=[1, 2, 3, 4, 5], baseline="NONE")
print(table.render())

none, cm, tg = (table.mean_row(s) for s in ("NONE", "CM", "CM_G_TG"))
for metric in ("overall_response_s", "makespan_s"):
    for base in (none, cm):
        b, v = getattr(base, metric), getattr(tg, metric)
        print(f"CM_G_TG vs {base.scenario:<4} {metric:<19} {float((b - v) / b):+.1%}")

print("\nmean EP-STREAM run time:")
for s in ("CM", "CM_S", "CM_S_TG", "CM_G_TG"):
    print(f"  {s:<8} {float(table.mean_row(s).run_mean('EP-STREAM')):8.1f} s")

"""Experiment 3: the same arrivals under Kubeflow- and Volcano-style defaults.

A single all-in-one worker (Kubeflow) behaves like CM. One process per
container spread across every node (Volcano's default) drags the
network-bound jobs across the wire and stretches the makespan.
"""

from grainsched.experiments import compare, matrix

table = compare(matrix("exp3"), seeds=[1, 2, 3, 4, 5], baseline="CM")
for row in table.rows:
    if row.is_mean:
        print(f"{row.scenario:<9} makespan {float(row.makespan_s):9.0f} s "
              f"({float(row.makespan_s / table.mean_row('CM').makespan_s):.2f}x CM)")

"""Shrinking the regularisation: do the trajectories settle down?

Every ladder member starts from bit-identical data; the harness reports the
L1 distance of n between consecutive members at the final time.
"""
from chemoflow.harness import parse_config, sweep_epsilon

cfg = parse_config({
    "m": 1.5,
    "grad_phi": [0.0, -1.0],
    "grid": {"dims": [24, 24], "extents": [2.0, 2.0]},
    "time": {"horizon": 0.2},
    "initial": {"u_amplitude": 0.1},
})
ladder = [0.4, 0.2, 0.1, 0.05]
res = sweep_epsilon(cfg, ladder, workers=2)

for (a, b), d, c, u in zip(zip(ladder, ladder[1:]), res.n_l1, res.c_l2, res.u_l2):
    print(f"eps {a:<5} -> {b:<5}  |dn|_1={d:.3e}  |dc|_2={c:.3e}  |du|_2={u:.3e}")
print("trend", "ok" if res.trend_ok else "violated")

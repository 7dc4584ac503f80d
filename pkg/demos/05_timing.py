"""
How much faster is inference?
=============================

Per-sample cost of one forward pass (inside a 200-sample batch) against
single-sample bisection calls. The network here is untrained; inference
cost does not depend on the weights.
"""

from cfpower import SystemParams, build_dataset, init_mlp
from cfpower.report import EqualPower, ModelMethod, SolverMethod, bench_timing

params = SystemParams()
test = build_dataset(params, 200, seed=5)
model = init_mlp((8, 128, 64, 8), seed=0)

rep = bench_timing(test, [SolverMethod("maxmin"), ModelMethod(model), EqualPower()])
for name, t in rep.sec_per_sample.items():
    print(f"{name:>11}: {t:.2e} s per sample")
print(f"speed-up {rep.ratio('opt-maxmin', 'dl'):.0f}x on {rep.hardware}")

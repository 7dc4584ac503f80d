"""
Sum-rate and proportional-fair objectives
=========================================

The same network, trained with the sum-rate loss and with the product
(log of log-rate) loss, on 20 users and 50 APs.
"""

from cfpower import LossSpec, SystemParams, TrainConfig, build_dataset, train
from cfpower.pipeline import DEFAULT_LR
from cfpower.report import EqualPower, ModelMethod, SolverMethod, compare_methods

params = SystemParams(num_ues=20, num_aps=50)
data = build_dataset(params, 2000, seed=1)
test = build_dataset(params, 30, seed=2)

for kind, metric in (("sum_rate", "median_sum_se"), ("product", "median_geomean_se")):
    cfg = TrainConfig(epochs=60, lr0=DEFAULT_LR[kind], lr_drop_epoch=40, loss=LossSpec(kind))
    model, curve = train(data, cfg)
    rep = compare_methods(test, [ModelMethod(model), SolverMethod(kind), EqualPower()])
    row = "  ".join(f"{n} {rep.summary[n][metric]:.3f}" for n in rep.methods)
    print(f"{kind:>8}: final loss {curve.loss[-1]:.3f}; {metric}: {row}")

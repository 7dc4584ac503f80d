"""
Learning max-min power control
==============================

Train the network on aggregated large-scale fading with the max-min loss
and compare it with bisection and with equal power on fresh samples.
Sizes are reduced so the script runs in well under a minute; the
acceptance suite uses 10000 samples and 300 epochs.
"""

from cfpower import LossSpec, SystemParams, TrainConfig, build_dataset, train
from cfpower.report import EqualPower, ModelMethod, SolverMethod, compare_methods

params = SystemParams()                       # K=8, L=20
data = build_dataset(params, 2000, seed=1)
test = build_dataset(params, 200, seed=2)



def report(epoch, loss):
    if epoch % 20 == 0:
        print(f"epoch {epoch:3d} loss {loss:.4f}")


cfg = TrainConfig(epochs=80, lr0=0.3, lr_drop_epoch=40, loss=LossSpec("maxmin"))
model, curve = train(data, cfg, progress=report)
print("plateau epoch:", curve.plateau_epoch())

rep = compare_methods(test, [ModelMethod(model), SolverMethod("maxmin"), EqualPower()])
for name in rep.methods:
    s = rep.summary[name]
    print(f"{name:>11}: median min-SE {s['median_min_se']:.3f}  median sum-SE {s['median_sum_se']:.2f}  "
          f"5% SE {s['p5_se']:.3f}")

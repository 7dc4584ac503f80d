"""Central finite differences for checking analytic gradients."""

import numpy as np


def central_difference(f, x, h=1e-6):
    """Gradient of scalar ``f`` at ``x`` by central differences, one coordinate at a time."""
    x = np.array(x, dtype=float)
    grad = np.empty_like(x)
    flat, g = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """Norm-wise relative error, symmetric in its arguments."""
    a, b = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def end_to_end_check(model, spec, B, coeffs, h=1e-5):
    """Relative error between backprop and finite differences of loss(forward(theta)).

    ``B`` and ``coeffs`` describe one realization; the loss is that sample's loss.
    """
    from .neural import batch_loss_and_grads, forward, loss_value
    from .metrics import sinr

    _, (dws, dbs) = batch_loss_and_grads(model, spec, B, coeffs)
    analytic = np.concatenate([p.ravel() for wb in zip(dws, dbs) for p in wb])

    def f(theta):
        eta, _ = forward(model.with_flat_params(theta), B)
        return float(loss_value(spec, sinr(coeffs, eta)))

    numeric = central_difference(f, model.flat_params(), h)
    return relative_error(analytic, numeric)

"""Independent reference calculators for cross-checking the main code paths.

Everything here is written with plain ``math`` / ``fsum`` arithmetic,
deliberately sharing no code with the simulator or the numpy network:
these are the second route used by the test suite and the ``oracle`` CLI
subcommand to confirm the production formulas.
"""

from __future__ import annotations

import math
from math import fsum


def ref_path_loss(c: float, alpha: float, d_m: float, d_min: float = 1.0) -> float:
    d = max(d_m, d_min)
    return c / (d ** alpha)


def ref_sinr(gain: float, power: float, h: float, c: float, alpha: float,
             noise: float, interference: float, d_m: float) -> float:
    return gain * power * h * ref_path_loss(c, alpha, d_m) / (noise + interference)


def ref_data_rate(bandwidth: float, gain: float, power: float, h: float,
                  c: float, alpha: float, noise: float, interference: float,
                  d_m: float, max_range_m: float) -> float:
    if d_m > max_range_m:
        return 0.0
    s = ref_sinr(gain, power, h, c, alpha, noise, interference, d_m)
    return bandwidth * math.log2(1.0 + s)


def ref_fairness(flows, floor: float = 1.0) -> float:
    return fsum(math.log(max(x, floor)) for x in flows)


def ref_throughput(bytes_completed_jobs: float, bytes_delivered_lost_jobs: float,
                   window_s: float) -> float:
    return (bytes_completed_jobs + bytes_delivered_lost_jobs) / window_s


def ref_latency_reward(completion_time_s: float, deadline_s: float) -> float:
    return 10.0 * (1.0 - completion_time_s / deadline_s)


def ref_fedavg(models) -> list[float]:
    """Elementwise mean via compensated summation."""
    n = len(models)
    dim = len(models[0])
    return [fsum(m[i] for m in models) / n for i in range(dim)]


def ref_reptile(theta, adapted, beta: float) -> list[float]:
    """theta - beta * mean_i(theta - theta_i), computed coordinate-wise."""
    n = len(adapted)
    return [
        theta[j] - beta * fsum(theta[j] - a[j] for a in adapted) / n
        for j in range(len(theta))
    ]


def ref_forward(weights, biases, x):
    """Dense ReLU net forward pass with pure-python loops.

    ``weights[k]`` is a list of rows (fan_in x fan_out); the last layer is
    linear, all earlier layers pass through ReLU.
    """
    act = list(x)
    n_layers = len(weights)
    for k, (w, b) in enumerate(zip(weights, biases)):
        fan_in = len(w)
        fan_out = len(b)
        out = []
        for j in range(fan_out):
            z = fsum(act[i] * w[i][j] for i in range(fan_in)) + b[j]
            if k < n_layers - 1 and z < 0.0:
                z = 0.0
            out.append(z)
        act = out
    return act


def central_difference_gradient(loss_fn, params, eps: float = 1e-5):
    """Central finite-difference gradient of ``loss_fn`` at ``params``."""
    base = list(params)
    grad = []
    for i in range(len(base)):
        orig = base[i]
        base[i] = orig + eps
        hi = loss_fn(base)
        base[i] = orig - eps
        lo = loss_fn(base)
        base[i] = orig
        grad.append((hi - lo) / (2.0 * eps))
    return grad

"""Shared oracle helpers used by both the module tests and the acceptance suite."""

import numpy as np

from srngate import bptt, model, regularizer as reg
from srngate.model import LossKind, OutputActivation, SrnParams


def random_net(rng, n_in, n_hid, n_out, activation, scale=0.6):
    return SrnParams(
        w_in=rng.standard_normal((n_in, n_hid)) * scale,
        w_rec=rng.standard_normal((n_hid, n_hid)) * scale,
        w_out=rng.standard_normal((n_hid, n_out)) * scale,
        b=rng.standard_normal(n_hid) * 0.1,
        output_activation=activation,
    )


def loss_of(params, seq, target, kind):
    tr = model.forward(params, seq)
    return model.output_loss(tr, target, kind).loss


def fd_gradient(params, seq, target, kind, block, eps=1e-6):
    """Central finite differences of the loss over one weight block."""
    base = getattr(params, block)
    grad = np.zeros_like(base)
    flat = base.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_of(params, seq, target, kind)
        flat[i] = orig - eps
        dn = loss_of(params, seq, target, kind)
        flat[i] = orig
        grad.ravel()[i] = (up - dn) / (2 * eps)
    return grad


def random_tiny_case(seed, activation, kind):
    """One random tiny net with a matching sequence and target."""
    rng = np.random.default_rng(seed)
    n_in = int(rng.integers(1, 4))
    n_hid = int(rng.integers(2, 6))
    n_out = int(rng.integers(1, 4)) if kind is LossKind.MSE else int(rng.integers(2, 5))
    T = int(rng.integers(2, 9))
    params = random_net(rng, n_in, n_hid, n_out, activation)
    seq = rng.standard_normal((T, n_in))
    if kind is LossKind.MSE:
        target = rng.standard_normal(n_out)
    else:
        target = int(rng.integers(0, n_out))
    return params, seq, target, T


class _Minibatch:
    def __init__(self, inputs, targets, loss_kind, success_tolerance=0.04):
        self.inputs = inputs
        self.targets = targets
        self.loss_kind = loss_kind
        self.success_tolerance = success_tolerance


def theorem1_trial(seed, dw_scale=1e-5):
    """One sign-prediction trial: gate report vs actually applying the update.

    Returns (dS, second_order_estimate, observed_change) where the change is
    measured on the norm of the batch-mean deep delta after a full recompute
    at w_rec + dw.
    """
    rng = np.random.default_rng(seed)
    n_in, n_hid = int(rng.integers(1, 4)), int(rng.integers(3, 8))
    T = int(rng.integers(4, 10))
    h = T
    n_batch = int(rng.integers(2, 8))
    params = model.init_gaussian(n_in, n_hid, 2, sigma=float(rng.uniform(0.02, 0.12)),
                                 seed=seed, output_activation=OutputActivation.LINEAR)
    inputs = rng.standard_normal((n_batch, T, n_in))
    targets = rng.standard_normal((n_batch, 2))
    dw = rng.standard_normal((n_hid, n_hid))
    dw *= dw_scale / np.linalg.norm(dw)

    cfg = reg.RegConfig(h=h, r0=1e18, r0_absolute=True)
    batch = _Minibatch(inputs, targets, LossKind.MSE)
    report = reg.evaluate_minibatch(params, batch, cfg, dw)

    trace = model.forward_batch(params, inputs)
    _, deltas, _ = model.loss_batch(trace, targets, LossKind.MSE)
    back = bptt.backward(params, trace, deltas, bptt.BpttConfig(h=h))
    top = back.deltas[..., 0, :]
    s_mid = reg.deep_norm_half_sq(params, trace, top, h)
    s_up = reg.deep_norm_half_sq(params, trace, top, h, params.w_rec + dw)
    s_dn = reg.deep_norm_half_sq(params, trace, top, h, params.w_rec - dw)
    second_order = abs(s_up + s_dn - 2 * s_mid)

    moved = SrnParams(params.w_in, params.w_rec + dw, params.w_out, params.b,
                      params.output_activation)
    trace2 = model.forward_batch(moved, inputs)
    _, deltas2, _ = model.loss_batch(trace2, targets, LossKind.MSE)
    back2 = bptt.backward(moved, trace2, deltas2, bptt.BpttConfig(h=h))
    new_norm = float(np.linalg.norm(back2.deltas[..., h, :].mean(axis=0)))
    change = new_norm - float(np.sqrt(2 * report.S))
    return report.dS, second_order, change


def theorem1_hit_rate(n_trials, dw_scale=1e-5, seed_base=0):
    """Fraction of kept trials where sign(dS) predicts the norm change."""
    kept = hits = 0
    for seed in range(seed_base, seed_base + n_trials):
        dS, second_order, change = theorem1_trial(seed, dw_scale)
        if abs(dS) > 10 * second_order and change != 0.0:
            kept += 1
            hits += (dS > 0) == (change > 0)
    return hits, kept

"""The analytical differential dS of the deep-gradient norm, checked three
ways on one small network:

1. dS = (g, dg) against central finite differences of S with the forward
   trace frozen (this is the identity the gate relies on);
2. g against the deep delta that plain backpropagation produces;
3. the sign of dS against what actually happens to the deep norm after the
   candidate update is applied for real and everything is recomputed.

Run:  python3 demos/norm_differential_check.py
"""

import numpy as np

from srngate import bptt, model, regularizer as reg
from srngate.model import LossKind, SrnParams


def main():
    rng = np.random.default_rng(7)
    n_hid, T = 6, 8
    params = model.init_gaussian(2, n_hid, 1, sigma=0.05, seed=7)
    seq = rng.standard_normal((T, 2))
    target = rng.standard_normal(1)

    trace = model.forward(params, seq)
    res = model.output_loss(trace, target, LossKind.MSE)
    back = bptt.backward(params, trace, res.output_delta, bptt.BpttConfig(h=T))

    # 2. the two routes to the deep delta
    g = reg.compute_g(params, trace, back.deltas[0], T)
    gap = np.abs(g - back.deltas[T]).max()
    print(f"g vs backprop deep delta      : max |difference| = {gap:.3e}")

    # 1. directional derivative vs finite differences
    dw = rng.standard_normal((n_hid, n_hid))
    dw /= np.linalg.norm(dw)
    dg = reg.compute_dg(params, trace, back.deltas[0], dw, T)
    dS = float(g @ dg)
    eps = 1e-6
    s_up = reg.deep_norm_half_sq(params, trace, back.deltas[0], T,
                                 params.w_rec + eps * dw)
    s_dn = reg.deep_norm_half_sq(params, trace, back.deltas[0], T,
                                 params.w_rec - eps * dw)
    fd = (s_up - s_dn) / (2 * eps)
    print(f"dS = (g, dg)                  : {dS:+.6e}")
    print(f"central finite difference     : {fd:+.6e}")
    print(f"relative error                : {abs(dS - fd) / abs(fd):.2e}")

    # 3. apply a small real update in the direction dS likes / dislikes
    print("\napplying w_rec +/- 1e-5 * dw and recomputing the deep norm:")
    base = np.linalg.norm(back.deltas[T])
    for sign in (+1.0, -1.0):
        moved = SrnParams(params.w_in, params.w_rec + sign * 1e-5 * dw,
                          params.w_out, params.b, params.output_activation)
        tr2 = model.forward(moved, seq)
        res2 = model.output_loss(tr2, target, LossKind.MSE)
        back2 = bptt.backward(moved, tr2, res2.output_delta, bptt.BpttConfig(h=T))
        new = np.linalg.norm(back2.deltas[T])
        direction = "grew" if new > base else "shrank"
        print(f"  step {sign:+.0f}e-5 * dw (dS {sign * dS:+.3e}): "
              f"deep norm {base:.6e} -> {new:.6e} ({direction})")


if __name__ == "__main__":
    main()

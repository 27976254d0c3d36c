"""Pure-numpy recurrent core: the per-timestep loop, forward and backward.

This is the reference implementation of the hot kernels; the compiled
module in ``_core_cy`` mirrors it operation for operation. Shapes:

    E  (K, m, 3)   per-joint embedding maps
    Wa (r, m), Ua (r, H), ba (r,), va (r,)   joint-attention scorer
    Wx (4H, m), Wh (4H, H), b (4H,)          gate weights, order i|f|o|g
    X  (T, K, 3)   input coordinates

Per step: embed joints, score them against the previous hidden state
(tanh-scored additive attention), softmax into joint attention, build the
frame input as the attention-weighted embedding sum, then advance the
gated recurrent cell.
"""

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def recurrent_forward(E, Wa, Ua, ba, va, Wx, Wh, b, X):
    T, K, _ = X.shape
    m = E.shape[1]
    H = Wh.shape[1]
    dt = np.result_type(X, E)
    e = np.empty((T, K, m), dtype=dt)
    w = np.empty((T, K, va.shape[0]), dtype=dt)
    aprime = np.empty((T, K), dtype=dt)
    z = np.empty((T, m), dtype=dt)
    gates = np.empty((T, 4 * H), dtype=dt)
    c = np.empty((T, H), dtype=dt)
    h = np.empty((T, H), dtype=dt)
    h_prev = np.zeros(H, dtype=dt)
    c_prev = np.zeros(H, dtype=dt)
    for t in range(T):
        e_t = np.einsum("kmd,kd->km", E, X[t])
        pre = e_t @ Wa.T + (Ua @ h_prev + ba)[None, :]
        w_t = np.tanh(pre)
        s = w_t @ va
        s = s - s.max()
        exp_s = np.exp(s)
        a_t = exp_s / exp_s.sum()
        z_t = a_t @ e_t
        u = Wx @ z_t + Wh @ h_prev + b
        gi = _sigmoid(u[0:H])
        gf = _sigmoid(u[H:2 * H])
        go = _sigmoid(u[2 * H:3 * H])
        gg = np.tanh(u[3 * H:4 * H])
        c_t = gf * c_prev + gi * gg
        h_t = go * np.tanh(c_t)
        e[t], w[t], aprime[t], z[t] = e_t, w_t, a_t, z_t
        gates[t, 0:H], gates[t, H:2 * H] = gi, gf
        gates[t, 2 * H:3 * H], gates[t, 3 * H:4 * H] = go, gg
        c[t], h[t] = c_t, h_t
        h_prev, c_prev = h_t, c_t
    return {"e": e, "w": w, "aprime": aprime, "z": z,
            "gates": gates, "c": c, "h": h}


def recurrent_backward(E, Wa, Ua, ba, va, Wx, Wh, b, X, cache, dh_out, daprime):
    """Backpropagate through the timestep loop.

    dh_out (T, H): gradient arriving at each hidden state from outside the
    loop (temporal attention and classifier paths). daprime (T, K): gradient
    arriving at each joint-attention vector (the penalty path). Returns the
    parameter gradients.
    """
    T, K, _ = X.shape
    H = Wh.shape[1]
    e, w, aprime = cache["e"], cache["w"], cache["aprime"]
    z, gates, c, h = cache["z"], cache["gates"], cache["c"], cache["h"]

    dE = np.zeros_like(E)
    dWa = np.zeros_like(Wa)
    dUa = np.zeros_like(Ua)
    dba = np.zeros_like(ba)
    dva = np.zeros_like(va)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros_like(b)

    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else np.zeros(H)
        c_prev = c[t - 1] if t > 0 else np.zeros(H)
        gi, gf = gates[t, 0:H], gates[t, H:2 * H]
        go, gg = gates[t, 2 * H:3 * H], gates[t, 3 * H:4 * H]
        tc = np.tanh(c[t])

        dh = dh_out[t] + dh_carry
        do = dh * tc
        dc = dc_carry + dh * go * (1.0 - tc * tc)
        di = dc * gg
        df = dc * c_prev
        dg = dc * gi
        du = np.concatenate([
            di * gi * (1.0 - gi),
            df * gf * (1.0 - gf),
            do * go * (1.0 - go),
            dg * (1.0 - gg * gg),
        ])
        dWx += np.outer(du, z[t])
        dWh += np.outer(du, h_prev)
        db += du
        dz = Wx.T @ du
        dh_prev = Wh.T @ du
        dc_carry = dc * gf

        da = daprime[t] + e[t] @ dz
        de = aprime[t][:, None] * dz[None, :]
        ds = aprime[t] * (da - float(aprime[t] @ da))
        dpre = (ds[:, None] * va[None, :]) * (1.0 - w[t] * w[t])
        dva += w[t].T @ ds
        dWa += dpre.T @ e[t]
        dpre_sum = dpre.sum(axis=0)
        dUa += np.outer(dpre_sum, h_prev)
        dba += dpre_sum
        de += dpre @ Wa
        dh_prev += Ua.T @ dpre_sum
        dE += np.einsum("km,kd->kmd", de, X[t])

        dh_carry = dh_prev
    return {"embed": dE, "attn_w": dWa, "attn_u": dUa, "attn_b": dba,
            "attn_v": dva, "lstm_wx": dWx, "lstm_wh": dWh, "lstm_b": db}

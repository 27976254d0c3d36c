# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled recurrent core, mirroring _core_py operation for operation.

Same contract as the pure backend: float64 in, float64 out, identical
operation order so results match to rounding. The per-timestep loop is
written with typed memoryviews; all temporaries are preallocated.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()


cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def recurrent_forward(cnp.ndarray E_in, cnp.ndarray Wa_in, cnp.ndarray Ua_in,
                      cnp.ndarray ba_in, cnp.ndarray va_in, cnp.ndarray Wx_in,
                      cnp.ndarray Wh_in, cnp.ndarray b_in, cnp.ndarray X_in):
    cdef double[:, :, ::1] E = np.ascontiguousarray(E_in, dtype=np.float64)
    cdef double[:, ::1] Wa = np.ascontiguousarray(Wa_in, dtype=np.float64)
    cdef double[:, ::1] Ua = np.ascontiguousarray(Ua_in, dtype=np.float64)
    cdef double[::1] ba = np.ascontiguousarray(ba_in, dtype=np.float64)
    cdef double[::1] va = np.ascontiguousarray(va_in, dtype=np.float64)
    cdef double[:, ::1] Wx = np.ascontiguousarray(Wx_in, dtype=np.float64)
    cdef double[:, ::1] Wh = np.ascontiguousarray(Wh_in, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef double[:, :, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)

    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t K = X.shape[1]
    cdef Py_ssize_t m = E.shape[1]
    cdef Py_ssize_t r = va.shape[0]
    cdef Py_ssize_t H = Wh.shape[1]

    e_arr = np.empty((T, K, m))
    w_arr = np.empty((T, K, r))
    a_arr = np.empty((T, K))
    z_arr = np.empty((T, m))
    g_arr = np.empty((T, 4 * H))
    c_arr = np.empty((T, H))
    h_arr = np.empty((T, H))
    cdef double[:, :, ::1] e = e_arr
    cdef double[:, :, ::1] w = w_arr
    cdef double[:, ::1] aprime = a_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] h = h_arr

    cdef double[::1] h_prev = np.zeros(H)
    cdef double[::1] c_prev = np.zeros(H)
    cdef double[::1] s = np.empty(K)
    cdef double[::1] attn_hb = np.empty(r)
    cdef double[::1] u = np.empty(4 * H)

    cdef Py_ssize_t t, k, i, j
    cdef double acc, smax, ssum, gi, gf, go, gg, ct

    with nogil:
        for t in range(T):
            # per-joint embeddings e[t,k,:] = E[k] @ X[t,k]
            for k in range(K):
                for i in range(m):
                    acc = 0.0
                    for j in range(3):
                        acc += E[k, i, j] * X[t, k, j]
                    e[t, k, i] = acc
            # shared additive term Ua @ h_prev + ba
            for i in range(r):
                acc = ba[i]
                for j in range(H):
                    acc += Ua[i, j] * h_prev[j]
                attn_hb[i] = acc
            # scores s_k = va . tanh(Wa @ e_k + attn_hb)
            for k in range(K):
                acc = 0.0
                for i in range(r):
                    gi = attn_hb[i]
                    for j in range(m):
                        gi += Wa[i, j] * e[t, k, j]
                    gi = tanh(gi)
                    w[t, k, i] = gi
                    acc += va[i] * gi
                s[k] = acc
            # softmax over joints
            smax = s[0]
            for k in range(1, K):
                if s[k] > smax:
                    smax = s[k]
            ssum = 0.0
            for k in range(K):
                s[k] = exp(s[k] - smax)
                ssum += s[k]
            for k in range(K):
                aprime[t, k] = s[k] / ssum
            # frame input z[t] = a' @ e[t]
            for i in range(m):
                acc = 0.0
                for k in range(K):
                    acc += aprime[t, k] * e[t, k, i]
                z[t, i] = acc
            # gate pre-activations u = Wx @ z + Wh @ h_prev + b
            for i in range(4 * H):
                acc = b[i]
                for j in range(m):
                    acc += Wx[i, j] * z[t, j]
                for j in range(H):
                    acc += Wh[i, j] * h_prev[j]
                u[i] = acc
            for i in range(H):
                gi = _sigmoid(u[i])
                gf = _sigmoid(u[H + i])
                go = _sigmoid(u[2 * H + i])
                gg = tanh(u[3 * H + i])
                ct = gf * c_prev[i] + gi * gg
                gates[t, i] = gi
                gates[t, H + i] = gf
                gates[t, 2 * H + i] = go
                gates[t, 3 * H + i] = gg
                c[t, i] = ct
                h[t, i] = go * tanh(ct)
            for i in range(H):
                h_prev[i] = h[t, i]
                c_prev[i] = c[t, i]

    return {"e": e_arr, "w": w_arr, "aprime": a_arr, "z": z_arr,
            "gates": g_arr, "c": c_arr, "h": h_arr}


def recurrent_backward(cnp.ndarray E_in, cnp.ndarray Wa_in, cnp.ndarray Ua_in,
                       cnp.ndarray ba_in, cnp.ndarray va_in, cnp.ndarray Wx_in,
                       cnp.ndarray Wh_in, cnp.ndarray b_in, cnp.ndarray X_in,
                       dict cache, cnp.ndarray dh_out_in,
                       cnp.ndarray daprime_in):
    cdef double[:, :, ::1] E = np.ascontiguousarray(E_in, dtype=np.float64)
    cdef double[:, ::1] Wa = np.ascontiguousarray(Wa_in, dtype=np.float64)
    cdef double[:, ::1] Ua = np.ascontiguousarray(Ua_in, dtype=np.float64)
    cdef double[::1] va = np.ascontiguousarray(va_in, dtype=np.float64)
    cdef double[:, ::1] Wx = np.ascontiguousarray(Wx_in, dtype=np.float64)
    cdef double[:, ::1] Wh = np.ascontiguousarray(Wh_in, dtype=np.float64)
    cdef double[:, :, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef double[:, :, ::1] e = np.ascontiguousarray(cache["e"], dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(cache["w"], dtype=np.float64)
    cdef double[:, ::1] aprime = np.ascontiguousarray(cache["aprime"],
                                                      dtype=np.float64)
    cdef double[:, ::1] z = np.ascontiguousarray(cache["z"], dtype=np.float64)
    cdef double[:, ::1] gates = np.ascontiguousarray(cache["gates"],
                                                     dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(cache["c"], dtype=np.float64)
    cdef double[:, ::1] h = np.ascontiguousarray(cache["h"], dtype=np.float64)
    cdef double[:, ::1] dh_out = np.ascontiguousarray(dh_out_in,
                                                      dtype=np.float64)
    cdef double[:, ::1] daprime = np.ascontiguousarray(daprime_in,
                                                       dtype=np.float64)

    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t K = X.shape[1]
    cdef Py_ssize_t m = E.shape[1]
    cdef Py_ssize_t r = va.shape[0]
    cdef Py_ssize_t H = Wh.shape[1]

    dE_arr = np.zeros((K, m, 3))
    dWa_arr = np.zeros((r, m))
    dUa_arr = np.zeros((r, H))
    dba_arr = np.zeros(r)
    dva_arr = np.zeros(r)
    dWx_arr = np.zeros((4 * H, m))
    dWh_arr = np.zeros((4 * H, H))
    db_arr = np.zeros(4 * H)
    cdef double[:, :, ::1] dE = dE_arr
    cdef double[:, ::1] dWa = dWa_arr
    cdef double[:, ::1] dUa = dUa_arr
    cdef double[::1] dba = dba_arr
    cdef double[::1] dva = dva_arr
    cdef double[:, ::1] dWx = dWx_arr
    cdef double[:, ::1] dWh = dWh_arr
    cdef double[::1] db = db_arr

    cdef double[::1] dh_carry = np.zeros(H)
    cdef double[::1] dc_carry = np.zeros(H)
    cdef double[::1] dh = np.empty(H)
    cdef double[::1] dc = np.empty(H)
    cdef double[::1] du = np.empty(4 * H)
    cdef double[::1] dz = np.empty(m)
    cdef double[::1] dh_prev = np.empty(H)
    cdef double[::1] da = np.empty(K)
    cdef double[::1] ds = np.empty(K)
    cdef double[:, ::1] de = np.empty((K, m))
    cdef double[:, ::1] dpre = np.empty((K, r))
    cdef double[::1] dpre_sum = np.empty(r)

    cdef Py_ssize_t t, k, i, j
    cdef double acc, tc, gi, gf, go, gg, di, df, dg, do_, dot, wt

    with nogil:
        for t in range(T - 1, -1, -1):
            for i in range(H):
                tc = tanh(c[t, i])
                gi = gates[t, i]
                gf = gates[t, H + i]
                go = gates[t, 2 * H + i]
                gg = gates[t, 3 * H + i]
                dh[i] = dh_out[t, i] + dh_carry[i]
                do_ = dh[i] * tc
                dc[i] = dc_carry[i] + dh[i] * go * (1.0 - tc * tc)
                di = dc[i] * gg
                df = dc[i] * (c[t - 1, i] if t > 0 else 0.0)
                dg = dc[i] * gi
                du[i] = di * gi * (1.0 - gi)
                du[H + i] = df * gf * (1.0 - gf)
                du[2 * H + i] = do_ * go * (1.0 - go)
                du[3 * H + i] = dg * (1.0 - gg * gg)
                dc_carry[i] = dc[i] * gf
            for i in range(4 * H):
                acc = du[i]
                db[i] += acc
                for j in range(m):
                    dWx[i, j] += acc * z[t, j]
                if t > 0:
                    for j in range(H):
                        dWh[i, j] += acc * h[t - 1, j]
            for j in range(m):
                acc = 0.0
                for i in range(4 * H):
                    acc += Wx[i, j] * du[i]
                dz[j] = acc
            for j in range(H):
                acc = 0.0
                for i in range(4 * H):
                    acc += Wh[i, j] * du[i]
                dh_prev[j] = acc

            # joint attention: da_k = daprime + e_k . dz
            for k in range(K):
                acc = daprime[t, k]
                for j in range(m):
                    acc += e[t, k, j] * dz[j]
                da[k] = acc
            # softmax backward: ds = a' * (da - a'.da)
            dot = 0.0
            for k in range(K):
                dot += aprime[t, k] * da[k]
            for k in range(K):
                ds[k] = aprime[t, k] * (da[k] - dot)
            # de_k = a'_k * dz, then add attention-scorer path
            for k in range(K):
                for j in range(m):
                    de[k, j] = aprime[t, k] * dz[j]
            for i in range(r):
                dpre_sum[i] = 0.0
            for k in range(K):
                for i in range(r):
                    wt = w[t, k, i]
                    acc = ds[k] * va[i] * (1.0 - wt * wt)
                    dpre[k, i] = acc
                    dva[i] += wt * ds[k]
                    dpre_sum[i] += acc
                    for j in range(m):
                        dWa[i, j] += acc * e[t, k, j]
                for j in range(m):
                    acc = 0.0
                    for i in range(r):
                        acc += dpre[k, i] * Wa[i, j]
                    de[k, j] += acc
            for i in range(r):
                dba[i] += dpre_sum[i]
                if t > 0:
                    for j in range(H):
                        dUa[i, j] += dpre_sum[i] * h[t - 1, j]
                acc = 0.0
            for j in range(H):
                acc = 0.0
                for i in range(r):
                    acc += Ua[i, j] * dpre_sum[i]
                dh_prev[j] += acc
            for k in range(K):
                for j in range(m):
                    for i in range(3):
                        dE[k, j, i] += de[k, j] * X[t, k, i]
            for i in range(H):
                dh_carry[i] = dh_prev[i]

    return {"embed": dE_arr, "attn_w": dWa_arr, "attn_u": dUa_arr,
            "attn_b": dba_arr, "attn_v": dva_arr, "lstm_wx": dWx_arr,
            "lstm_wh": dWh_arr, "lstm_b": db_arr}

"""Compiled integration kernel for the rod state and its parameter derivatives.

The state is packed into one flat vector:
  p (3) | R row-major (9) | u (3) | dp (3n) | du (3n) | w (3n)
with derivative column j stored at offset 3*j inside each block. The
readable numpy versions of every right-hand side live in ``ivp``; this module
mirrors them with scalar arithmetic so that numba can compile them.
"""
import numpy as np
from numba import njit

FLEX = 0
RIGID = 1
OK = 0
NONFINITE = 1


@njit(cache=True)
def _cross(a0, a1, a2, b0, b1, b2):
    return a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0


@njit(cache=True)
def _rhs(y, out, n, kd, us, fc, lm, fcol):
    # R[a, b] = y[3 + 3a + b]
    R = y[3:12]
    u0, u1, u2 = y[12], y[13], y[14]
    # p' = R e3
    out[0] = R[2]
    out[1] = R[5]
    out[2] = R[8]
    # R' = R hat(u)
    for a in range(3):
        r0, r1, r2 = R[3 * a], R[3 * a + 1], R[3 * a + 2]
        out[3 + 3 * a] = r1 * u2 - r2 * u1
        out[4 + 3 * a] = r2 * u0 - r0 * u2
        out[5 + 3 * a] = r0 * u1 - r1 * u0
    # elastic moment m = K (u - u*)
    m0 = kd[0] * (u0 - us[0])
    m1 = kd[1] * (u1 - us[1])
    m2 = kd[2] * (u2 - us[2])
    c0, c1, c2 = _cross(u0, u1, u2, m0, m1, m2)
    # a = R^T f, b = R^T l
    a0 = R[0] * fc[0] + R[3] * fc[1] + R[6] * fc[2]
    a1 = R[1] * fc[0] + R[4] * fc[1] + R[7] * fc[2]
    b0 = R[0] * lm[0] + R[3] * lm[1] + R[6] * lm[2]
    b1 = R[1] * lm[0] + R[4] * lm[1] + R[7] * lm[2]
    b2 = R[2] * lm[0] + R[5] * lm[1] + R[8] * lm[2]
    # e3^ a = (-a1, a0, 0)
    out[12] = -(c0 - a1 + b0) / kd[0]
    out[13] = -(c1 + a0 + b1) / kd[1]
    out[14] = -(c2 + b2) / kd[2]

    op = 15
    ou = 15 + 3 * n
    ow = 15 + 6 * n
    t0, t1, t2 = R[2], R[5], R[8]
    for j in range(n):
        dpx = op + 3 * j
        dux = ou + 3 * j
        dwx = ow + 3 * j
        du0, du1, du2 = y[dux], y[dux + 1], y[dux + 2]
        w0, w1, w2 = y[dwx], y[dwx + 1], y[dwx + 2]
        # d(dp)/ds = w x (R e3)
        x0, x1, x2 = _cross(w0, w1, w2, t0, t1, t2)
        out[dpx] = x0
        out[dpx + 1] = x1
        out[dpx + 2] = x2
        # d(w)/ds = R du
        out[dwx] = R[0] * du0 + R[1] * du1 + R[2] * du2
        out[dwx + 1] = R[3] * du0 + R[4] * du1 + R[5] * du2
        out[dwx + 2] = R[6] * du0 + R[7] * du1 + R[8] * du2
        # dF_u/du du = K^-1 [ m x du - u x (K du) ]
        e0, e1, e2 = _cross(m0, m1, m2, du0, du1, du2)
        g0, g1, g2 = _cross(u0, u1, u2, kd[0] * du0, kd[1] * du1, kd[2] * du2)
        v0 = e0 - g0
        v1 = e1 - g1
        v2 = e2 - g2
        # rotation term: e3 x (R^T (w x f)) + R^T (w x l)
        q0, q1, q2 = _cross(w0, w1, w2, fc[0], fc[1], fc[2])
        h0 = R[0] * q0 + R[3] * q1 + R[6] * q2
        h1 = R[1] * q0 + R[4] * q1 + R[7] * q2
        v0 += -h1
        v1 += h0
        q0, q1, q2 = _cross(w0, w1, w2, lm[0], lm[1], lm[2])
        v0 += R[0] * q0 + R[3] * q1 + R[6] * q2
        v1 += R[1] * q0 + R[4] * q1 + R[7] * q2
        v2 += R[2] * q0 + R[5] * q1 + R[8] * q2
        out[dux] = v0 / kd[0]
        out[dux + 1] = v1 / kd[1]
        out[dux + 2] = v2 / kd[2]
    # direct f_tip terms: -K^-1 e3^ R^T e_k
    for k in range(3):
        j = fcol[k]
        if j >= 0:
            r0 = R[3 * k]
            r1 = R[3 * k + 1]
            out[ou + 3 * j] += r1 / kd[0]
            out[ou + 3 * j + 1] += -r0 / kd[1]


@njit(cache=True)
def _reproject(y):
    # Newton-Schulz polar iteration R <- R (3I - R^T R) / 2
    R = y[3:12]
    for _ in range(3):
        err = 0.0
        S = np.empty(9)
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += R[3 * c + a] * R[3 * c + b]
                S[3 * a + b] = acc
                d = acc - (1.0 if a == b else 0.0)
                err += d * d
        if err < 1e-30:
            return
        Rn = np.empty(9)
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    m = (3.0 if c == b else 0.0) - S[3 * c + b]
                    acc += R[3 * a + c] * m
                Rn[3 * a + b] = 0.5 * acc
        for k in range(9):
            R[k] = Rn[k]


@njit(cache=True)
def _record(trace, row, s, y):
    trace[row, 0] = s
    trace[row, 1:4] = y[0:3]
    trace[row, 4:7] = y[12:15]
    trace[row, 7:16] = y[3:12]


@njit(cache=True)
def _rigid(y, n, L, kd_prev, us_prev, kd_next, us_next, D, cur, Bs, ccol, has_act, is_tip, ltip, dltip):
    R = y[3:12]
    t0, t1, t2 = R[2], R[5], R[8]
    # body-frame field and dipole
    B0 = R[0] * Bs[0] + R[3] * Bs[1] + R[6] * Bs[2]
    B1 = R[1] * Bs[0] + R[4] * Bs[1] + R[7] * Bs[2]
    B2 = R[2] * Bs[0] + R[5] * Bs[1] + R[8] * Bs[2]
    d0 = d1 = d2 = 0.0
    if has_act:
        d0 = D[0, 0] * cur[0] + D[0, 1] * cur[1] + D[0, 2] * cur[2]
        d1 = D[1, 0] * cur[0] + D[1, 1] * cur[1] + D[1, 2] * cur[2]
        d2 = D[2, 0] * cur[0] + D[2, 1] * cur[1] + D[2, 2] * cur[2]
    tau0, tau1, tau2 = _cross(d0, d1, d2, B0, B1, B2)
    y[0] += L * t0
    y[1] += L * t1
    y[2] += L * t2
    op = 15
    ou = 15 + 3 * n
    ow = 15 + 6 * n
    dtau = np.zeros((3, n))
    for j in range(n):
        w0, w1, w2 = y[ow + 3 * j], y[ow + 3 * j + 1], y[ow + 3 * j + 2]
        x0, x1, x2 = _cross(w0, w1, w2, t0, t1, t2)
        y[op + 3 * j] += L * x0
        y[op + 3 * j + 1] += L * x1
        y[op + 3 * j + 2] += L * x2
        if has_act:
            q0, q1, q2 = _cross(w0, w1, w2, Bs[0], Bs[1], Bs[2])
            h0 = R[0] * q0 + R[3] * q1 + R[6] * q2
            h1 = R[1] * q0 + R[4] * q1 + R[7] * q2
            h2 = R[2] * q0 + R[5] * q1 + R[8] * q2
            c0, c1, c2 = _cross(d0, d1, d2, h0, h1, h2)
            dtau[0, j] = -c0
            dtau[1, j] = -c1
            dtau[2, j] = -c2
    if has_act:
        for k in range(3):
            j = ccol[k]
            if j >= 0:
                c0, c1, c2 = _cross(D[0, k], D[1, k], D[2, k], B0, B1, B2)
                dtau[0, j] += c0
                dtau[1, j] += c1
                dtau[2, j] += c2
    if is_tip:
        ltip[0] += tau0
        ltip[1] += tau1
        ltip[2] += tau2
        for j in range(n):
            for a in range(3):
                dltip[a, j] += dtau[a, j]
        return
    tau = (tau0, tau1, tau2)
    for a in range(3):
        ua = y[12 + a]
        y[12 + a] = us_next[a] + (kd_prev[a] * (ua - us_prev[a]) - tau[a]) / kd_next[a]
        for j in range(n):
            idx = ou + 3 * j + a
            y[idx] = (kd_prev[a] * y[idx] - dtau[a, j]) / kd_next[a]


@njit(cache=True)
def integrate(kind, plen, nsteps, kd, us, fdist, fafter, act, D, cur, Bs, ftip, lm, tipm,
              p0, R0, u0, dp0, du0, w0, ccol, fcol, want_trace):
    """Integrate base to tip. Returns (y, ltip, dltip, kd_end, us_end, status, s_fail, trace)."""
    n = dp0.shape[1]
    N = 15 + 9 * n
    y = np.zeros(N)
    y[0:3] = p0
    for a in range(3):
        for b in range(3):
            y[3 + 3 * a + b] = R0[a, b]
    y[12:15] = u0
    for j in range(n):
        for a in range(3):
            y[15 + 3 * j + a] = dp0[a, j]
            y[15 + 3 * n + 3 * j + a] = du0[a, j]
            y[15 + 6 * n + 3 * j + a] = w0[a, j]

    ltip = tipm.copy()
    dltip = np.zeros((3, n))
    npc = kind.shape[0]
    rows = 1
    if want_trace:
        for i in range(npc):
            rows += nsteps[i] if kind[i] == FLEX else 1
    trace = np.zeros((rows, 16))
    row = 0
    s = 0.0
    if want_trace:
        _record(trace, row, s, y)
        row += 1

    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    yt = np.empty(N)
    fc = np.empty(3)
    last_flex = 0
    for i in range(npc):
        if kind[i] == FLEX:
            last_flex = i
            h = plen[i] / nsteps[i]
            for st in range(nsteps[i]):
                t = st * h
                for a in range(3):
                    fc[a] = ftip[a] + fafter[i, a] + fdist[i, a] * (plen[i] - t)
                _rhs(y, k1, n, kd[i], us[i], fc, lm, fcol)
                for q in range(N):
                    yt[q] = y[q] + 0.5 * h * k1[q]
                for a in range(3):
                    fc[a] = ftip[a] + fafter[i, a] + fdist[i, a] * (plen[i] - t - 0.5 * h)
                _rhs(yt, k2, n, kd[i], us[i], fc, lm, fcol)
                for q in range(N):
                    yt[q] = y[q] + 0.5 * h * k2[q]
                _rhs(yt, k3, n, kd[i], us[i], fc, lm, fcol)
                for q in range(N):
                    yt[q] = y[q] + h * k3[q]
                for a in range(3):
                    fc[a] = ftip[a] + fafter[i, a] + fdist[i, a] * (plen[i] - t - h)
                _rhs(yt, k4, n, kd[i], us[i], fc, lm, fcol)
                for q in range(N):
                    y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
                _reproject(y)
                s += h
                for q in range(15):
                    if not np.isfinite(y[q]):
                        return y, ltip, dltip, kd[last_flex], us[last_flex], NONFINITE, s, trace
                if want_trace:
                    _record(trace, row, s, y)
                    row += 1
        else:
            a_idx = act[i]
            has_act = a_idx >= 0
            ai = a_idx if has_act else 0
            is_tip = i == npc - 1
            nxt = i + 1 if not is_tip else last_flex
            _rigid(y, n, plen[i], kd[last_flex], us[last_flex], kd[nxt], us[nxt],
                   D[ai], cur[ai], Bs, ccol[ai], has_act, is_tip, ltip, dltip)
            s += plen[i]
            if want_trace:
                _record(trace, row, s, y)
                row += 1
    return y, ltip, dltip, kd[last_flex], us[last_flex], OK, s, trace

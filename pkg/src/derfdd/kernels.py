"""Hot loops.

Everything here is written in the scalar-loop subset numba compiles.  With
``DERFDD_NUMBA=0`` the same functions run as plain Python, except the KNN
search whose fallback is a separate vectorised numpy routine.  Both KNN
paths accumulate squared distances dimension by dimension in the same
order, so they agree bit for bit.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, jit

TWO_PI = 2.0 * math.pi
PHASE_SHIFT = TWO_PI / 3.0

# Layout of the packed circuit-parameter vector.
CP_R1, CP_R2, CP_L1, CP_L2, CP_C, CP_VDC, CP_OMEGA, CP_VPK, CP_FSW = range(9)
# Layout of the packed controller-gain vector.
CG_KP_I, CG_KI_I, CG_KP_PLL, CG_KI_PLL, CG_ID_REF, CG_IQ_REF, CG_OMEGA0, CG_VNORM = range(8)
# Layout of the packed controller state.
CS_THETA, CS_OMEGA, CS_PLL_INT, CS_XD, CS_XQ = range(5)


@jit
def park(a, b, c, theta):
    """Amplitude-invariant Park transform of one sample."""
    ca = math.cos(theta)
    cb = math.cos(theta - PHASE_SHIFT)
    cc = math.cos(theta + PHASE_SHIFT)
    sa = math.sin(theta)
    sb = math.sin(theta - PHASE_SHIFT)
    sc = math.sin(theta + PHASE_SHIFT)
    d = (2.0 / 3.0) * (a * ca + b * cb + c * cc)
    q = -(2.0 / 3.0) * (a * sa + b * sb + c * sc)
    return d, q


@jit
def inv_park(d, q, theta):
    a = d * math.cos(theta) - q * math.sin(theta)
    b = d * math.cos(theta - PHASE_SHIFT) - q * math.sin(theta - PHASE_SHIFT)
    c = d * math.cos(theta + PHASE_SHIFT) - q * math.sin(theta + PHASE_SHIFT)
    return a, b, c


@jit
def pll_update(va, vb, vc, cs, gains, dt):
    """SRF-PLL: PI on the normalised q-axis voltage sets the frequency."""
    d, q = park(va, vb, vc, cs[CS_THETA])
    err = q / gains[CG_VNORM]
    cs[CS_PLL_INT] += gains[CG_KI_PLL] * err * dt
    cs[CS_OMEGA] = gains[CG_OMEGA0] + gains[CG_KP_PLL] * err + cs[CS_PLL_INT]
    th = cs[CS_THETA] + cs[CS_OMEGA] * dt
    th = th % TWO_PI
    if th < 0.0:
        th += TWO_PI
    cs[CS_THETA] = th


@jit
def pi_current_update(iga, igb, igc, va, vb, vc, cs, gains, vdc, dt, m_out):
    """dq PI on grid current with PCC feedforward; writes the clamped
    modulation to ``m_out`` and returns True when it saturated.

    Integrators freeze while the output is saturated.
    """
    theta = cs[CS_THETA]
    i_d, i_q = park(iga, igb, igc, theta)
    v_d, v_q = park(va, vb, vc, theta)
    ed = gains[CG_ID_REF] - i_d
    eq = gains[CG_IQ_REF] - i_q
    xd = cs[CS_XD] + gains[CG_KI_I] * ed * dt
    xq = cs[CS_XQ] + gains[CG_KI_I] * eq * dt
    ud = gains[CG_KP_I] * ed + xd + v_d
    uq = gains[CG_KP_I] * eq + xq + v_q
    a, b, c = inv_park(ud, uq, theta)
    half = 0.5 * vdc
    m_out[0] = a / half
    m_out[1] = b / half
    m_out[2] = c / half
    sat = False
    for j in range(3):
        if m_out[j] > 1.0:
            m_out[j] = 1.0
            sat = True
        elif m_out[j] < -1.0:
            m_out[j] = -1.0
            sat = True
    if not sat:
        cs[CS_XD] = xd
        cs[CS_XQ] = xq
    return sat


@jit
def _source(t, cp, out):
    th = cp[CP_OMEGA] * t
    out[0] = cp[CP_VPK] * math.cos(th)
    out[1] = cp[CP_VPK] * math.cos(th - PHASE_SHIFT)
    out[2] = cp[CP_VPK] * math.cos(th + PHASE_SHIFT)


@jit
def pcc_voltage(x, t, amat, bmat, cp, vsrc, out):
    """PCC voltages from the algebraic nodal relation ``A v_src + B i_g``."""
    _source(t, cp, vsrc)
    for j in range(3):
        acc = 0.0
        for k in range(3):
            acc += amat[j, k] * vsrc[k] + bmat[j, k] * x[6 + k]
        out[j] = acc


@jit
def _deriv(x, t, vinv, amat, bmat, cp, vsrc, vpcc, dx):
    pcc_voltage(x, t, amat, bmat, cp, vsrc, vpcc)
    for j in range(3):
        dx[j] = (vinv[j] - x[3 + j] - cp[CP_R1] * x[j]) / cp[CP_L1]
        dx[3 + j] = (x[j] - x[6 + j]) / cp[CP_C]
        dx[6 + j] = (x[3 + j] - vpcc[j] - cp[CP_R2] * x[6 + j]) / cp[CP_L2]


@jit
def advance(x, t, m, substeps, dt, amat, bmat, cp, switched, work):
    """Integrate the filter over ``substeps`` RK4 steps with the modulation
    held constant.  ``work`` is a (9, 9) scratch array."""
    vinv = work[0, :3]
    vsrc = work[0, 3:6]
    vpcc = work[0, 6:9]
    k1 = work[1]
    k2 = work[2]
    k3 = work[3]
    k4 = work[4]
    xs = work[5]
    half = 0.5 * cp[CP_VDC]
    for s in range(substeps):
        ts = t + s * dt
        if switched:
            ph = (ts * cp[CP_FSW]) % 1.0
            car = 1.0 - 4.0 * abs(ph - 0.5)
            for j in range(3):
                vinv[j] = half if m[j] >= car else -half
        else:
            for j in range(3):
                vinv[j] = m[j] * half
        _deriv(x, ts, vinv, amat, bmat, cp, vsrc, vpcc, k1)
        for i in range(9):
            xs[i] = x[i] + 0.5 * dt * k1[i]
        _deriv(xs, ts + 0.5 * dt, vinv, amat, bmat, cp, vsrc, vpcc, k2)
        for i in range(9):
            xs[i] = x[i] + 0.5 * dt * k2[i]
        _deriv(xs, ts + 0.5 * dt, vinv, amat, bmat, cp, vsrc, vpcc, k3)
        for i in range(9):
            xs[i] = x[i] + dt * k3[i]
        _deriv(xs, ts + dt, vinv, amat, bmat, cp, vsrc, vpcc, k4)
        for i in range(9):
            x[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@jit
def simulate_closed_loop(x, cs, t0, n_samples, rec_every, ctrl_every, dt, fault_idx,
                         amats, bmats, cp, gains, switched,
                         rec_vpcc, rec_il, rec_ig, rec_m, rec_vsrc):
    """Plant plus conventional controller on a fixed integrator grid.

    The controller updates every ``ctrl_every`` integrator steps and holds
    its modulation in between; a row is recorded every ``rec_every`` steps.
    Row ``k`` holds the measurements at ``t0 + k*rec_every*dt`` together
    with the modulation in force from that instant.  ``x`` (9,) and ``cs``
    (5,) are updated in place.  Returns ``(n_saturated, bad_row)`` where
    ``bad_row`` is -1 unless the state went non-finite.
    """
    work = np.zeros((9, 9))
    vsrc = np.zeros(3)
    vpcc = np.zeros(3)
    m = np.zeros(3)
    ctrl_period = ctrl_every * dt
    n_sat = 0
    n_steps = n_samples * rec_every
    for s in range(n_steps):
        t = t0 + s * dt
        row = s // rec_every
        f = fault_idx[row] + 1
        amat = amats[f]
        bmat = bmats[f]
        if s % ctrl_every == 0:
            pcc_voltage(x, t, amat, bmat, cp, vsrc, vpcc)
            if pi_current_update(x[6], x[7], x[8], vpcc[0], vpcc[1], vpcc[2],
                                 cs, gains, cp[CP_VDC], ctrl_period, m):
                n_sat += 1
            pll_update(vpcc[0], vpcc[1], vpcc[2], cs, gains, ctrl_period)
        if s % rec_every == 0:
            pcc_voltage(x, t, amat, bmat, cp, vsrc, vpcc)
            for j in range(3):
                rec_vpcc[row, j] = vpcc[j]
                rec_il[row, j] = x[j]
                rec_ig[row, j] = x[6 + j]
                rec_m[row, j] = m[j]
                rec_vsrc[row, j] = vsrc[j]
        advance(x, t, m, 1, dt, amat, bmat, cp, switched, work)
        if (s + 1) % rec_every == 0:
            for i in range(9):
                if not math.isfinite(x[i]):
                    return n_sat, row
    return n_sat, -1


@jit
def knn_search_loop(exemplars, queries, k, out_idx, out_d2):
    """Exact k nearest neighbours by squared Euclidean distance.

    Neighbours are ordered by (distance, exemplar index).  Partial sums
    are abandoned once they reach the current k-th best distance, which
    cannot change the result since terms are non-negative and later
    indices lose ties.
    """
    n, dim = exemplars.shape
    for qi in range(queries.shape[0]):
        bd = out_d2[qi]
        bi = out_idx[qi]
        for r in range(k):
            bd[r] = np.inf
            bi[r] = -1
        for e in range(n):
            limit = bd[k - 1]
            s = 0.0
            pruned = False
            for j in range(dim):
                diff = exemplars[e, j] - queries[qi, j]
                s += diff * diff
                if s >= limit:
                    pruned = True
                    break
            if pruned:
                continue
            pos = k - 1
            while pos > 0 and bd[pos - 1] > s:
                bd[pos] = bd[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = s
            bi[pos] = e


def knn_search_numpy(exemplars, queries, k, out_idx, out_d2, chunk=64):
    n, dim = exemplars.shape
    cols = [np.ascontiguousarray(exemplars[:, j]) for j in range(dim)]
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        d2 = np.zeros((q.shape[0], n))
        for j in range(dim):
            diff = cols[j][None, :] - q[:, j, None]
            d2 += diff * diff
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out_idx[start:start + chunk] = order
        out_d2[start:start + chunk] = np.take_along_axis(d2, order, axis=1)


def knn_search(exemplars, queries, k):
    """Indices ``(nq, k)`` and squared distances of the k nearest exemplars."""
    exemplars = np.ascontiguousarray(exemplars, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    nq = queries.shape[0]
    out_idx = np.empty((nq, k), dtype=np.int64)
    out_d2 = np.empty((nq, k))
    if USE_NUMBA:
        knn_search_loop(exemplars, queries, k, out_idx, out_d2)
    else:
        knn_search_numpy(exemplars, queries, k, out_idx, out_d2)
    return out_idx, out_d2


@jit
def knn_vote(labels, idx, d2, n_classes, out):
    """Majority vote per query.  Ties go to the smallest summed distance
    among the tied classes, then to the smallest class code."""
    counts = np.zeros(n_classes, dtype=np.int64)
    sums = np.zeros(n_classes)
    for qi in range(idx.shape[0]):
        for c in range(n_classes):
            counts[c] = 0
            sums[c] = 0.0
        for r in range(idx.shape[1]):
            lab = labels[idx[qi, r]]
            counts[lab] += 1
            sums[lab] += math.sqrt(d2[qi, r])
        best = -1
        for c in range(n_classes):
            if counts[c] == 0:
                continue
            if best < 0 or counts[c] > counts[best] or (
                    counts[c] == counts[best] and sums[c] < sums[best]):
                best = c
        out[qi] = best


@jit
def debounce(raw, accepted, candidate, count, confirm, out):
    """Accept a class change only after ``confirm`` consecutive agreeing
    raw classifications.  Returns the final (accepted, candidate, count)
    so a stream can be processed in pieces."""
    for i in range(raw.shape[0]):
        r = raw[i]
        if r == accepted:
            candidate = accepted
            count = 0
        elif r == candidate:
            count += 1
        else:
            candidate = r
            count = 1
        if candidate != accepted and count >= confirm:
            accepted = candidate
            count = 0
        out[i] = accepted
    return accepted, candidate, count

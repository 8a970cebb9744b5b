"""Independent reference implementations used only by the tests.

None of these import the code they check; they re-derive each result by
a different route (phasor algebra, explicit nodal solves, scalar loops,
exhaustive search, finite differences).
"""
import cmath
import math

import numpy as np


def ladder_phasor(v_inv, v_src, omega, r1, l1, c, r2, l2, r_grid):
    """Steady-state grid-current phasor of one LCL phase feeding a source
    behind a resistance ``r_grid``.  Inputs are complex phasors."""
    z1 = r1 + 1j * omega * l1
    zc = 1.0 / (1j * omega * c)
    z2 = r2 + 1j * omega * l2 + r_grid
    # node equation at the capacitor: (V_inv - Vc)/z1 = Vc/zc + (Vc - V_src)/z2
    vc = (v_inv / z1 + v_src / z2) / (1.0 / z1 + 1.0 / zc + 1.0 / z2)
    return (vc - v_src) / z2


def amplitude_phase(t, x, omega):
    """Fundamental amplitude and phase (rad) of ``x(t)`` over whole cycles,
    with ``x = A cos(omega t + phi)``."""
    c = 2.0 * np.mean(x * np.cos(omega * t))
    s = -2.0 * np.mean(x * np.sin(omega * t))
    return math.hypot(c, s), math.atan2(s, c)


def pcc_with_explicit_node(v_src, i_g, r_grid, phases, r_phase, r_ground):
    """Solve the PCC voltages keeping the fault's common node as an
    unknown (4x4 nodal system) instead of eliminating it."""
    n = 4
    y = np.zeros((n, n))
    rhs = np.zeros(n)
    g_th = 1.0 / r_grid
    for j in range(3):
        y[j, j] += g_th
        rhs[j] = g_th * v_src[j] + i_g[j]
    gp = 1.0 / r_phase
    for j in phases:
        y[j, j] += gp
        y[j, 3] -= gp
        y[3, j] -= gp
        y[3, 3] += gp
    if r_ground is not None:
        y[3, 3] += 1.0 / r_ground
    if not phases:
        y[3, 3] = 1.0
    sol = np.linalg.solve(y, rhs)
    return sol[:3], sol[3]


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def naive_lstm(params, hidden, window):
    """Scalar, timestep-by-timestep LSTM forward (gate order i, f, g, o)."""
    seq = [list(map(float, row)) for row in window]
    for li, H in enumerate(hidden, start=1):
        W = params[f"l{li}.W"]
        U = params[f"l{li}.U"]
        b = params[f"l{li}.b"]
        h = [0.0] * H
        c = [0.0] * H
        out = []
        for x in seq:
            z = []
            for r in range(4 * H):
                acc = b[r]
                for k, xv in enumerate(x):
                    acc += W[r, k] * xv
                for k, hv in enumerate(h):
                    acc += U[r, k] * hv
                z.append(acc)
            new_c = []
            new_h = []
            for u in range(H):
                i = _sig(z[u])
                f = _sig(z[H + u])
                g = math.tanh(z[2 * H + u])
                o = _sig(z[3 * H + u])
                cu = f * c[u] + i * g
                new_c.append(cu)
                new_h.append(o * math.tanh(cu))
            c, h = new_c, new_h
            out.append(h)
        seq = out
    last = seq[-1]
    Wd = params["head.W"]
    bd = params["head.b"]
    return np.array([bd[r] + sum(Wd[r, k] * last[k] for k in range(len(last)))
                     for r in range(len(bd))])


def numeric_grads(model, x, g, h=1e-5):
    """Central differences of ``sum(g * model(x))`` for every parameter."""
    out = {}
    for name, p in model.params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            model.touch()
            fp = float(np.sum(model.forward(x)[0] * g))
            p[idx] = old - h
            model.touch()
            fm = float(np.sum(model.forward(x)[0] * g))
            p[idx] = old
            model.touch()
            num[idx] = (fp - fm) / (2 * h)
        out[name] = num
    return out


def rel_error(a, b):
    """Relative error of two gradient tensors, ``|a-b| / (|a|+|b|)`` in
    the Frobenius norm."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def brute_knn(exemplars, labels, query, k, n_classes):
    """Exhaustive scan: sort every exemplar by (distance, index), vote,
    break ties by summed distance and then class code."""
    d = [(float(np.sqrt(np.sum((e - query) ** 2))), i) for i, e in enumerate(exemplars)]
    d.sort()
    near = d[:k]
    counts = [0] * n_classes
    sums = [0.0] * n_classes
    for dist, i in near:
        counts[labels[i]] += 1
        sums[labels[i]] += dist
    cands = [c for c in range(n_classes) if counts[c] > 0]
    return min(cands, key=lambda c: (-counts[c], sums[c], c)), [i for _, i in near]

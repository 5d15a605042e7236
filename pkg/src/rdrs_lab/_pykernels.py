"""Pure-Python path kernel; the compiled module ``_kernels`` mirrors it exactly."""
from __future__ import annotations

from .game import PAIRS, _cost, ex1_queue, ex1_resolve, ex2_pair_costs, ex2_resolve, ex2_select

POLICY_GAME = 0
POLICY_CONSTANT = 1
POLICY_POOLING = 2
POLICY_TWOD = 3

# proportionally fair flags for users 1..3
_PF = (True, False, True)


def pooling_pair(u: float) -> int:
    if u < 1.0 / 3.0:
        return 0
    if u < 2.0 / 3.0:
        return 1
    return 2


def _state_cost(q, p, rho_s, mu, nj):
    total = 0.0
    for j in range(nj):
        total += _cost(_PF[j], p[j] * q[j], rho_s[j], mu[j])
    return total


def run_path(example, policy, mu, theta_over_mu, sqrt_ge, sqrt_gs, rho, p_init, p_lo, p_hi, p_const,
             dt, tol, max_iter, eps, dBE, dBS, u, state_idx, W, Y, X, Q, P, sel, cost):
    """Simulate one replication, filling the preallocated output arrays.

    Returns the number of steps whose price fixed point fell back to the
    lagged price.
    """
    n = dBE.shape[0]
    nj = 2 if example == 1 else 3
    mu = [float(x) for x in mu]
    tom = theta_over_mu.tolist()
    sge = sqrt_ge.tolist()
    sgs = sqrt_gs.tolist()
    rho_l = rho.tolist()
    lo = [float(x) for x in p_lo]
    hi = [float(x) for x in p_hi]
    pc = [float(x) for x in p_const]
    be = dBE.tolist()
    bs = dBS.tolist()
    uu = u.tolist()
    st = state_idx.tolist()

    w_out = [0.0] * (n + 1)
    y_out = [0.0] * (n + 1)
    x_out = [0.0] * (n + 1)
    q_out = [None] * (n + 1)
    p_out = [None] * (n + 1)
    s_out = [0] * (n + 1)
    c_out = [0.0] * (n + 1)
    bad = 0

    if policy == POLICY_TWOD:
        wj = [0.0] * nj
        yj = [0.0] * nj
        xj = [0.0] * nj
        q_out[0] = [0.0] * nj
        p_out[0] = list(pc[:nj])
        for i in range(n):
            s = st[i]
            for j in range(nj):
                dx = tom[s][j] * dt + (sge[s][j] * be[i][j] + sgs[s][j] * bs[i][j]) / mu[j]
                xj[j] += dx
                z = wj[j] + dx
                if z >= 0.0:
                    wj[j] = z
                else:
                    wj[j] = 0.0
                    yj[j] -= z
            tw = 0.0
            ty = 0.0
            tx = 0.0
            for j in range(nj):
                tw += wj[j]
                ty += yj[j]
                tx += xj[j]
            w_out[i + 1] = tw
            y_out[i + 1] = ty
            x_out[i + 1] = tx
            q_out[i + 1] = [mu[j] * wj[j] for j in range(nj)]
            p_out[i + 1] = list(pc[:nj])
    else:
        # grid point 0
        w = 0.0
        s0 = st[0]
        p = list(p_init[:nj]) if policy == POLICY_GAME or policy == POLICY_POOLING else list(pc[:nj])
        p = [float(x) for x in p]
        q_out[0] = [0.0] * nj
        p_out[0] = list(p)
        if example == 2:
            if policy == POLICY_POOLING:
                s_out[0] = pooling_pair(uu[0])
            else:
                costs = ex2_pair_costs(p[0], p[1], p[2], 0.0, mu[0], mu[1], mu[2],
                                       rho_l[s0][0], rho_l[s0][1], rho_l[s0][2])
                s_out[0] = ex2_select(costs)
        y = 0.0
        xacc = 0.0
        for i in range(n):
            s = st[i]
            dx = 0.0
            if example == 1:
                for j in range(2):
                    dx += tom[s][j] * dt + (sge[s][j] * be[i][j] + sgs[s][j] * bs[i][j]) / mu[j]
            else:
                a, b = PAIRS[s_out[i]]
                dx += tom[s][a] * dt + (sge[s][a] * be[i][a] + sgs[s][a] * bs[i][a]) / mu[a]
                dx += tom[s][b] * dt + (sge[s][b] * be[i][b] + sgs[s][b] * bs[i][b]) / mu[b]
            xacc += dx
            z = w + dx
            if z >= 0.0:
                w = z
            else:
                w = 0.0
                y -= z
            w_out[i + 1] = w
            y_out[i + 1] = y
            x_out[i + 1] = xacc
            s1 = st[i + 1]
            c = rho_l[s1]
            if example == 1:
                if policy == POLICY_GAME:
                    q1, q2, p0, p1, ok = ex1_resolve(w, p[0], p[1], mu[0], mu[1], c[0], c[1],
                                                     lo[0], lo[1], hi[0], hi[1], tol, max_iter, eps)
                    if not ok:
                        bad += 1
                    p = [p0, p1]
                else:
                    q1, q2 = ex1_queue(p[0], p[1], w, mu[0], mu[1], c[0], c[1])
                q_out[i + 1] = [q1, q2]
            else:
                if policy == POLICY_GAME or policy == POLICY_POOLING:
                    forced = pooling_pair(uu[i + 1]) if policy == POLICY_POOLING else -1
                    q, p, k, ok = ex2_resolve(w, p, mu, c, lo, hi, tol, max_iter, eps, forced)
                    if not ok:
                        bad += 1
                else:
                    costs = ex2_pair_costs(p[0], p[1], p[2], w, mu[0], mu[1], mu[2], c[0], c[1], c[2])
                    k = ex2_select(costs)
                    q = [0.0, 0.0, 0.0]
                    q[PAIRS[k][0]] = costs[k][0]
                    q[PAIRS[k][1]] = costs[k][1]
                s_out[i + 1] = k
                q_out[i + 1] = q
            p_out[i + 1] = list(p)

    for i in range(n + 1):
        c_out[i] = _state_cost(q_out[i], p_out[i], rho_l[st[i]], mu, nj)
    W[:] = w_out
    Y[:] = y_out
    X[:] = x_out
    Q[:, :] = q_out
    P[:, :] = p_out
    sel[:] = s_out
    cost[:] = c_out
    return bad

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernel.

Every arithmetic expression follows ``_pykernels`` and the scalar helpers in
``game`` term by term, so both backends produce identical doubles (the
extension is built without floating-point contraction).
"""
from libc.math cimport sqrt

cdef int POLICY_GAME = 0
cdef int POLICY_CONSTANT = 1
cdef int POLICY_POOLING = 2
cdef int POLICY_TWOD = 3

cdef int PAIR_A[3]
cdef int PAIR_B[3]
PAIR_A[:] = [0, 0, 1]
PAIR_B[:] = [1, 2, 2]

cdef bint PF[3]
PF[:] = [True, False, True]


cdef inline double clamp(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline double cost(bint prop_fair, double pq, double c, double mu) noexcept nogil:
    if prop_fair:
        return pq * pq / (2.0 * mu * c)
    return 2.0 * pq * pq * pq / (3.0 * mu * c * c * c)


cdef inline void ex1_queue(double p1, double p2, double w, double mu1, double mu2, double c1, double c2,
                           double* q1o, double* q2o) noexcept nogil:
    cdef double m, a, x, disc, q1, q2
    if w <= 0.0:
        q1o[0] = 0.0
        q2o[0] = 0.0
        return
    m = mu1 * w
    if p2 <= 0.0:
        q1o[0] = 0.0
        q2o[0] = mu2 * w
        return
    if p1 <= 0.0:
        q1o[0] = m
        q2o[0] = 0.0
        return
    a = p1 * p1 * (c2 * c2 * c2) / (2.0 * (p2 * p2 * p2) * c1 * mu2 * mu2)
    x = 0.5 * (2.0 * w / mu1 + a) * mu1 * mu1
    disc = (x - m) * (x + m)
    if disc < 0.0:
        disc = 0.0
    q1 = m * m / (x + sqrt(disc))
    if q1 > m:
        q1 = m
    q2 = mu2 * (w - q1 / mu1)
    if q2 < 0.0:
        q2 = 0.0
    q1o[0] = q1
    q2o[0] = q2


cdef inline double ex1_kappa(double q1, double w, double mu1, double mu2, double c1, double c2,
                             double eps) noexcept nogil:
    cdef double d, k
    if q1 < eps:
        q1 = eps
    d = mu1 * w - q1
    k = (2.0 * c1 * mu2 * mu2 / (c2 * c2 * c2)) * (d * d) / (mu1 * mu1 * q1)
    if k < 0.0:
        k = 0.0
    return k


cdef inline void ex2_pair13_queue(double p1, double p3, double w, double mu1, double mu3, double c1, double c3,
                                  double* q1o, double* q3o) noexcept nogil:
    cdef double m, num, den, q1, q3
    if w <= 0.0:
        q1o[0] = 0.0
        q3o[0] = 0.0
        return
    m = mu1 * w
    num = p3 * p3 * mu3 * w / (mu1 * c3)
    den = p1 * p1 / (mu1 * c1) + p3 * p3 * mu3 / (mu1 * mu1 * c3)
    if den <= 0.0:
        q1 = 0.5 * m
    else:
        q1 = num / den
    if q1 > m:
        q1 = m
    if q1 < 0.0:
        q1 = 0.0
    q3 = mu3 * (w - q1 / mu1)
    if q3 < 0.0:
        q3 = 0.0
    q1o[0] = q1
    q3o[0] = q3


cdef inline double ex2_kappa_hat(double q1, double w, double mu1, double mu3, double c1, double c3,
                                 double eps) noexcept nogil:
    cdef double k
    if q1 < eps:
        q1 = eps
    k = mu3 * c1 / (q1 * c3) * (w - q1 / mu1)
    if k < 0.0:
        k = 0.0
    return k


cdef inline void ex2_pair_costs(double* p, double w, double* mu, double* c, double* out) noexcept nogil:
    # out[3k], out[3k+1]: queues of the pair's lower/higher user; out[3k+2]: cost
    cdef double qa, qb, qc, qd, qe, qf
    ex1_queue(p[0], p[1], w, mu[0], mu[1], c[0], c[1], &qa, &qb)
    out[0] = qa
    out[1] = qb
    out[2] = cost(True, p[0] * qa, c[0], mu[0]) + cost(False, p[1] * qb, c[1], mu[1])
    ex2_pair13_queue(p[0], p[2], w, mu[0], mu[2], c[0], c[2], &qc, &qd)
    out[3] = qc
    out[4] = qd
    out[5] = cost(True, p[0] * qc, c[0], mu[0]) + cost(True, p[2] * qd, c[2], mu[2])
    ex1_queue(p[2], p[1], w, mu[2], mu[1], c[2], c[1], &qe, &qf)
    out[6] = qf
    out[7] = qe
    out[8] = cost(False, p[1] * qf, c[1], mu[1]) + cost(True, p[2] * qe, c[2], mu[2])


cdef inline int ex2_select(double* costs) noexcept nogil:
    cdef int best = 0
    cdef int k
    for k in range(1, 3):
        if costs[3 * k + 2] < costs[3 * best + 2]:
            best = k
    return best


cdef inline void ex2_pair_prices(int k, double qa, double w, double* mu, double* c, double eps,
                                 double* x, double* y) noexcept nogil:
    cdef double kk
    if k == 0:
        kk = ex1_kappa(qa, w, mu[0], mu[1], c[0], c[1], eps)
        x[0] = kk * kk
        y[0] = kk
    elif k == 1:
        kk = ex2_kappa_hat(qa, w, mu[0], mu[2], c[0], c[2], eps)
        x[0] = kk
        y[0] = sqrt(kk)
    else:
        kk = ex1_kappa(qa, w, mu[2], mu[1], c[2], c[1], eps)
        x[0] = kk
        y[0] = kk * kk


cdef inline bint close(double a, double b, double tol) noexcept nogil:
    return abs(b - a) <= tol * (1.0 + abs(b))


cdef inline bint ex1_resolve(double w, double* p, double mu1, double mu2, double c1, double c2,
                             double* lo, double* hi, double tol, int max_iter, double eps,
                             double* q) noexcept nogil:
    # p holds the lagged price on entry and the resolved price on exit
    cdef double p0 = p[0]
    cdef double p1 = p[1]
    cdef double q1, q2, kk, n0, n1
    cdef bint ok = False
    cdef bint done
    cdef int it
    for it in range(max_iter):
        ex1_queue(p0, p1, w, mu1, mu2, c1, c2, &q1, &q2)
        kk = ex1_kappa(q1, w, mu1, mu2, c1, c2, eps)
        n0 = clamp(kk * kk, lo[0], hi[0])
        n1 = clamp(kk, lo[1], hi[1])
        done = close(p0, n0, tol) and close(p1, n1, tol)
        p0 = n0
        p1 = n1
        if done:
            ok = True
            break
    if ok:
        p[0] = p0
        p[1] = p1
    ex1_queue(p[0], p[1], w, mu1, mu2, c1, c2, &q[0], &q[1])
    return ok


cdef inline bint ex2_resolve(double w, double* p, double* mu, double* c, double* lo, double* hi,
                             double tol, int max_iter, double eps, int forced,
                             double* q, int* kout) noexcept nogil:
    cdef double cur[3]
    cdef double new[3]
    cdef double costs[9]
    cdef double qa, x, y
    cdef int k, a, b, j, it
    cdef bint ok = False
    cdef bint done
    for j in range(3):
        cur[j] = p[j]
    for it in range(max_iter):
        ex2_pair_costs(cur, w, mu, c, costs)
        k = ex2_select(costs) if forced < 0 else forced
        a = PAIR_A[k]
        b = PAIR_B[k]
        qa = costs[3 * k + 1] if k == 2 else costs[3 * k]
        ex2_pair_prices(k, qa, w, mu, c, eps, &x, &y)
        for j in range(3):
            new[j] = p[j]
        new[a] = x
        new[b] = y
        for j in range(3):
            new[j] = clamp(new[j], lo[j], hi[j])
        done = close(cur[0], new[0], tol) and close(cur[1], new[1], tol) and close(cur[2], new[2], tol)
        for j in range(3):
            cur[j] = new[j]
        if done:
            ok = True
            break
    if ok:
        for j in range(3):
            p[j] = cur[j]
    ex2_pair_costs(p, w, mu, c, costs)
    k = ex2_select(costs) if forced < 0 else forced
    for j in range(3):
        q[j] = 0.0
    q[PAIR_A[k]] = costs[3 * k]
    q[PAIR_B[k]] = costs[3 * k + 1]
    kout[0] = k
    return ok


cdef inline int pooling_pair_c(double u) noexcept nogil:
    if u < 1.0 / 3.0:
        return 0
    if u < 2.0 / 3.0:
        return 1
    return 2


def pooling_pair(double u):
    return pooling_pair_c(u)


def run_path(int example, int policy, const double[::1] mu, const double[:, ::1] theta_over_mu,
             const double[:, ::1] sqrt_ge, const double[:, ::1] sqrt_gs, const double[:, ::1] rho,
             const double[::1] p_init, const double[::1] p_lo, const double[::1] p_hi, const double[::1] p_const,
             double dt, double tol, int max_iter, double eps,
             const double[:, ::1] dBE, const double[:, ::1] dBS, const double[::1] u,
             const long long[::1] state_idx,
             double[::1] W, double[::1] Y, double[::1] X, double[:, ::1] Q, double[:, ::1] P,
             long long[::1] sel, double[::1] cost_out):
    """Simulate one replication into the preallocated outputs; returns the
    number of steps that fell back to the lagged price."""
    cdef Py_ssize_t n = dBE.shape[0]
    cdef int nj = 2 if example == 1 else 3
    cdef Py_ssize_t i
    cdef int j, s, s1, a, b, k, forced
    cdef long long bad = 0
    cdef double w, y, xacc, dx, z, tw, ty, tx
    cdef double p[3]
    cdef double q[3]
    cdef double c[3]
    cdef double muv[3]
    cdef double lo[3]
    cdef double hi[3]
    cdef double wj[3]
    cdef double yj[3]
    cdef double xj[3]
    cdef double costs[9]
    cdef double total

    with nogil:
        for j in range(nj):
            muv[j] = mu[j]
            lo[j] = p_lo[j]
            hi[j] = p_hi[j]
        for j in range(nj, 3):
            muv[j] = 1.0
            lo[j] = 0.0
            hi[j] = 0.0
        if policy == POLICY_TWOD:
            for j in range(nj):
                wj[j] = 0.0
                yj[j] = 0.0
                xj[j] = 0.0
                Q[0, j] = 0.0
                P[0, j] = p_const[j]
            W[0] = 0.0
            Y[0] = 0.0
            X[0] = 0.0
            sel[0] = 0
            for i in range(n):
                s = <int>state_idx[i]
                for j in range(nj):
                    dx = theta_over_mu[s, j] * dt + (sqrt_ge[s, j] * dBE[i, j] + sqrt_gs[s, j] * dBS[i, j]) / muv[j]
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
                W[i + 1] = tw
                Y[i + 1] = ty
                X[i + 1] = tx
                sel[i + 1] = 0
                for j in range(nj):
                    Q[i + 1, j] = muv[j] * wj[j]
                    P[i + 1, j] = p_const[j]
        else:
            w = 0.0
            s = <int>state_idx[0]
            for j in range(nj):
                if policy == POLICY_GAME or policy == POLICY_POOLING:
                    p[j] = p_init[j]
                else:
                    p[j] = p_const[j]
                Q[0, j] = 0.0
                P[0, j] = p[j]
            W[0] = 0.0
            Y[0] = 0.0
            X[0] = 0.0
            sel[0] = 0
            if example == 2:
                if policy == POLICY_POOLING:
                    sel[0] = pooling_pair_c(u[0])
                else:
                    for j in range(3):
                        c[j] = rho[s, j]
                    ex2_pair_costs(p, 0.0, muv, c, costs)
                    sel[0] = ex2_select(costs)
            y = 0.0
            xacc = 0.0
            for i in range(n):
                s = <int>state_idx[i]
                dx = 0.0
                if example == 1:
                    for j in range(2):
                        dx += theta_over_mu[s, j] * dt + (sqrt_ge[s, j] * dBE[i, j] + sqrt_gs[s, j] * dBS[i, j]) / muv[j]
                else:
                    a = PAIR_A[sel[i]]
                    b = PAIR_B[sel[i]]
                    dx += theta_over_mu[s, a] * dt + (sqrt_ge[s, a] * dBE[i, a] + sqrt_gs[s, a] * dBS[i, a]) / muv[a]
                    dx += theta_over_mu[s, b] * dt + (sqrt_ge[s, b] * dBE[i, b] + sqrt_gs[s, b] * dBS[i, b]) / muv[b]
                xacc += dx
                z = w + dx
                if z >= 0.0:
                    w = z
                else:
                    w = 0.0
                    y -= z
                W[i + 1] = w
                Y[i + 1] = y
                X[i + 1] = xacc
                s1 = <int>state_idx[i + 1]
                for j in range(nj):
                    c[j] = rho[s1, j]
                if example == 1:
                    if policy == POLICY_GAME:
                        if not ex1_resolve(w, p, muv[0], muv[1], c[0], c[1], lo, hi, tol, max_iter, eps, q):
                            bad += 1
                    else:
                        ex1_queue(p[0], p[1], w, muv[0], muv[1], c[0], c[1], &q[0], &q[1])
                    sel[i + 1] = 0
                else:
                    if policy == POLICY_GAME or policy == POLICY_POOLING:
                        forced = pooling_pair_c(u[i + 1]) if policy == POLICY_POOLING else -1
                        if not ex2_resolve(w, p, muv, c, lo, hi, tol, max_iter, eps, forced, q, &k):
                            bad += 1
                    else:
                        ex2_pair_costs(p, w, muv, c, costs)
                        k = ex2_select(costs)
                        for j in range(3):
                            q[j] = 0.0
                        q[PAIR_A[k]] = costs[3 * k]
                        q[PAIR_B[k]] = costs[3 * k + 1]
                    sel[i + 1] = k
                for j in range(nj):
                    Q[i + 1, j] = q[j]
                    P[i + 1, j] = p[j]
        for i in range(n + 1):
            s = <int>state_idx[i]
            total = 0.0
            for j in range(nj):
                total += cost(PF[j], P[i, j] * Q[i, j], rho[s, j], muv[j])
            cost_out[i] = total
    return bad

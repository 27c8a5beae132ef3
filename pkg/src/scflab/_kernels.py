"""Numba kernels for the hot loops.

Everything here is a plain-array function; the wrapping modules own all
bookkeeping.  Kernels are serial and deterministic.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def nudft_eval(kvec, cre, cim, weights, points):
    """Trigonometric sum at arbitrary points.

    kvec: (M, d) wavenumbers, one representative per conjugate pair.
    cre, cim: (M, C) coefficient parts.  weights: (M,) 1 or 2.
    points: (P, d).  Returns (P, C).
    """
    m, d = kvec.shape
    c = cre.shape[1]
    p = points.shape[0]
    out = np.zeros((p, c))
    twopi = 2.0 * np.pi
    for i in range(p):
        for j in range(m):
            phase = 0.0
            for a in range(d):
                phase += kvec[j, a] * points[i, a]
            phase *= twopi
            cs = np.cos(phase)
            sn = np.sin(phase)
            w = weights[j]
            for q in range(c):
                out[i, q] += w * (cre[j, q] * cs - cim[j, q] * sn)
    return out


@njit(cache=True, fastmath=True)
def fused_rhs_d4(g, w, j, gi, gam, cdj, gc, dg, dw, dj, dgam, dcdj, dgc,
              xv, dxv, gauged):
    """Dimension-4 specialization of the fused right-hand side.

    All derivative inputs are spectral derivatives of the assembled
    fields (Christoffels, covariant DJ, Chern coefficients, gauge
    field), matching the plain numpy path to rounding.  Layouts, with
    P grid points and dimension d:

      g, w, j, gi:  (P, d, d)      j[m, k] = J^m_k
      gam, gc:      (P, d, d, d)   [k, i, l] = G^k_il
      cdj:          (P, d, d, d)   [a, m, k] = D_a J^m_k
      dg, dw, dj:   (P, d, d, d)   [a, i, k] = del_a t_ik
      dgam, dgc,
      dcdj:         (P, d, d, d, d)  leading index = derivative axis
      xv:           (P, d)         gauge field (ignored when not gauged)
      dxv:          (P, d, d)      [a, k] = del_a X^k

    Returns (out_g, out_w, out_j).
    """
    p_n = g.shape[0]
    d = 4
    out_g = np.empty((p_n, d, d))
    out_w = np.empty((p_n, d, d))
    out_j = np.empty((p_n, d, d))

    ric = np.empty((d, d))
    amat = np.empty((d, d, d))
    vml = np.empty((d, d, d))
    wml = np.empty((d, d, d))
    rcup = np.empty((d, d))

    for pt in range(p_n):
        gp = g[pt]
        wp = w[pt]
        jp = j[pt]
        gip = gi[pt]
        gmp = gam[pt]
        cdp = cdj[pt]
        gcp = gc[pt]
        dgp = dg[pt]
        dwp = dw[pt]
        djp = dj[pt]
        dgmp = dgam[pt]
        dcdp = dcdj[pt]
        dgcp = dgc[pt]

        # Ricci: Rc_jl = del_i G^i_lj - del_l G^i_ij + G^i_im G^m_lj
        #               - G^i_lm G^m_ij, symmetrized
        for jj in range(4):
            for l in range(4):
                acc = 0.0
                for i in range(4):
                    acc += dgmp[i, i, l, jj] - dgmp[l, i, i, jj]
                    for m in range(4):
                        acc += (gmp[i, i, m] * gmp[m, l, jj]
                                - gmp[i, l, m] * gmp[m, i, jj])
                ric[jj, l] = acc
        for jj in range(4):
            for l in range(jj, 4):
                s = 0.5 * (ric[jj, l] + ric[l, jj])
                ric[jj, l] = s
                ric[l, jj] = s

        # rough Laplacian g^{pq} D_p D_q J
        for m in range(4):
            for k in range(4):
                acc = 0.0
                for a in range(4):
                    for b in range(4):
                        t = dcdp[a, b, m, k]
                        for r in range(4):
                            t += (gmp[m, a, r] * cdp[b, r, k]
                                  - gmp[r, a, b] * cdp[r, m, k]
                                  - gmp[r, a, k] * cdp[b, m, r])
                        acc += gip[a, b] * t
                out_j[pt, m, k] = acc

        # quadratic terms B1, B2
        for a in range(4):
            for k in range(4):
                for n in range(4):
                    acc = 0.0
                    for m in range(4):
                        acc += gp[m, n] * cdp[a, m, k]
                    amat[a, k, n] = acc
        for i in range(4):
            for k in range(4):
                b1 = 0.0
                b2 = 0.0
                for a in range(4):
                    for b in range(4):
                        gab = gip[a, b]
                        for n in range(4):
                            b1 += gab * amat[i, a, n] * cdp[k, n, b]
                            b2 += gab * amat[a, i, n] * cdp[b, n, k]
                out_g[pt, i, k] = -2.0 * ric[i, k] + 0.5 * b1 - b2

        # cubic term: v[p,m,i] = D_pJ^m_r J^r_i, w[p,n,k] = g^{pq} D_qJ^n_k
        for a in range(4):
            for m in range(4):
                for i in range(4):
                    acc = 0.0
                    for r in range(4):
                        acc += cdp[a, m, r] * jp[r, i]
                    vml[a, m, i] = acc
        for a in range(4):
            for n in range(4):
                for k in range(4):
                    acc = 0.0
                    for q in range(4):
                        acc += gip[a, q] * cdp[q, n, k]
                    wml[a, n, k] = acc
        for jj in range(4):
            for i in range(4):
                acc = 0.0
                for k in range(4):
                    gk = gip[jj, k]
                    for m in range(4):
                        for n in range(4):
                            gmn = gp[m, n]
                            for a in range(4):
                                acc += gk * gmn * vml[a, m, i] * wml[a, n, k]
                out_j[pt, jj, i] += acc

        # Ricci commutator [J, Rc-endomorphism]
        for jj in range(4):
            for k in range(4):
                acc = 0.0
                for m in range(4):
                    acc += gip[jj, m] * ric[m, k]
                rcup[jj, k] = acc
        for jj in range(4):
            for i in range(4):
                acc = 0.0
                for k in range(4):
                    acc += rcup[jj, k] * jp[k, i] - jp[jj, k] * rcup[k, i]
                out_j[pt, jj, i] += acc

        # Chern-Ricci trace:
        # P_kl = (del_k Gc^i_{lj} - del_l Gc^i_{kj}
        #         + Gc^i_{km} Gc^m_{lj} - Gc^i_{lm} Gc^m_{kj}) J^j_i
        for k in range(4):
            out_w[pt, k, k] = 0.0
            for l in range(k + 1, 4):
                acc = 0.0
                for i in range(4):
                    for jj in range(4):
                        t = dgcp[k, i, l, jj] - dgcp[l, i, k, jj]
                        for m in range(4):
                            t += (gcp[i, k, m] * gcp[m, l, jj]
                                  - gcp[i, l, m] * gcp[m, k, jj])
                        acc += t * jp[jj, i]
                out_w[pt, k, l] = -acc
                out_w[pt, l, k] = acc

        if gauged:
            xp = xv[pt]
            dxp = dxv[pt]
            for i in range(4):
                for k in range(4):
                    lg = 0.0
                    lw = 0.0
                    for m in range(4):
                        lg += (xp[m] * dgp[m, i, k] + gp[m, k] * dxp[i, m]
                               + gp[i, m] * dxp[k, m])
                        lw += (xp[m] * dwp[m, i, k] + wp[m, k] * dxp[i, m]
                               + wp[i, m] * dxp[k, m])
                    out_g[pt, i, k] += lg
                    out_w[pt, i, k] += lw
            for m in range(4):
                for i in range(4):
                    lj = 0.0
                    for k in range(4):
                        lj += (xp[k] * djp[k, m, i] - jp[k, i] * dxp[k, m]
                               + jp[m, k] * dxp[i, k])
                    out_j[pt, m, i] += lj

    return out_g, out_w, out_j


@njit(cache=True, fastmath=False)
def fused_rhs(g, w, j, gi, gam, cdj, gc, dg, dw, dj, dgam, dcdj, dgc,
              xv, dxv, gauged):
    """Flow right-hand side from precomputed connection data, one pass.

    All derivative inputs are spectral derivatives of the assembled
    fields (Christoffels, covariant DJ, Chern coefficients, gauge
    field), matching the plain numpy path to rounding.  Layouts, with
    P grid points and dimension d:

      g, w, j, gi:  (P, d, d)      j[m, k] = J^m_k
      gam, gc:      (P, d, d, d)   [k, i, l] = G^k_il
      cdj:          (P, d, d, d)   [a, m, k] = D_a J^m_k
      dg, dw, dj:   (P, d, d, d)   [a, i, k] = del_a t_ik
      dgam, dgc,
      dcdj:         (P, d, d, d, d)  leading index = derivative axis
      xv:           (P, d)         gauge field (ignored when not gauged)
      dxv:          (P, d, d)      [a, k] = del_a X^k

    Returns (out_g, out_w, out_j).
    """
    p_n, d = g.shape[0], g.shape[1]
    out_g = np.empty((p_n, d, d))
    out_w = np.empty((p_n, d, d))
    out_j = np.empty((p_n, d, d))

    ric = np.empty((d, d))
    amat = np.empty((d, d, d))
    vml = np.empty((d, d, d))
    wml = np.empty((d, d, d))
    rcup = np.empty((d, d))

    for pt in range(p_n):
        gp = g[pt]
        wp = w[pt]
        jp = j[pt]
        gip = gi[pt]
        gmp = gam[pt]
        cdp = cdj[pt]
        gcp = gc[pt]
        dgp = dg[pt]
        dwp = dw[pt]
        djp = dj[pt]
        dgmp = dgam[pt]
        dcdp = dcdj[pt]
        dgcp = dgc[pt]

        # Ricci: Rc_jl = del_i G^i_lj - del_l G^i_ij + G^i_im G^m_lj
        #               - G^i_lm G^m_ij, symmetrized
        for jj in range(d):
            for l in range(d):
                acc = 0.0
                for i in range(d):
                    acc += dgmp[i, i, l, jj] - dgmp[l, i, i, jj]
                    for m in range(d):
                        acc += (gmp[i, i, m] * gmp[m, l, jj]
                                - gmp[i, l, m] * gmp[m, i, jj])
                ric[jj, l] = acc
        for jj in range(d):
            for l in range(jj, d):
                s = 0.5 * (ric[jj, l] + ric[l, jj])
                ric[jj, l] = s
                ric[l, jj] = s

        # rough Laplacian g^{pq} D_p D_q J
        for m in range(d):
            for k in range(d):
                acc = 0.0
                for a in range(d):
                    for b in range(d):
                        t = dcdp[a, b, m, k]
                        for r in range(d):
                            t += (gmp[m, a, r] * cdp[b, r, k]
                                  - gmp[r, a, b] * cdp[r, m, k]
                                  - gmp[r, a, k] * cdp[b, m, r])
                        acc += gip[a, b] * t
                out_j[pt, m, k] = acc

        # quadratic terms B1, B2
        for a in range(d):
            for k in range(d):
                for n in range(d):
                    acc = 0.0
                    for m in range(d):
                        acc += gp[m, n] * cdp[a, m, k]
                    amat[a, k, n] = acc
        for i in range(d):
            for k in range(d):
                b1 = 0.0
                b2 = 0.0
                for a in range(d):
                    for b in range(d):
                        gab = gip[a, b]
                        if gab == 0.0:
                            continue
                        for n in range(d):
                            b1 += gab * amat[i, a, n] * cdp[k, n, b]
                            b2 += gab * amat[a, i, n] * cdp[b, n, k]
                out_g[pt, i, k] = -2.0 * ric[i, k] + 0.5 * b1 - b2

        # cubic term: v[p,m,i] = D_pJ^m_r J^r_i, w[p,n,k] = g^{pq} D_qJ^n_k
        for a in range(d):
            for m in range(d):
                for i in range(d):
                    acc = 0.0
                    for r in range(d):
                        acc += cdp[a, m, r] * jp[r, i]
                    vml[a, m, i] = acc
        for a in range(d):
            for n in range(d):
                for k in range(d):
                    acc = 0.0
                    for q in range(d):
                        acc += gip[a, q] * cdp[q, n, k]
                    wml[a, n, k] = acc
        for jj in range(d):
            for i in range(d):
                acc = 0.0
                for k in range(d):
                    gk = gip[jj, k]
                    if gk == 0.0:
                        continue
                    for m in range(d):
                        for n in range(d):
                            gmn = gp[m, n]
                            for a in range(d):
                                acc += gk * gmn * vml[a, m, i] * wml[a, n, k]
                out_j[pt, jj, i] += acc

        # Ricci commutator [J, Rc-endomorphism]
        for jj in range(d):
            for k in range(d):
                acc = 0.0
                for m in range(d):
                    acc += gip[jj, m] * ric[m, k]
                rcup[jj, k] = acc
        for jj in range(d):
            for i in range(d):
                acc = 0.0
                for k in range(d):
                    acc += rcup[jj, k] * jp[k, i] - jp[jj, k] * rcup[k, i]
                out_j[pt, jj, i] += acc

        # Chern-Ricci trace:
        # P_kl = (del_k Gc^i_{lj} - del_l Gc^i_{kj}
        #         + Gc^i_{km} Gc^m_{lj} - Gc^i_{lm} Gc^m_{kj}) J^j_i
        for k in range(d):
            out_w[pt, k, k] = 0.0
            for l in range(k + 1, d):
                acc = 0.0
                for i in range(d):
                    for jj in range(d):
                        t = dgcp[k, i, l, jj] - dgcp[l, i, k, jj]
                        for m in range(d):
                            t += (gcp[i, k, m] * gcp[m, l, jj]
                                  - gcp[i, l, m] * gcp[m, k, jj])
                        acc += t * jp[jj, i]
                out_w[pt, k, l] = -acc
                out_w[pt, l, k] = acc

        if gauged:
            xp = xv[pt]
            dxp = dxv[pt]
            for i in range(d):
                for k in range(d):
                    lg = 0.0
                    lw = 0.0
                    for m in range(d):
                        lg += (xp[m] * dgp[m, i, k] + gp[m, k] * dxp[i, m]
                               + gp[i, m] * dxp[k, m])
                        lw += (xp[m] * dwp[m, i, k] + wp[m, k] * dxp[i, m]
                               + wp[i, m] * dxp[k, m])
                    out_g[pt, i, k] += lg
                    out_w[pt, i, k] += lw
            for m in range(d):
                for i in range(d):
                    lj = 0.0
                    for k in range(d):
                        lj += (xp[k] * djp[k, m, i] - jp[k, i] * dxp[k, m]
                               + jp[m, k] * dxp[i, k])
                    out_j[pt, m, i] += lj

    return out_g, out_w, out_j

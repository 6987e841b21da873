"""numba kernels for the pairwise series operations.

Both operations run in two passes: a counting pass returning the number of
surviving output terms per row of the left operand, and a filling pass
writing every row at a fixed offset. Output order therefore never depends on
the number of threads.
"""
import numpy as np
from numba import njit, prange

BRACKET = 0
PRODUCT = 1


@njit(cache=True)
def _trig_product(pa, pb):
    # coefficients of the (a-b) and (a+b) waves in T_pa(a)*T_pb(b)
    if pa == 0 and pb == 0:
        return 0.5, 0.5
    if pa == 1 and pb == 1:
        return 0.5, -0.5
    if pa == 1 and pb == 0:
        return 0.5, 0.5
    return -0.5, 0.5


@njit(cache=True)
def _emit(coef, lbuf, mbuf, krow1, krow2, sign, par, grading, K, action_cap, trig_cap, k_norm,
          write, slot, oc, oL, oM, oK, oP, kbuf):
    if coef == 0.0:
        return 0, 0.0
    n = lbuf.shape[0]
    for d in range(n):
        kbuf[d] = krow1[d] + sign * krow2[d]
    first = 0
    for d in range(n):
        if kbuf[d] != 0:
            first = kbuf[d]
            break
    if first == 0 and par == 1:
        return 0, 0.0
    if first < 0:
        for d in range(n):
            kbuf[d] = -kbuf[d]
        if par == 1:
            coef = -coef
    lsum = 0
    msum = 0
    knorm = 0
    for d in range(n):
        lsum += lbuf[d]
        msum += mbuf[d]
        a = abs(kbuf[d])
        if k_norm == 0:
            knorm += a
        elif a > knorm:
            knorm = a
    if grading == 0:
        grade = lsum - 1
        if grade < 0 or msum != 0:
            return 0, abs(coef)
        budget = grade * K
        degree = lsum
    else:
        grade = lsum + msum
        budget = trig_cap
        degree = grade
    if action_cap >= 0 and degree > action_cap:
        return 0, abs(coef)
    if budget >= 0 and knorm > budget:
        return 0, abs(coef)
    if write:
        oc[slot] = coef
        for d in range(n):
            oL[slot, d] = lbuf[d]
            oM[slot, d] = mbuf[d]
            oK[slot, d] = kbuf[d]
        oP[slot] = par
    return 1, 0.0


@njit(cache=True)
def _pair_row(kind, i1, c1, L1, M1, K1, P1, c2, L2, M2, K2, P2,
              grading, K, action_cap, trig_cap, k_norm,
              write, start, oc, oL, oM, oK, oP):
    n = L1.shape[1]
    lbuf = np.empty(n, dtype=np.int64)
    mbuf = np.empty(n, dtype=np.int64)
    kbuf = np.empty(n, dtype=np.int64)
    count = 0
    loss = 0.0
    p1 = P1[i1]
    for i2 in range(c2.shape[0]):
        cc = c1[i1] * c2[i2]
        p2 = P2[i2]
        if kind == PRODUCT:
            for d in range(n):
                lbuf[d] = L1[i1, d] + L2[i2, d]
                mbuf[d] = M1[i1, d] + M2[i2, d]
            cm, cp = _trig_product(p1, p2)
            par = p1 ^ p2
            kept, lost = _emit(cc * cm, lbuf, mbuf, K1[i1], K2[i2], -1, par, grading, K, action_cap,
                               trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
            count += kept
            loss += lost
            kept, lost = _emit(cc * cp, lbuf, mbuf, K1[i1], K2[i2], 1, par, grading, K, action_cap,
                               trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
            count += kept
            loss += lost
            continue
        for j in range(n):
            a1 = L1[i1, j]
            a2 = L2[i2, j]
            b1 = M1[i1, j]
            b2 = M2[i2, j]
            # derivative through the polynomial coordinate
            gp = cc * (a1 * b2 - b1 * a2)
            if gp != 0.0:
                for d in range(n):
                    lbuf[d] = L1[i1, d] + L2[i2, d]
                    mbuf[d] = M1[i1, d] + M2[i2, d]
                lbuf[j] -= 1
                mbuf[j] -= 1
                cm, cp = _trig_product(p1, p2)
                par = p1 ^ p2
                kept, lost = _emit(gp * cm, lbuf, mbuf, K1[i1], K2[i2], -1, par, grading, K, action_cap,
                                   trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
                count += kept
                loss += lost
                kept, lost = _emit(gp * cp, lbuf, mbuf, K1[i1], K2[i2], 1, par, grading, K, action_cap,
                                   trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
                count += kept
                loss += lost
            # derivative through the angle
            alpha = cc * a1 * K2[i2, j]
            beta = -cc * K1[i1, j] * a2
            if alpha != 0.0 or beta != 0.0:
                for d in range(n):
                    lbuf[d] = L1[i1, d] + L2[i2, d]
                    mbuf[d] = M1[i1, d] + M2[i2, d]
                lbuf[j] -= 1
                s1 = -1.0 if p1 == 0 else 1.0
                s2 = -1.0 if p2 == 0 else 1.0
                cmA, cpA = _trig_product(p1, 1 - p2)
                cmB, cpB = _trig_product(1 - p1, p2)
                par = 1 - (p1 ^ p2)
                minus = alpha * s2 * cmA + beta * s1 * cmB
                plus = alpha * s2 * cpA + beta * s1 * cpB
                kept, lost = _emit(minus, lbuf, mbuf, K1[i1], K2[i2], -1, par, grading, K, action_cap,
                                   trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
                count += kept
                loss += lost
                kept, lost = _emit(plus, lbuf, mbuf, K1[i1], K2[i2], 1, par, grading, K, action_cap,
                                   trig_cap, k_norm, write, start + count, oc, oL, oM, oK, oP, kbuf)
                count += kept
                loss += lost
    return count, loss


@njit(cache=True, parallel=True)
def pair_count(kind, c1, L1, M1, K1, P1, c2, L2, M2, K2, P2, grading, K, action_cap, trig_cap, k_norm):
    m1 = c1.shape[0]
    n = L1.shape[1]
    counts = np.zeros(m1, dtype=np.int64)
    losses = np.zeros(m1, dtype=np.float64)
    oc = np.empty(0, dtype=np.float64)
    oI = np.empty((0, n), dtype=np.int64)
    oP = np.empty(0, dtype=np.int64)
    for i1 in prange(m1):
        count, loss = _pair_row(kind, i1, c1, L1, M1, K1, P1, c2, L2, M2, K2, P2,
                                grading, K, action_cap, trig_cap, k_norm,
                                False, 0, oc, oI, oI, oI, oP)
        counts[i1] = count
        losses[i1] = loss
    return counts, losses


@njit(cache=True, parallel=True)
def pair_fill(kind, c1, L1, M1, K1, P1, c2, L2, M2, K2, P2, grading, K, action_cap, trig_cap, k_norm,
              row_begin, row_end, offsets, total):
    n = L1.shape[1]
    oc = np.empty(total, dtype=np.float64)
    oL = np.empty((total, n), dtype=np.int64)
    oM = np.empty((total, n), dtype=np.int64)
    oK = np.empty((total, n), dtype=np.int64)
    oP = np.empty(total, dtype=np.int64)
    for i1 in prange(row_begin, row_end):
        _pair_row(kind, i1, c1, L1, M1, K1, P1, c2, L2, M2, K2, P2,
                  grading, K, action_cap, trig_cap, k_norm,
                  True, offsets[i1], oc, oL, oM, oK, oP)
    return oc, oL, oM, oK, oP

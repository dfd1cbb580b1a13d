# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: frame dissection and the SMO dual solver.

Every buffer access below is preceded by an explicit length check, so the
disabled bounds checking never lets a malformed frame read out of range.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef enum:
    ARP = 0
    IP = 1
    IPV6 = 2
    TCP = 3
    UDP = 4


cdef inline unsigned int _u16(const unsigned char[:] f, Py_ssize_t o) nogil:
    return (f[o] << 8) | f[o + 1]


cdef tuple _transport(const unsigned char[:] f, Py_ssize_t off, Py_ssize_t n, int proto, int ip_code):
    cdef unsigned long seq
    if proto == 6 and off + 20 <= n:
        seq = (<unsigned long>f[off + 4] << 24) | (<unsigned long>f[off + 5] << 16) | (<unsigned long>f[off + 6] << 8) | f[off + 7]
        return (TCP, <int>_u16(f, off), <int>_u16(f, off + 2), <int>f[off + 13], seq, <int>_u16(f, off + 14))
    if proto == 17 and off + 8 <= n:
        return (UDP, <int>_u16(f, off), <int>_u16(f, off + 2), -1, -1, -1)
    return (ip_code, -1, -1, -1, -1, -1)


def dissect_frame(frame):
    cdef const unsigned char[:] f = frame
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t off = 14, spa, tpa, pos
    cdef unsigned int ethertype, hlen, plen, ihl, frag
    cdef int ttl, proto, nxt, hop
    if n < 14:
        return None
    ethertype = _u16(f, 12)
    if ethertype == 0x8100:
        if n < 18:
            return None
        ethertype = _u16(f, 16)
        off = 18

    if ethertype == 0x0806:
        if off + 8 > n:
            return None
        hlen = f[off + 4]
        plen = f[off + 5]
        if plen != 4 and plen != 16:
            return None
        spa = off + 8 + hlen
        tpa = spa + plen + hlen
        if tpa + plen > n:
            return None
        return (ARP, bytes(f[spa:spa + plen]), bytes(f[tpa:tpa + plen]), -1, -1, -1, -1, -1, -1)

    if ethertype == 0x0800:
        if off + 20 > n:
            return None
        ihl = (f[off] & 0x0F) * 4
        if (f[off] >> 4) != 4 or ihl < 20 or off + ihl > n:
            return None
        ttl = f[off + 8]
        proto = f[off + 9]
        src = bytes(f[off + 12:off + 16])
        dst = bytes(f[off + 16:off + 20])
        frag = ((f[off + 6] & 0x1F) << 8) | f[off + 7]
        if frag != 0:
            return (IP, src, dst, -1, -1, -1, ttl, -1, -1)
        t = _transport(f, off + ihl, n, proto, IP)
        return (t[0], src, dst, t[1], t[2], t[3], ttl, t[4], t[5])

    if ethertype == 0x86DD:
        if off + 40 > n:
            return None
        nxt = f[off + 6]
        ttl = f[off + 7]
        src = bytes(f[off + 8:off + 24])
        dst = bytes(f[off + 24:off + 40])
        pos = off + 40
        for hop in range(8):
            if nxt == 0 or nxt == 43 or nxt == 60:
                if pos + 8 > n:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                nxt = f[pos]
                pos = pos + (f[pos + 1] + 1) * 8
            elif nxt == 44:
                if pos + 8 > n:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                frag = _u16(f, pos + 2) >> 3
                if frag != 0:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                nxt = f[pos]
                pos = pos + 8
            else:
                break
        t = _transport(f, pos, n, nxt, IPV6)
        return (t[0], src, dst, t[1], t[2], t[3], ttl, t[4], t[5])

    return None


def smo_solve(double[:, ::1] Q, double[::1] alpha, double C, double tol, long max_iter):
    cdef Py_ssize_t n = Q.shape[0]
    cdef Py_ssize_t t, i, j
    cdef long it = 0
    cdef double m, M, gap = INFINITY, b, a, s, best, delta, room_i, room_j
    cdef double tau = 1e-12
    cdef double[::1] G = np.asarray(Q) @ np.asarray(alpha)
    with nogil:
        while it < max_iter:
            i = -1
            m = -INFINITY
            M = INFINITY
            for t in range(n):
                if alpha[t] < C and -G[t] > m:
                    m = -G[t]
                    i = t
                if alpha[t] > 0 and -G[t] < M:
                    M = -G[t]
            if i < 0 or M == INFINITY:
                gap = 0.0
                break
            gap = m - M
            if gap < tol:
                break
            j = -1
            best = INFINITY
            for t in range(n):
                if alpha[t] > 0:
                    b = m + G[t]
                    if b > 0:
                        a = Q[i, i] + Q[t, t] - 2.0 * Q[i, t]
                        if a <= 0:
                            a = tau
                        s = -(b * b) / a
                        if s < best:
                            best = s
                            j = t
            b = m + G[j]
            a = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if a <= 0:
                a = tau
            delta = b / a
            room_i = C - alpha[i]
            room_j = alpha[j]
            if delta >= room_i or delta >= room_j:
                delta = room_i if room_i < room_j else room_j
            if delta == room_i:
                alpha[i] = C
            else:
                alpha[i] = alpha[i] + delta
            if delta == room_j:
                alpha[j] = 0.0
            else:
                alpha[j] = alpha[j] - delta
            for t in range(n):
                G[t] = G[t] + delta * (Q[t, i] - Q[t, j])
            it += 1
    return it, float(gap)

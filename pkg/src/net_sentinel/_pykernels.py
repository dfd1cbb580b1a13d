"""Pure-Python implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable (or ``NET_SENTINEL_PURE=1``).
"""

import numpy as np

# protocol codes shared with the compiled kernel
ARP, IP, IPV6, TCP, UDP = 0, 1, 2, 3, 4

_IPV6_EXT = (0, 43, 60)
_IPV6_FRAG = 44


def _transport(frame, off, n, proto, ip_code):
    """Parse TCP/UDP at ``off``; degrade to the bare IP label when short."""
    if proto == 6 and off + 20 <= n:
        sport = (frame[off] << 8) | frame[off + 1]
        dport = (frame[off + 2] << 8) | frame[off + 3]
        seq = int.from_bytes(frame[off + 4 : off + 8], "big")
        flags = frame[off + 13]
        window = (frame[off + 14] << 8) | frame[off + 15]
        return TCP, sport, dport, flags, seq, window
    if proto == 17 and off + 8 <= n:
        sport = (frame[off] << 8) | frame[off + 1]
        dport = (frame[off + 2] << 8) | frame[off + 3]
        return UDP, sport, dport, -1, -1, -1
    return ip_code, -1, -1, -1, -1, -1


def dissect_frame(frame):
    """Return ``(proto, src, dst, sport, dport, flags, ttl, seq, window)`` or None.

    ``src``/``dst`` are packed address bytes; absent integers are -1.
    """
    n = len(frame)
    if n < 14:
        return None
    ethertype = (frame[12] << 8) | frame[13]
    off = 14
    if ethertype == 0x8100:
        if n < 18:
            return None
        ethertype = (frame[16] << 8) | frame[17]
        off = 18

    if ethertype == 0x0806:
        if off + 8 > n:
            return None
        hlen = frame[off + 4]
        plen = frame[off + 5]
        if plen not in (4, 16):
            return None
        spa = off + 8 + hlen
        tpa = spa + plen + hlen
        if tpa + plen > n:
            return None
        return (ARP, bytes(frame[spa : spa + plen]), bytes(frame[tpa : tpa + plen]), -1, -1, -1, -1, -1, -1)

    if ethertype == 0x0800:
        if off + 20 > n:
            return None
        ihl = (frame[off] & 0x0F) * 4
        if (frame[off] >> 4) != 4 or ihl < 20 or off + ihl > n:
            return None
        ttl = frame[off + 8]
        proto = frame[off + 9]
        src = bytes(frame[off + 12 : off + 16])
        dst = bytes(frame[off + 16 : off + 20])
        frag_offset = ((frame[off + 6] & 0x1F) << 8) | frame[off + 7]
        if frag_offset != 0:
            return (IP, src, dst, -1, -1, -1, ttl, -1, -1)
        code, sport, dport, flags, seq, window = _transport(frame, off + ihl, n, proto, IP)
        return (code, src, dst, sport, dport, flags, ttl, seq, window)

    if ethertype == 0x86DD:
        if off + 40 > n:
            return None
        nxt = frame[off + 6]
        ttl = frame[off + 7]
        src = bytes(frame[off + 8 : off + 24])
        dst = bytes(frame[off + 24 : off + 40])
        pos = off + 40
        for _ in range(8):
            if nxt in _IPV6_EXT:
                if pos + 8 > n:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                nxt, pos = frame[pos], pos + (frame[pos + 1] + 1) * 8
            elif nxt == _IPV6_FRAG:
                if pos + 8 > n:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                frag_offset = ((frame[pos + 2] << 8) | frame[pos + 3]) >> 3
                if frag_offset != 0:
                    return (IPV6, src, dst, -1, -1, -1, ttl, -1, -1)
                nxt, pos = frame[pos], pos + 8
            else:
                break
        code, sport, dport, flags, seq, window = _transport(frame, pos, n, nxt, IPV6)
        return (code, src, dst, sport, dport, flags, ttl, seq, window)

    return None


def smo_solve(Q, alpha, C, tol, max_iter):
    """Minimise 0.5 a'Qa s.t. sum(a) = const, 0 <= a <= C, in place.

    Working-set selection uses second-order information (Fan, Chen & Lin
    2005). Returns ``(iterations, final_gap)``.
    """
    n = Q.shape[0]
    G = Q @ alpha
    diag = np.diag(Q).copy()
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        up = alpha < C
        low = alpha > 0
        negG = -G
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand_i = np.where(up, negG, -np.inf)
        i = int(np.argmax(cand_i))
        m = cand_i[i]
        M = np.min(np.where(low, negG, np.inf))
        gap = m - M
        if gap < tol:
            break
        b = m + G  # m - (-G_t)
        a = diag[i] + diag - 2.0 * Q[i]
        a = np.where(a > 0, a, tau)
        score = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        delta = b[j] / a[j]
        room_i = C - alpha[i]
        room_j = alpha[j]
        if delta >= room_i or delta >= room_j:
            delta = min(room_i, room_j)
        alpha[i] = C if delta == room_i else alpha[i] + delta
        alpha[j] = 0.0 if delta == room_j else alpha[j] - delta
        G += delta * (Q[:, i] - Q[:, j])
        it += 1
    return it, float(gap)

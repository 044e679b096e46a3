"""Compiled inner loops: greedy Bowen-ball packing and orbit coding."""

import numba as nb
import numpy as np

_EMPTY = np.int64(-1)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@nb.njit(cache=True, inline="always")
def _slot(key, mask):
    h = np.uint64(key) * _GOLDEN
    h ^= h >> np.uint64(29)
    return np.int64(h & np.uint64(mask))


@nb.njit(cache=True)
def _time_gap(orb, p, q, t, D, susp, A):
    """Distance between f^t(p) and f^t(q): sup-norm quotient metric, plus the
    roof-crossed alternatives on the mapping torus."""
    m = 0.0
    nd = D - 1 if susp else D
    for d in range(nd):
        g = abs(orb[p, t, d] - orb[q, t, d])
        if g > 0.5:
            g = 1.0 - g
        if g > m:
            m = g
    if not susp:
        return m
    hp = orb[p, t, nd]
    hq = orb[q, t, nd]
    g = abs(hp - hq)
    if g > m:
        m = g
    best = m
    for flip in range(2):
        a = p if flip == 0 else q
        b = q if flip == 0 else p
        ha = orb[a, t, nd]
        hb = orb[b, t, nd]
        dh = abs(ha - 1.0 - hb)
        if dh >= best:
            continue
        mm = dh
        for d in range(2):
            v = A[d, 0] * orb[a, t, 0] + A[d, 1] * orb[a, t, 1]
            v = v - np.floor(v)
            g = abs(v - orb[b, t, d])
            if g > 0.5:
                g = 1.0 - g
            if g > mm:
                mm = g
        if mm < best:
            best = mm
    return best


@nb.njit(cache=True)
def _conflict(orb, p, q, T, D, eps, susp, A):
    for t in range(T):
        if _time_gap(orb, p, q, t, D, susp, A) >= eps:
            return False
    return True


@nb.njit(cache=True)
def _rep_coords(orb, p, key_times, D, susp, A, pushed_mask, out):
    """Hashed coordinates of one representation of point p.

    Bit j of pushed_mask selects, for key time j, the roof-pushed representative
    (A x mod 1, h - 1) instead of (x, h)."""
    k = 0
    for j in range(key_times.shape[0]):
        t = key_times[j]
        pushed = susp and ((pushed_mask >> j) & 1) == 1
        if pushed:
            for d in range(2):
                v = A[d, 0] * orb[p, t, 0] + A[d, 1] * orb[p, t, 1]
                out[k + d] = v - np.floor(v)
            out[k + 2] = orb[p, t, 2] - 1.0
        else:
            for d in range(D):
                out[k + d] = orb[p, t, d]
        k += D


@nb.njit(cache=True)
def _pushable(orb, p, key_times, susp, eps):
    """Bitmask of key times at which p sits within eps of the roof."""
    m = 0
    if not susp:
        return 0
    for j in range(key_times.shape[0]):
        if orb[p, key_times[j], 2] > 1.0 - eps:
            m |= 1 << j
    return m


@nb.njit(cache=True)
def greedy_separated(orb, eps, order, seed, key_times, susp, A, M):
    """Greedy (n, eps)-separated subset of the sample.

    ``orb`` has shape (N, T, D) with orb[i, t] = f^t(x_i). Points in ``seed`` are
    admitted first (they must already be pairwise separated); then every index
    in ``order`` is admitted iff its Bowen distance to all admitted points is
    >= eps. Candidates are located through a hash on the coordinates at
    ``key_times`` with cells of width 1/M >= 2 eps.
    """
    N, T, D = orb.shape
    K = key_times.shape[0] * D
    nreps = 1 << key_times.shape[0] if susp else 1
    cap_entries = (seed.shape[0] + order.shape[0]) * nreps + 1
    size = 1
    while size < 2 * cap_entries:
        size <<= 1
    mask = size - 1
    keys = np.full(size, _EMPTY, dtype=np.int64)
    heads = np.full(size, _EMPTY, dtype=np.int64)
    ent_pt = np.empty(cap_entries, dtype=np.int64)
    ent_next = np.empty(cap_entries, dtype=np.int64)
    n_ent = 0

    radix = np.empty(K, dtype=np.int64)
    wraps = np.empty(K, dtype=np.bool_)
    for j in range(key_times.shape[0]):
        for d in range(D):
            is_h = susp and d == D - 1
            radix[j * D + d] = M + 2 if is_h else M
            wraps[j * D + d] = not is_h

    coords = np.empty(K, dtype=np.float64)
    cell = np.empty(K, dtype=np.int64)
    nbr = np.empty(K, dtype=np.int64)
    admitted = np.empty(seed.shape[0] + order.shape[0], dtype=np.int64)
    n_adm = 0

    total = seed.shape[0] + order.shape[0]
    for idx in range(total):
        is_seed = idx < seed.shape[0]
        p = seed[idx] if is_seed else order[idx - seed.shape[0]]
        pm = _pushable(orb, p, key_times, susp, eps)

        ok = True
        if not is_seed:
            # query every representation of p
            for rep in range(nreps):
                if (rep & ~pm) != 0:
                    continue
                _rep_coords(orb, p, key_times, D, susp, A, rep, coords)
                for c in range(K):
                    x = coords[c] * M
                    ci = np.int64(np.floor(x))
                    off = x - ci
                    if wraps[c]:
                        ci = ci % M
                        nb_ = (ci - 1) % M if off < 0.5 else (ci + 1) % M
                        if nb_ == ci:
                            nb_ = -2
                    else:
                        ci = ci + 1
                        nb_ = ci - 1 if off < 0.5 else ci + 1
                        if nb_ < 0 or nb_ >= M + 2:
                            nb_ = -2
                    cell[c] = ci
                    nbr[c] = nb_
                for combo in range(1 << K):
                    key = np.int64(0)
                    valid = True
                    for c in range(K):
                        use_nb = (combo >> c) & 1
                        v = cell[c]
                        if use_nb == 1:
                            v = nbr[c]
                            if v == -2:
                                valid = False
                                break
                        if v < 0 or v >= radix[c]:
                            valid = False
                            break
                        key = key * radix[c] + v
                    if not valid:
                        continue
                    s = _slot(key, mask)
                    while keys[s] != _EMPTY and keys[s] != key:
                        s = (s + 1) & mask
                    if keys[s] == _EMPTY:
                        continue
                    e = heads[s]
                    while e != _EMPTY:
                        if _conflict(orb, p, ent_pt[e], T, D, eps, susp, A):
                            ok = False
                            break
                        e = ent_next[e]
                    if not ok:
                        break
                if not ok:
                    break
        if not ok:
            continue

        admitted[n_adm] = p
        n_adm += 1
        # insert every representation of p
        for rep in range(nreps):
            if (rep & ~pm) != 0:
                continue
            _rep_coords(orb, p, key_times, D, susp, A, rep, coords)
            key = np.int64(0)
            for c in range(K):
                x = coords[c] * M
                ci = np.int64(np.floor(x))
                if wraps[c]:
                    ci = ci % M
                else:
                    ci = ci + 1
                    if ci < 0:
                        ci = 0
                    if ci >= M + 2:
                        ci = M + 1
                key = key * radix[c] + ci
            s = _slot(key, mask)
            while keys[s] != _EMPTY and keys[s] != key:
                s = (s + 1) & mask
            keys[s] = key
            ent_pt[n_ent] = p
            ent_next[n_ent] = heads[s]
            heads[s] = n_ent
            n_ent += 1
    return admitted[:n_adm]


@nb.njit(cache=True)
def _mix(h, v):
    x = (np.uint64(h) ^ np.uint64(v + 0x632BE59BD9B4E019)) * _GOLDEN
    x ^= x >> np.uint64(31)
    return np.int64(x & np.uint64(0x7FFFFFFFFFFFFFFF))


@nb.njit(cache=True)
def greedy_separated_lifted(orb, lifted, shift, eps, order, seed):
    """Greedy (n, eps)-separated subset for maps of the form F(x + k) = F(x) + A k.

    ``lifted[i]`` is F^n(x_i) computed on the lift from x_i in [0,1)^D and
    ``shift`` is A^n. When ||DF||_inf * eps < 1 - eps, Bowen-close points share
    the time-0 translate k along the whole orbit, so q conflicts with p only if
    lifted[q] + A^n k lies within eps of lifted[p]. Candidates are found through
    a hash of lifted cells of width 2 eps.
    """
    N, T, D = orb.shape
    cap = seed.shape[0] + order.shape[0] + 1
    size = 1
    while size < 2 * cap:
        size <<= 1
    mask = size - 1
    keys = np.full(size, _EMPTY, dtype=np.int64)
    heads = np.full(size, _EMPTY, dtype=np.int64)
    ent_pt = np.empty(cap, dtype=np.int64)
    ent_next = np.empty(cap, dtype=np.int64)
    n_ent = 0
    w = 2.0 * eps
    admitted = np.empty(cap, dtype=np.int64)
    n_adm = 0

    kopt = np.zeros((D, 2), dtype=np.int64)
    nk = np.zeros(D, dtype=np.int64)
    kvec = np.zeros(D, dtype=np.int64)
    target = np.empty(D, dtype=np.float64)
    cell = np.empty(D, dtype=np.int64)
    nbr = np.empty(D, dtype=np.int64)

    total = seed.shape[0] + order.shape[0]
    for idx in range(total):
        is_seed = idx < seed.shape[0]
        p = seed[idx] if is_seed else order[idx - seed.shape[0]]
        ok = True
        if not is_seed:
            n_kcombo = 1
            for d in range(D):
                kopt[d, 0] = 0
                nk[d] = 1
                x0 = orb[p, 0, d]
                if x0 < eps:
                    kopt[d, 1] = -1
                    nk[d] = 2
                elif x0 > 1.0 - eps:
                    kopt[d, 1] = 1
                    nk[d] = 2
                n_kcombo *= nk[d]
            for kc in range(n_kcombo):
                r = kc
                for d in range(D):
                    kvec[d] = kopt[d, r % nk[d]]
                    r //= nk[d]
                for d in range(D):
                    s = 0.0
                    for e in range(D):
                        s += shift[d, e] * kvec[e]
                    target[d] = lifted[p, d] - s
                    x = target[d] / w
                    ci = np.int64(np.floor(x))
                    cell[d] = ci
                    nbr[d] = ci - 1 if x - ci < 0.5 else ci + 1
                for combo in range(1 << D):
                    key = np.int64(D)
                    for d in range(D):
                        v = nbr[d] if (combo >> d) & 1 else cell[d]
                        key = _mix(key, v)
                    sl = _slot(key, mask)
                    while keys[sl] != _EMPTY and keys[sl] != key:
                        sl = (sl + 1) & mask
                    if keys[sl] == _EMPTY:
                        continue
                    e = heads[sl]
                    while e != _EMPTY:
                        if _conflict(orb, p, ent_pt[e], T, D, eps, False, shift):
                            ok = False
                            break
                        e = ent_next[e]
                    if not ok:
                        break
                if not ok:
                    break
        if not ok:
            continue
        admitted[n_adm] = p
        n_adm += 1
        key = np.int64(D)
        for d in range(D):
            key = _mix(key, np.int64(np.floor(lifted[p, d] / w)))
        sl = _slot(key, mask)
        while keys[sl] != _EMPTY and keys[sl] != key:
            sl = (sl + 1) & mask
        keys[sl] = key
        ent_pt[n_ent] = p
        ent_next[n_ent] = heads[sl]
        heads[sl] = n_ent
        n_ent += 1
    return admitted[:n_adm]


@nb.njit(cache=True)
def code_orbit_cells(orbit, res):
    """Cell index of every orbit point in a uniform grid partition."""
    L, D = orbit.shape
    out = np.empty(L, dtype=np.int64)
    for i in range(L):
        c = np.int64(0)
        for d in range(D):
            k = np.int64(orbit[i, d] * res[d])
            if k >= res[d]:
                k = res[d] - 1
            if k < 0:
                k = 0
            c = c * res[d] + k
        out[i] = c
    return out


@nb.njit(cache=True)
def words(codes, length, base):
    """Integer encoding of the sliding words codes[i:i+length]."""
    L = codes.shape[0] - length + 1
    out = np.empty(L, dtype=np.int64)
    for i in range(L):
        w = np.int64(0)
        for j in range(length):
            w = w * base + codes[i + j]
        out[i] = w
    return out


@nb.njit(cache=True)
def _hash3(b0, b1, e, w):
    key = np.int64(3)
    key = _mix(key, np.int64(np.floor(b0 / w)))
    key = _mix(key, np.int64(np.floor(b1 / w)))
    key = _mix(key, np.int64(np.floor(e / w)))
    return key


@nb.njit(cache=True)
def _lookup(keys, heads, ent_pt, ent_next, mask, key, orb, q, T, eps, A):
    sl = _slot(key, mask)
    while keys[sl] != _EMPTY and keys[sl] != key:
        sl = (sl + 1) & mask
    if keys[sl] == _EMPTY:
        return False
    e = heads[sl]
    while e != _EMPTY:
        if _conflict(orb, q, ent_pt[e], T, 3, eps, True, A):
            return True
        e = ent_next[e]
    return False


@nb.njit(cache=True)
def _query3(keys, heads, ent_pt, ent_next, mask, b, e, w, orb, q, T, eps, A):
    cell = np.empty(3, dtype=np.int64)
    nbr = np.empty(3, dtype=np.int64)
    for d in range(3):
        x = b[d] / w if d < 2 else e / w
        ci = np.int64(np.floor(x))
        cell[d] = ci
        nbr[d] = ci - 1 if x - ci < 0.5 else ci + 1
    for combo in range(8):
        key = np.int64(3)
        for d in range(3):
            v = nbr[d] if (combo >> d) & 1 else cell[d]
            key = _mix(key, v)
        if _lookup(keys, heads, ent_pt, ent_next, mask, key, orb, q, T, eps, A):
            return True
    return False


@nb.njit(cache=True)
def _insert(keys, heads, ent_pt, ent_next, mask, n_ent, key, p):
    sl = _slot(key, mask)
    while keys[sl] != _EMPTY and keys[sl] != key:
        sl = (sl + 1) & mask
    keys[sl] = key
    ent_pt[n_ent] = p
    ent_next[n_ent] = heads[sl]
    heads[sl] = n_ent
    return n_ent + 1


@nb.njit(cache=True)
def greedy_separated_suspension(orb, X, eta, m, Apow, Ainv, eps, order, seed):
    """Greedy (n, eps)-separated subset for a time-t map of the unit-roof suspension.

    Points live in the cover R^2 x R of the mapping torus, whose deck group is
    generated by integer translations and T(x, H) = (A x, H - 1). ``X[i]``,
    ``eta[i]`` are the normalized cover coordinates of the time-n state,
    X = A^m x with m = m[i] roof crossings and eta in [0, 1). A Bowen-close pair
    is related by one deck element over the whole segment, fixed by its time-0
    relation: a translation k, composed with T^{+-1} when the two heights sit on
    opposite sides of the roof. In normalized time-n coordinates this becomes
    X_q - A^{m_q} k ~ X_p, up to one more T when the heights straddle the roof.
    Exact conflicts are always decided on the wrapped orbits ``orb``.
    """
    N, T, D = orb.shape
    A = Apow[1]
    cap = 2 * (seed.shape[0] + order.shape[0]) + 1
    size = 1
    while size < 2 * cap:
        size <<= 1
    mask = size - 1
    keys = np.full(size, _EMPTY, dtype=np.int64)
    heads = np.full(size, _EMPTY, dtype=np.int64)
    ent_pt = np.empty(cap, dtype=np.int64)
    ent_next = np.empty(cap, dtype=np.int64)
    n_ent = 0
    w = 2.0 * eps
    admitted = np.empty(seed.shape[0] + order.shape[0], dtype=np.int64)
    n_adm = 0
    # bounding box of A [0,1)^2 and A^-1 [0,1)^2 for the roof-crossed translations
    lo = np.zeros((2, 2))
    hi = np.zeros((2, 2))
    for which in range(2):
        M = A if which == 0 else Ainv
        for d in range(2):
            lo[which, d] = min(0.0, M[d, 0]) + min(0.0, M[d, 1])
            hi[which, d] = max(0.0, M[d, 0]) + max(0.0, M[d, 1])
    slack_a = eps * (abs(Ainv[0, 0]) + abs(Ainv[0, 1]) + abs(Ainv[1, 0]) + abs(Ainv[1, 1]))
    slack_b = eps * (abs(A[0, 0]) + abs(A[0, 1]) + abs(A[1, 0]) + abs(A[1, 1]))
    b = np.empty(2)
    pb = np.empty(2)

    total = seed.shape[0] + order.shape[0]
    for idx in range(total):
        is_seed = idx < seed.shape[0]
        q = seed[idx] if is_seed else order[idx - seed.shape[0]]
        hit = False
        if not is_seed:
            x0 = orb[q, 0, 0]
            y0 = orb[q, 0, 1]
            h0 = orb[q, 0, 2]
            P = Apow[m[q]]
            for case in range(3):
                if case == 1 and not h0 < eps:
                    continue
                if case == 2 and not h0 > 1.0 - eps:
                    continue
                if case == 0:
                    k0lo, k0hi, k1lo, k1hi = -1, 1, -1, 1
                else:
                    wh = case - 1
                    k0lo = np.int64(np.floor(x0 - hi[wh, 0] - 1.0))
                    k0hi = np.int64(np.ceil(x0 - lo[wh, 0] + 1.0))
                    k1lo = np.int64(np.floor(y0 - hi[wh, 1] - 1.0))
                    k1hi = np.int64(np.ceil(y0 - lo[wh, 1] + 1.0))
                for k0 in range(k0lo, k0hi + 1):
                    for k1 in range(k1lo, k1hi + 1):
                        if case == 0:
                            if k0 == -1 and not x0 < eps:
                                continue
                            if k0 == 1 and not x0 > 1.0 - eps:
                                continue
                            if k1 == -1 and not y0 < eps:
                                continue
                            if k1 == 1 and not y0 > 1.0 - eps:
                                continue
                        else:
                            # partner's base point M^-1 (x_q - k) must lie near [0,1)^2
                            u0 = x0 - k0
                            u1 = y0 - k1
                            M = Ainv if case == 1 else A
                            s = slack_a if case == 1 else slack_b
                            v0 = M[0, 0] * u0 + M[0, 1] * u1
                            v1 = M[1, 0] * u0 + M[1, 1] * u1
                            if v0 < -s or v0 > 1.0 + s or v1 < -s or v1 > 1.0 + s:
                                continue
                        b[0] = X[q, 0] - (P[0, 0] * k0 + P[0, 1] * k1)
                        b[1] = X[q, 1] - (P[1, 0] * k0 + P[1, 1] * k1)
                        if _query3(keys, heads, ent_pt, ent_next, mask, b, eta[q], w,
                                   orb, q, T, eps, A):
                            hit = True
                            break
                        if eta[q] > 1.0 - eps:
                            pb[0] = A[0, 0] * b[0] + A[0, 1] * b[1]
                            pb[1] = A[1, 0] * b[0] + A[1, 1] * b[1]
                            if _query3(keys, heads, ent_pt, ent_next, mask, pb, eta[q] - 1.0,
                                       w, orb, q, T, eps, A):
                                hit = True
                                break
                    if hit:
                        break
                if hit:
                    break
        if hit:
            continue
        admitted[n_adm] = q
        n_adm += 1
        n_ent = _insert(keys, heads, ent_pt, ent_next, mask, n_ent,
                        _hash3(X[q, 0], X[q, 1], eta[q], w), q)
        if eta[q] > 1.0 - eps:
            pb[0] = A[0, 0] * X[q, 0] + A[0, 1] * X[q, 1]
            pb[1] = A[1, 0] * X[q, 0] + A[1, 1] * X[q, 1]
            n_ent = _insert(keys, heads, ent_pt, ent_next, mask, n_ent,
                            _hash3(pb[0], pb[1], eta[q] - 1.0, w), q)
    return admitted[:n_adm]

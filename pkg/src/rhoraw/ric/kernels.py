"""Integer coding kernels: range coder, quantized mixture CDFs, pass loops.

Everything here is nopython numba over int64 arithmetic; the sigmoid table
is passed in explicitly so the self-test can inject a corrupted copy.

Range coder: 32-bit carryless (Subbotin style), byte renormalization,
16-bit totals.  Encoder and decoder share the normalization logic, so the
two stay in exact lockstep.
"""

import numpy as np
from numba import njit

from .lut import K_COMPONENTS, PROB_TOTAL, T_CLAMP_Q20

RC_TOP = 1 << 24
RC_BOT = 1 << 16
MASK32 = 0xFFFFFFFF

LOG2_TOTAL = 16.0  # log2(PROB_TOTAL)


# ---------------------------------------------------------------- range coder

@njit(cache=True)
def rc_enc_init(st):
    st[0] = 0  # low
    st[1] = MASK32  # range
    st[2] = 0  # write position


@njit(cache=True)
def rc_encode(st, buf, cum, freq, tot):
    r = st[1] // tot
    st[0] = (st[0] + r * cum) & MASK32
    st[1] = r * freq
    while True:
        if ((st[0] ^ (st[0] + st[1])) & MASK32) < RC_TOP:
            pass
        elif st[1] < RC_BOT:
            st[1] = (-st[0]) & (RC_BOT - 1)
        else:
            break
        buf[st[2]] = (st[0] >> 24) & 0xFF
        st[2] += 1
        st[0] = (st[0] << 8) & MASK32
        st[1] = (st[1] << 8) & MASK32


@njit(cache=True)
def rc_enc_flush(st, buf):
    for _ in range(4):
        buf[st[2]] = (st[0] >> 24) & 0xFF
        st[2] += 1
        st[0] = (st[0] << 8) & MASK32
    return st[2]


@njit(cache=True)
def _read_byte(st, buf):
    # Bounds-safe: a crafted stream may ask for more bytes than the section
    # holds; reading zeros keeps the decoder well-defined (the per-scale CRC
    # already decides validity).
    b = buf[st[2]] if st[2] < buf.shape[0] else 0
    st[2] += 1
    return b


@njit(cache=True)
def rc_dec_init(st, buf, start):
    st[0] = 0
    st[1] = MASK32
    st[2] = start
    code = 0
    for _ in range(4):
        code = ((code << 8) | _read_byte(st, buf)) & MASK32
    st[3] = code


@njit(cache=True)
def rc_dec_target(st, tot):
    r = st[1] // tot
    t = ((st[3] - st[0]) & MASK32) // r
    if t >= tot:
        t = tot - 1
    return t


@njit(cache=True)
def rc_dec_update(st, buf, cum, freq, tot):
    r = st[1] // tot
    st[0] = (st[0] + r * cum) & MASK32
    st[1] = r * freq
    while True:
        if ((st[0] ^ (st[0] + st[1])) & MASK32) < RC_TOP:
            pass
        elif st[1] < RC_BOT:
            st[1] = (-st[0]) & (RC_BOT - 1)
        else:
            break
        st[3] = ((st[3] << 8) | _read_byte(st, buf)) & MASK32
        st[0] = (st[0] << 8) & MASK32
        st[1] = (st[1] << 8) & MASK32


# ----------------------------------------------------------- mixture CDFs

@njit(cache=True)
def _sig_q16(t_q20, table):
    """Logistic CDF in Q16 from the interpolated table; odd symmetry."""
    if t_q20 >= 0:
        if t_q20 >= T_CLAMP_Q20:
            return 65536
        idx = t_q20 >> 12
        frac = t_q20 & 4095
        a = table[idx]
        return a + (((table[idx + 1] - a) * frac) >> 12)
    t = -t_q20
    if t >= T_CLAMP_Q20:
        return 0
    idx = t >> 12
    frac = t & 4095
    a = table[idx]
    return 65536 - (a + (((table[idx + 1] - a) * frac) >> 12))


@njit(cache=True)
def _mix_cdf_raw(out, n, base_q4, step_q4, mu_fp, isig, omega, im, table):
    """Raw Q16 mixture CDF at the n+1 bin boundaries base + j*step (Q4).

    Components outside their linear window contribute a saturated step;
    boundaries outside the widest component's window are filled directly.
    """
    is_min = (isig * im[K_COMPONENTS - 1]) >> 8
    if is_min < 1:
        is_min = 1
    dmax = T_CLAMP_Q20 // is_min + 1
    # j with d_j = base + j*step - mu in (-dmax, dmax)
    jlo = (mu_fp - dmax - base_q4) // step_q4
    jhi = (mu_fp + dmax - base_q4) // step_q4 + 1
    if jlo < 0:
        jlo = 0
    if jlo > n:
        jlo = n
    if jhi < jlo:
        jhi = jlo
    if jhi > n:
        jhi = n
    for j in range(0, jlo):
        out[j] = 0
    for j in range(jhi + 1, n + 1):
        out[j] = PROB_TOTAL
    for j in range(jlo, jhi + 1):
        d = base_q4 + j * step_q4 - mu_fp
        acc = 0
        for k in range(K_COMPONENTS):
            isk = (isig * im[k]) >> 8
            if isk < 1:
                isk = 1
            t = d * isk
            if t >= T_CLAMP_Q20:
                acc += omega[k] << 16
            elif t > -T_CLAMP_Q20:
                acc += omega[k] * _sig_q16(t, table)
        out[j] = (acc + 32768) >> 16


@njit(cache=True)
def _min1_repair(cdf, n):
    """Give every bin mass >= 1, taking the deficit from the largest bins."""
    deficit = 0
    for j in range(n):
        if cdf[j + 1] - cdf[j] < 1:
            deficit += 1
    if deficit == 0:
        return
    m = np.empty(n, np.int64)
    for j in range(n):
        m[j] = cdf[j + 1] - cdf[j]
        if m[j] < 1:
            m[j] = 1
    need = deficit
    while need > 0:
        arg = 0
        best = m[0]
        for j in range(1, n):
            if m[j] > best:
                best = m[j]
                arg = j
        take = best - 1
        if take > need:
            take = need
        m[arg] -= take
        need -= take
    acc = 0
    for j in range(n):
        cdf[j] = acc
        acc += m[j]
    cdf[n] = acc


@njit(cache=True)
def _uniform_cdf(cdf, n):
    for j in range(n + 1):
        cdf[j] = (PROB_TOTAL * j) // n


@njit(cache=True)
def build_hi_cdf(cdf, n_hi, lo_bits, mu_fp, isig, ublend, omega, im, table):
    """Quantized CDF over the hi alphabet: mixture + uniform blend + repair."""
    if ublend >= 64:
        _uniform_cdf(cdf, n_hi)
        return
    step = 16 << lo_bits
    _mix_cdf_raw(cdf, n_hi, -8, step, mu_fp, isig, omega, im, table)
    cdf[0] = 0
    cdf[n_hi] = PROB_TOTAL
    if ublend > 0:
        for j in range(1, n_hi):
            cdf[j] = ((64 - ublend) * cdf[j] + ublend * ((PROB_TOTAL * j) // n_hi)) >> 6
    _min1_repair(cdf, n_hi)


@njit(cache=True)
def build_lo_cdf(cdf, length, base_sym, mu_fp, isig, ublend, omega, im, table):
    """Quantized CDF over one hi bin's lo symbols (mixture restricted to it).

    Floor-allocates masses against the raw in-bin total, gives the
    remainder to the largest bin, then applies the min-1 repair.
    """
    if ublend >= 64:
        _uniform_cdf(cdf, length)
        return
    _mix_cdf_raw(cdf, length, 16 * base_sym - 8, 16, mu_fp, isig, omega, im, table)
    total = cdf[length] - cdf[0]
    if total <= 0:
        _uniform_cdf(cdf, length)
        return
    acc = 0
    largest = 0
    largest_j = 0
    prev_raw = cdf[0]
    for j in range(length):
        raw_next = cdf[j + 1]
        mass = ((raw_next - prev_raw) * PROB_TOTAL) // total
        prev_raw = raw_next
        cdf[j] = acc
        acc += mass
        if mass > largest:
            largest = mass
            largest_j = j
    remainder = PROB_TOTAL - acc
    for j in range(largest_j + 1, length):
        cdf[j] += remainder
    cdf[length] = PROB_TOTAL
    _min1_repair(cdf, length)


# ------------------------------------------------------------- scale passes

@njit(cache=True)
def encode_pass(syms, mu_fp, isig, ublend, span, lo_bits, st, buf, omega, im, table, bits_out):
    n_hi = (span >> lo_bits) + 1
    width = 1 << lo_bits
    hicdf = np.empty(n_hi + 1, np.int64)
    locdf = np.empty(width + 1, np.int64)
    uniform_only = ublend >= 64
    if uniform_only:
        _uniform_cdf(hicdf, n_hi)
    bits = 0.0
    for i in range(syms.size):
        v = syms[i]
        hi = v >> lo_bits
        if not uniform_only:
            build_hi_cdf(hicdf, n_hi, lo_bits, mu_fp[i], isig, ublend, omega, im, table)
        freq = hicdf[hi + 1] - hicdf[hi]
        rc_encode(st, buf, hicdf[hi], freq, PROB_TOTAL)
        bits += LOG2_TOTAL - np.log2(freq)
        if lo_bits > 0:
            lo = v & (width - 1)
            length = span - (hi << lo_bits) + 1
            if length > width:
                length = width
            build_lo_cdf(locdf, length, hi << lo_bits, mu_fp[i], isig, ublend, omega, im, table)
            freq = locdf[lo + 1] - locdf[lo]
            rc_encode(st, buf, locdf[lo], freq, PROB_TOTAL)
            bits += LOG2_TOTAL - np.log2(freq)
    bits_out[0] += bits


@njit(cache=True)
def decode_pass(out, mu_fp, isig, ublend, span, lo_bits, st, buf, omega, im, table):
    n_hi = (span >> lo_bits) + 1
    width = 1 << lo_bits
    hicdf = np.empty(n_hi + 1, np.int64)
    locdf = np.empty(width + 1, np.int64)
    uniform_only = ublend >= 64
    if uniform_only:
        _uniform_cdf(hicdf, n_hi)
    for i in range(out.size):
        if not uniform_only:
            build_hi_cdf(hicdf, n_hi, lo_bits, mu_fp[i], isig, ublend, omega, im, table)
        target = rc_dec_target(st, PROB_TOTAL)
        lo_j, hi_j = 0, n_hi
        while hi_j - lo_j > 1:
            mid = (lo_j + hi_j) >> 1
            if hicdf[mid] <= target:
                lo_j = mid
            else:
                hi_j = mid
        hi = lo_j
        rc_dec_update(st, buf, hicdf[hi], hicdf[hi + 1] - hicdf[hi], PROB_TOTAL)
        v = hi << lo_bits
        if lo_bits > 0:
            length = span - (hi << lo_bits) + 1
            if length > width:
                length = width
            build_lo_cdf(locdf, length, hi << lo_bits, mu_fp[i], isig, ublend, omega, im, table)
            target = rc_dec_target(st, PROB_TOTAL)
            lo_j, hi_j = 0, length
            while hi_j - lo_j > 1:
                mid = (lo_j + hi_j) >> 1
                if locdf[mid] <= target:
                    lo_j = mid
                else:
                    hi_j = mid
            rc_dec_update(st, buf, locdf[lo_j], locdf[lo_j + 1] - locdf[lo_j], PROB_TOTAL)
            v += lo_j
        out[i] = v


# --------------------------------------------------- adaptive base coder

ADAPT_INC = 32
ADAPT_LIMIT = 60000


@njit(cache=True)
def encode_order0(syms, span, lo_bits, st, buf, bits_out):
    """Adaptive order-0 coding of the base level (hi and lo parts)."""
    n_hi = (span >> lo_bits) + 1
    width = 1 << lo_bits
    hi_counts = np.ones(n_hi, np.int64)
    hi_tot = n_hi
    lo_counts = np.ones(width, np.int64)
    lo_tot = width
    bits = 0.0
    for i in range(syms.size):
        v = syms[i]
        hi = v >> lo_bits
        cum = 0
        for j in range(hi):
            cum += hi_counts[j]
        rc_encode(st, buf, cum, hi_counts[hi], hi_tot)
        bits += np.log2(hi_tot / hi_counts[hi])
        hi_counts[hi] += ADAPT_INC
        hi_tot += ADAPT_INC
        if hi_tot > ADAPT_LIMIT:
            hi_tot = 0
            for j in range(n_hi):
                hi_counts[j] = (hi_counts[j] + 1) >> 1
                hi_tot += hi_counts[j]
        if lo_bits > 0:
            lo = v & (width - 1)
            cum = 0
            for j in range(lo):
                cum += lo_counts[j]
            rc_encode(st, buf, cum, lo_counts[lo], lo_tot)
            bits += np.log2(lo_tot / lo_counts[lo])
            lo_counts[lo] += ADAPT_INC
            lo_tot += ADAPT_INC
            if lo_tot > ADAPT_LIMIT:
                lo_tot = 0
                for j in range(width):
                    lo_counts[j] = (lo_counts[j] + 1) >> 1
                    lo_tot += lo_counts[j]
    bits_out[0] += bits


@njit(cache=True)
def decode_order0(out, span, lo_bits, st, buf):
    n_hi = (span >> lo_bits) + 1
    width = 1 << lo_bits
    hi_counts = np.ones(n_hi, np.int64)
    hi_tot = n_hi
    lo_counts = np.ones(width, np.int64)
    lo_tot = width
    for i in range(out.size):
        target = rc_dec_target(st, hi_tot)
        cum = 0
        hi = 0
        while cum + hi_counts[hi] <= target:
            cum += hi_counts[hi]
            hi += 1
        rc_dec_update(st, buf, cum, hi_counts[hi], hi_tot)
        hi_counts[hi] += ADAPT_INC
        hi_tot += ADAPT_INC
        if hi_tot > ADAPT_LIMIT:
            hi_tot = 0
            for j in range(n_hi):
                hi_counts[j] = (hi_counts[j] + 1) >> 1
                hi_tot += hi_counts[j]
        v = hi << lo_bits
        if lo_bits > 0:
            target = rc_dec_target(st, lo_tot)
            cum = 0
            lo = 0
            while cum + lo_counts[lo] <= target:
                cum += lo_counts[lo]
                lo += 1
            rc_dec_update(st, buf, cum, lo_counts[lo], lo_tot)
            lo_counts[lo] += ADAPT_INC
            lo_tot += ADAPT_INC
            if lo_tot > ADAPT_LIMIT:
                lo_tot = 0
                for j in range(width):
                    lo_counts[j] = (lo_counts[j] + 1) >> 1
                    lo_tot += lo_counts[j]
            v += lo
        out[i] = v

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: per-SNV likelihood and the Dirichlet-proposal MH loop.

Must stay operation-for-operation identical to ``_kernels_py.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, sqrt, cos, INFINITY
from libc.stdint cimport uint64_t

BACKEND = "cython"

cdef double NEG_INF = -INFINITY
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double TWO_PI = 6.283185307179586
cdef double HALF_LOG_TWO_PI = 0.9189385332046727
cdef double[9] LANCZOS = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
]


cdef inline double _lgamma(double x) nogil:
    cdef double a, t
    cdef int i
    x -= 1.0
    a = LANCZOS[0]
    t = x + 7.5
    for i in range(1, 9):
        a += LANCZOS[i] / (x + i)
    return HALF_LOG_TWO_PI + (x + 0.5) * log(t) - t + log(a)


def lanczos_lgamma(double x):
    return _lgamma(x)


cdef struct RngState:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef void _seed(RngState* st, uint64_t seed) nogil:
    cdef uint64_t z = seed, x
    cdef uint64_t out[4]
    cdef int j
    for j in range(4):
        z += <uint64_t>0x9E3779B97F4A7C15
        x = z
        x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
        x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EB
        out[j] = x ^ (x >> 31)
    st.s0 = out[0]
    st.s1 = out[1]
    st.s2 = out[2]
    st.s3 = out[3]


cdef inline uint64_t _next(RngState* st) nogil:
    cdef uint64_t result = _rotl(st.s1 * 5, 7) * 9
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = _rotl(st.s3, 45)
    return result


cdef inline double _uniform(RngState* st) nogil:
    return (<double>(_next(st) >> 11) + 0.5) * TWO_M53


cdef inline double _normal(RngState* st) nogil:
    cdef double u1 = _uniform(st)
    cdef double u2 = _uniform(st)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef double _gamma(RngState* st, double shape) nogil:
    cdef double d = shape - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double z, v, u
    while True:
        z = _normal(st)
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform(st)
        if u < 1.0 - 0.0331 * z * z * z * z:
            return d * v
        if log(u) < 0.5 * z * z + d * (1.0 - v + log(v)):
            return d * v


def draw(seed, kind, int n, double shape=1.0):
    """Draw ``n`` variates of ``kind`` (uniform, normal, gamma) from a fresh stream."""
    cdef RngState st
    cdef int j
    _seed(&st, <uint64_t>seed)
    out = []
    for j in range(n):
        if kind == "uniform":
            out.append(_uniform(&st))
        elif kind == "normal":
            out.append(_normal(&st))
        else:
            out.append(_gamma(&st, shape))
    return out


cdef inline double _binom_term(double a, double b, double p) nogil:
    cdef double r = 0.0
    if a > 0.0:
        if p <= 0.0:
            return NEG_INF
        r += a * log(p)
    if b > 0.0:
        if p >= 1.0:
            return NEG_INF
        r += b * log(1.0 - p)
    return r


cdef class LikelihoodTable:
    """Packed per-(SNV, sample) read counts with genotype mixtures."""

    cdef double[:, ::1] _a
    cdef double[:, ::1] _b
    cdef double[:, ::1] _mu_r
    cdef double[:, ::1] _mu_v
    cdef double[:, ::1] _log_w
    cdef double[:, ::1] _log_binom
    cdef long[::1] _ng
    cdef readonly int n_snvs
    cdef readonly int n_samples
    cdef double[::1] _terms

    def __init__(self, a, d, mu_r, mu_v, log_w, n_geno, log_binom):
        a = np.ascontiguousarray(a, dtype=np.float64)
        d = np.ascontiguousarray(d, dtype=np.float64)
        self._a = a
        self._b = np.ascontiguousarray(d - a)
        self._mu_r = np.ascontiguousarray(mu_r, dtype=np.float64)
        self._mu_v = np.ascontiguousarray(mu_v, dtype=np.float64)
        self._log_w = np.ascontiguousarray(log_w, dtype=np.float64)
        self._log_binom = np.ascontiguousarray(log_binom, dtype=np.float64)
        self._ng = np.ascontiguousarray(n_geno, dtype=np.int64).astype(np.dtype("l"))
        self.n_snvs = a.shape[0]
        self.n_samples = a.shape[1] if a.ndim == 2 else 0
        self._terms = np.zeros(max(1, self._mu_v.shape[1] if self._mu_v.ndim == 2 else 1))

    cdef double _cell(self, int i, int t, double phi) nogil:
        cdef double a = self._a[i, t]
        cdef double b = self._b[i, t]
        cdef double mu_r = self._mu_r[i, t]
        cdef long ng = self._ng[i]
        cdef double p, v, m, s
        cdef int g
        if ng == 1:
            p = (1.0 - phi) * mu_r + phi * self._mu_v[i, 0]
            return self._log_binom[i, t] + _binom_term(a, b, p)
        m = NEG_INF
        for g in range(ng):
            p = (1.0 - phi) * mu_r + phi * self._mu_v[i, g]
            v = self._log_w[i, g] + _binom_term(a, b, p)
            self._terms[g] = v
            if v > m:
                m = v
        if m == NEG_INF:
            return NEG_INF
        s = 0.0
        for g in range(ng):
            s += exp(self._terms[g] - m)
        return self._log_binom[i, t] + m + log(s)

    cdef double _total(self, long[::1] z, double[:, ::1] phi) nogil:
        cdef double total = 0.0
        cdef int i, t
        cdef long k
        for i in range(self.n_snvs):
            k = z[i]
            for t in range(self.n_samples):
                total += self._cell(i, t, phi[t, k])
        return total

    def snv_loglik(self, int i, phi):
        cdef double total = 0.0
        cdef int t
        for t in range(self.n_samples):
            total += self._cell(i, t, <double>phi[t])
        return total

    def total(self, z, phi):
        cdef long[::1] zz = np.ascontiguousarray(z, dtype=np.int64).astype(np.dtype("l"))
        cdef double[:, ::1] pp = np.ascontiguousarray(phi, dtype=np.float64)
        return self._total(zz, pp)

    def mh(self, z, parent, cnp.ndarray eta, double sigma, long iters, seed, double beta=1.0):
        """Dirichlet-proposal Metropolis-Hastings over ``eta`` (S, K), updated in place."""
        cdef long[::1] zz = np.ascontiguousarray(z, dtype=np.int64).astype(np.dtype("l"))
        cdef long[::1] par = np.ascontiguousarray(parent, dtype=np.int64).astype(np.dtype("l"))
        cdef double[:, ::1] cur = np.array(eta, dtype=np.float64, order="C")
        cdef int n_s = cur.shape[0]
        cdef int n_k = cur.shape[1]
        cdef double[:, ::1] prop = np.zeros((n_s, n_k))
        cdef double[:, ::1] phi = np.zeros((n_s, n_k))
        cdef double[::1] cur_lg_sum = np.zeros(n_s)
        cdef double[::1] cur_lg_each = np.zeros(n_s)
        cdef double[:, ::1] cur_log = np.zeros((n_s, n_k))
        cdef RngState st
        cdef long it, accepted = 0
        cdef int t, k
        cdef double llh, new_llh, log_q, tot, g, u, a, al, p_tot, p_lg, fwd, rev, lg
        cdef bint valid
        _seed(&st, <uint64_t>seed)

        with nogil:
            _to_phi(cur, phi, par, n_s, n_k)
            llh = self._total(zz, phi)
            _cache(cur, cur_lg_sum, cur_lg_each, cur_log, sigma, n_s, n_k)
            for it in range(iters):
                log_q = 0.0
                valid = True
                for t in range(n_s):
                    tot = 0.0
                    for k in range(n_k):
                        g = _gamma(&st, sigma * cur[t, k] + 1.0)
                        prop[t, k] = g
                        tot += g
                    for k in range(n_k):
                        prop[t, k] = prop[t, k] / tot
                        if prop[t, k] <= 0.0:
                            valid = False
                    if not valid:
                        continue
                    p_tot = 0.0
                    p_lg = 0.0
                    fwd = 0.0
                    rev = 0.0
                    for k in range(n_k):
                        al = sigma * prop[t, k] + 1.0
                        p_tot += al
                        p_lg += _lgamma(al)
                        rev += (al - 1.0) * cur_log[t, k]
                        fwd += (sigma * cur[t, k]) * log(prop[t, k])
                    log_q += (_lgamma(p_tot) - p_lg + rev) - (cur_lg_sum[t] - cur_lg_each[t] + fwd)
                u = _uniform(&st)
                if not valid:
                    continue
                _to_phi(prop, phi, par, n_s, n_k)
                new_llh = self._total(zz, phi)
                a = beta * (new_llh - llh) + log_q
                if log(u) < a:
                    for t in range(n_s):
                        for k in range(n_k):
                            cur[t, k] = prop[t, k]
                    llh = new_llh
                    accepted += 1
                    _cache(cur, cur_lg_sum, cur_lg_each, cur_log, sigma, n_s, n_k)
        for t in range(n_s):
            for k in range(n_k):
                eta[t, k] = cur[t, k]
        return accepted, llh


cdef void _to_phi(double[:, ::1] src, double[:, ::1] phi, long[::1] par, int n_s, int n_k) nogil:
    cdef int t, k
    for t in range(n_s):
        for k in range(n_k):
            phi[t, k] = src[t, k]
        for k in range(n_k - 1, 0, -1):
            phi[t, par[k]] += phi[t, k]


cdef void _cache(double[:, ::1] cur, double[::1] lg_sum, double[::1] lg_each,
                 double[:, ::1] cur_log, double sigma, int n_s, int n_k) nogil:
    cdef int t, k
    cdef double tot, lg, al
    for t in range(n_s):
        tot = 0.0
        lg = 0.0
        for k in range(n_k):
            al = sigma * cur[t, k] + 1.0
            tot += al
            lg += _lgamma(al)
            if cur[t, k] > 0.0:
                cur_log[t, k] = log(cur[t, k])
            else:
                cur_log[t, k] = NEG_INF
        lg_sum[t] = _lgamma(tot)
        lg_each[t] = lg

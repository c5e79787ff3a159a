"""Pure-Python implementation of the hot kernels.

Mirrors ``_kernels.pyx`` operation for operation so both backends produce
bit-identical results on the same platform: same PRNG (xoshiro256**),
same gamma sampler (Marsaglia-Tsang with Box-Muller normals), same
Lanczos log-gamma, and only libm calls (``math.log``, ``math.exp``, ...).
"""

import math

BACKEND = "python"

_MASK = (1 << 64) - 1
_TWO_M53 = 1.1102230246251565e-16  # 2**-53
_TWO_PI = 6.283185307179586
_HALF_LOG_TWO_PI = 0.9189385332046727
_NEG_INF = float("-inf")

_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lanczos_lgamma(x):
    """log Gamma(x) for x >= 0.5 (Lanczos, g=7, n=9)."""
    x -= 1.0
    a = _LANCZOS[0]
    t = x + 7.5
    for i in range(1, 9):
        a += _LANCZOS[i] / (x + i)
    return _HALF_LOG_TWO_PI + (x + 0.5) * math.log(t) - t + math.log(a)


class Xoshiro:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed):
        z = seed & _MASK
        s = []
        for _ in range(4):
            z = (z + 0x9E3779B97F4A7C15) & _MASK
            x = z
            x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
            s.append(x ^ (x >> 31))
        self.s = s

    def next_u64(self):
        s0, s1, s2, s3 = self.s
        m = (s1 * 5) & _MASK
        result = ((((m << 7) | (m >> 57)) & _MASK) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        # open interval (0, 1)
        return ((self.next_u64() >> 11) + 0.5) * _TWO_M53

    def normal(self):
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)

    def gamma(self, shape):
        # shape >= 1 only; Dirichlet proposal shapes are sigma*eta + 1
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            z = self.normal()
            v = 1.0 + c * z
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * z * z * z * z:
                return d * v
            if math.log(u) < 0.5 * z * z + d * (1.0 - v + math.log(v)):
                return d * v


def draw(seed, kind, n, shape=1.0):
    """Draw ``n`` variates of ``kind`` (uniform, normal, gamma) from a fresh stream."""
    rng = Xoshiro(seed)
    if kind == "uniform":
        return [rng.uniform() for _ in range(n)]
    if kind == "normal":
        return [rng.normal() for _ in range(n)]
    return [rng.gamma(shape) for _ in range(n)]


def _binom_term(a, b, p):
    r = 0.0
    if a > 0.0:
        if p <= 0.0:
            return _NEG_INF
        r += a * math.log(p)
    if b > 0.0:
        if p >= 1.0:
            return _NEG_INF
        r += b * math.log(1.0 - p)
    return r


class LikelihoodTable:
    """Packed per-(SNV, sample) read counts with genotype mixtures.

    Parameters
    ----------
    a, d : (N, S) arrays of reference reads and total depth
    mu_r : (N, S) array
    mu_v, log_w : (N, G) arrays; rows padded past ``n_geno[i]``
    n_geno : (N,) array of genotype counts
    log_binom : (N, S) array of log binomial coefficients
    """

    def __init__(self, a, d, mu_r, mu_v, log_w, n_geno, log_binom):
        self.n_snvs = len(a)
        self.n_samples = len(a[0]) if self.n_snvs else 0
        self._a = [[float(x) for x in row] for row in a]
        self._b = [[float(dd) - float(aa) for aa, dd in zip(ra, rd)] for ra, rd in zip(a, d)]
        self._mu_r = [[float(x) for x in row] for row in mu_r]
        self._ng = [int(g) for g in n_geno]
        self._mu_v = [[float(mu_v[i][g]) for g in range(self._ng[i])] for i in range(self.n_snvs)]
        self._log_w = [[float(log_w[i][g]) for g in range(self._ng[i])] for i in range(self.n_snvs)]
        self._log_binom = [[float(x) for x in row] for row in log_binom]

    def _cell(self, i, t, phi):
        a = self._a[i][t]
        b = self._b[i][t]
        mu_r = self._mu_r[i][t]
        ng = self._ng[i]
        mu_v = self._mu_v[i]
        if ng == 1:
            p = (1.0 - phi) * mu_r + phi * mu_v[0]
            return self._log_binom[i][t] + _binom_term(a, b, p)
        log_w = self._log_w[i]
        terms = []
        m = _NEG_INF
        for g in range(ng):
            p = (1.0 - phi) * mu_r + phi * mu_v[g]
            v = log_w[g] + _binom_term(a, b, p)
            terms.append(v)
            if v > m:
                m = v
        if m == _NEG_INF:
            return _NEG_INF
        s = 0.0
        for v in terms:
            s += math.exp(v - m)
        return self._log_binom[i][t] + m + math.log(s)

    def snv_loglik(self, i, phi):
        """Sum over samples of the log-likelihood of SNV ``i`` at frequencies ``phi`` (length S)."""
        total = 0.0
        for t in range(self.n_samples):
            total += self._cell(i, t, float(phi[t]))
        return total

    def total(self, z, phi):
        """Complete-data log-likelihood; ``phi`` is (S, K), ``z`` maps SNV -> column."""
        phi = [[float(x) for x in row] for row in phi]
        return self._total(list(z), phi)

    def _total(self, z, phi):
        total = 0.0
        for i in range(self.n_snvs):
            k = z[i]
            for t in range(self.n_samples):
                total += self._cell(i, t, phi[t][k])
        return total

    def mh(self, z, parent, eta, sigma, iters, seed, beta=1.0):
        """Dirichlet-proposal Metropolis-Hastings over ``eta`` (S, K), updated in place.

        ``parent`` lists each column's parent column (-1 for the root) in
        breadth-first order. Returns ``(n_accepted, log_likelihood)``.
        """
        rng = Xoshiro(seed)
        n_s = len(eta)
        n_k = len(eta[0])
        z = [int(k) for k in z]
        par = [int(p) for p in parent]
        cur = [[float(x) for x in row] for row in eta]
        prop = [[0.0] * n_k for _ in range(n_s)]
        phi = [[0.0] * n_k for _ in range(n_s)]

        def to_phi(src):
            for t in range(n_s):
                row = phi[t]
                s_row = src[t]
                for k in range(n_k):
                    row[k] = s_row[k]
                for k in range(n_k - 1, 0, -1):
                    row[par[k]] += row[k]

        to_phi(cur)
        llh = self._total(z, phi)

        # cached terms of the current state's proposal density
        cur_lg_sum = [0.0] * n_s
        cur_lg_each = [0.0] * n_s
        cur_log = [[0.0] * n_k for _ in range(n_s)]

        def cache_current():
            for t in range(n_s):
                tot = 0.0
                lg = 0.0
                for k in range(n_k):
                    al = sigma * cur[t][k] + 1.0
                    tot += al
                    lg += lanczos_lgamma(al)
                    cur_log[t][k] = math.log(cur[t][k]) if cur[t][k] > 0.0 else _NEG_INF
                cur_lg_sum[t] = lanczos_lgamma(tot)
                cur_lg_each[t] = lg

        cache_current()
        accepted = 0
        for _ in range(iters):
            log_q = 0.0
            valid = True
            for t in range(n_s):
                row = prop[t]
                c_row = cur[t]
                tot = 0.0
                for k in range(n_k):
                    g = rng.gamma(sigma * c_row[k] + 1.0)
                    row[k] = g
                    tot += g
                for k in range(n_k):
                    row[k] = row[k] / tot
                    if row[k] <= 0.0:
                        valid = False
                if not valid:
                    continue
                # log Q(cur; prop) - log Q(prop; cur)
                p_tot = 0.0
                p_lg = 0.0
                fwd = 0.0
                rev = 0.0
                for k in range(n_k):
                    al = sigma * row[k] + 1.0
                    p_tot += al
                    p_lg += lanczos_lgamma(al)
                    rev += (al - 1.0) * cur_log[t][k]
                    fwd += (sigma * c_row[k]) * math.log(row[k])
                log_q += (lanczos_lgamma(p_tot) - p_lg + rev) - (cur_lg_sum[t] - cur_lg_each[t] + fwd)
            u = rng.uniform()
            if not valid:
                continue
            to_phi(prop)
            new_llh = self._total(z, phi)
            a = beta * (new_llh - llh) + log_q
            if math.log(u) < a:
                for t in range(n_s):
                    for k in range(n_k):
                        cur[t][k] = prop[t][k]
                llh = new_llh
                accepted += 1
                cache_current()
        for t in range(n_s):
            for k in range(n_k):
                eta[t][k] = cur[t][k]
        return accepted, llh

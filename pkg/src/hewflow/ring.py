"""Exact polynomial arithmetic over Z_{q_i}[x]/(x^n + 1) in residue form.

A ring element is held as one residue vector per limb prime q_i, with
q = prod(q_i) never materialised in the arithmetic path.  Multiplication
uses an in-place negacyclic number theoretic transform per limb: the
forward pass is a Cooley-Tukey butterfly network (natural order in,
bit-reversed order out) with the 2n-th root psi folded into the twiddles,
and the inverse pass is the matching Gentleman-Sande network.  Both are
stage-vectorised with numpy so a transform touches each coefficient
O(log n) times through array operations.

Limb primes must satisfy q_i = 1 (mod 2n) so a primitive 2n-th root of
unity exists.  Primes below 2^32 multiply directly in uint64; primes up
to 2^42 use a split-product reduction; larger primes (permitted up to
2^62) fall back to exact object arithmetic and are intended for tests.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Domain",
    "RingParams",
    "RnsPoly",
    "make_ring_params",
    "find_ntt_primes",
    "is_prime",
    "ntt_forward",
    "ntt_inverse",
    "poly_add",
    "poly_sub",
    "poly_neg",
    "poly_mul",
    "sample_uniform",
    "sample_ternary",
    "sample_gaussian",
    "drop_limb",
    "truncate_limbs",
]


class Domain(Enum):
    COEFF = "coeff"
    NTT = "ntt"


# Deterministic Miller-Rabin witness set, sufficient for all n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

def _cond_sub(x: np.ndarray, q) -> np.ndarray:
    """Map x in [0, 2q) to [0, q) with one comparison.

    Cheaper than `%`: comparisons and subtractions vectorise, and it also
    accepts a per-limb column of moduli, where integer division would fall
    off numpy's fast scalar-divisor path.
    """
    return np.where(x >= q, x - q, x)


def is_prime(m: int) -> bool:
    """Deterministic Miller-Rabin primality test for 64-bit-scale integers."""
    if m < 2:
        return False
    for p in _MR_WITNESSES:
        if m % p == 0:
            return m == p
    d = m - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, m)
        if x in (1, m - 1):
            continue
        for _ in range(r - 1):
            x = x * x % m
            if x == m - 1:
                break
        else:
            return False
    return True


def find_ntt_primes(n: int, bit_sizes: Sequence[int]) -> list[int]:
    """Return distinct primes q = k*2n + 1, one per requested bit size.

    Scans k downward from the largest value with q below 2^bits, so the
    choice is deterministic.  Repeated bit sizes yield distinct primes.
    """
    primes: list[int] = []
    for bits in bit_sizes:
        if not 8 <= bits <= 61:
            raise ValidationError(f"limb bit size {bits} out of supported range [8, 61]")
        step = 2 * n
        k = ((1 << bits) - 2) // step
        while k > 0:
            cand = k * step + 1
            if cand not in primes and is_prime(cand):
                primes.append(cand)
                break
            k -= 1
        else:
            raise ValidationError(f"no {bits}-bit prime of form k*{step}+1 found")
    return primes


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.uint64)
    rev = np.zeros(n, dtype=np.uint64)
    for b in range(bits):
        rev |= ((idx >> np.uint64(b)) & np.uint64(1)) << np.uint64(bits - 1 - b)
    return rev.astype(np.int64)


def _find_psi(n: int, q: int) -> int:
    """Smallest primitive 2n-th root of unity modulo q (n a power of two)."""
    for g in range(2, q):
        cand = pow(g, (q - 1) // (2 * n), q)
        if pow(cand, n, q) == q - 1:
            return cand
    raise ValidationError(f"no primitive {2 * n}-th root of unity mod {q}")


class _LimbPlan:
    """Per-prime NTT tables and modular multiply strategy."""

    def __init__(self, q: int, n: int):
        self.q = q
        self.n = n
        self.inv_q = 1.0 / q
        # direct mode needs 2q*q < 2^64 (the inverse transform multiplies a
        # value in [0, 2q) by a twiddle before reducing), hence 31 bits
        bits = q.bit_length()
        if bits <= 31:
            self.mode = "direct"
            self.shift = 0
        elif bits <= 42:
            self.mode = "split"
            self.shift = 63 - bits
        else:
            self.mode = "object"
            self.shift = 0
        self.mask = (1 << self.shift) - 1

        psi = _find_psi(n, q)
        self.psi = psi
        brv = _bit_reverse_indices(n)
        fwd = np.array([pow(psi, int(b), q) for b in brv], dtype=np.uint64)
        psi_inv = pow(psi, -1, q)
        inv = np.array([pow(psi_inv, int(b), q) for b in brv], dtype=np.uint64)
        self.tw_fwd = fwd
        self.tw_inv = inv
        self.n_inv = pow(n, -1, q)
        if self.mode == "split":
            s = np.uint64(self.shift)
            self.tw_fwd_hi = fwd >> s
            self.tw_fwd_lo = fwd & np.uint64(self.mask)
            self.tw_inv_hi = inv >> s
            self.tw_inv_lo = inv & np.uint64(self.mask)

    # -- modular multiply -------------------------------------------------

    def mul(self, a: np.ndarray, b) -> np.ndarray:
        """Elementwise a*b mod q. b may be an array or a scalar."""
        q = np.uint64(self.q)
        if self.mode == "direct":
            return (a * b) % q
        if self.mode == "split":
            s = np.uint64(self.shift)
            if isinstance(b, np.ndarray):
                bh = b >> s
                bl = b & np.uint64(self.mask)
            else:
                bh = np.uint64(int(b) >> self.shift)
                bl = np.uint64(int(b) & self.mask)
            t = (a * bh) % q
            return ((t << s) + a * bl) % q
        ao = a.astype(object)
        bo = b.astype(object) if isinstance(b, np.ndarray) else int(b)
        return ((ao * bo) % self.q).astype(np.uint64)

    def _mul_tw(self, a: np.ndarray, lo: int, hi: int, inverse: bool) -> np.ndarray:
        """Multiply block rows by the twiddle slice [lo:hi) (one per row)."""
        q = np.uint64(self.q)
        if self.mode == "split":
            s = np.uint64(self.shift)
            th = (self.tw_inv_hi if inverse else self.tw_fwd_hi)[lo:hi, None]
            tl = (self.tw_inv_lo if inverse else self.tw_fwd_lo)[lo:hi, None]
            t = (a * th) % q
            return ((t << s) + a * tl) % q
        tw = (self.tw_inv if inverse else self.tw_fwd)[lo:hi, None]
        if self.mode == "direct":
            return (a * tw) % q
        ao = a.astype(object)
        return ((ao * tw.astype(object)) % self.q).astype(np.uint64)

    # -- transforms --------------------------------------------------------

    def fwd(self, vec: np.ndarray) -> np.ndarray:
        """Negacyclic NTT, natural order in, bit-reversed order out."""
        q = np.uint64(self.q)
        a = vec.copy()
        t, m = 1, self.n >> 1
        while m >= 1:
            blk = a.reshape(t, 2, m)
            u = blk[:, 0, :]
            v = self._mul_tw(blk[:, 1, :], t, 2 * t, inverse=False)
            s0 = _cond_sub(u + v, q)
            s1 = _cond_sub(u + q - v, q)
            blk[:, 0, :] = s0
            blk[:, 1, :] = s1
            t <<= 1
            m >>= 1
        return a

    def inv(self, vec: np.ndarray) -> np.ndarray:
        """Inverse negacyclic NTT, bit-reversed order in, natural order out."""
        q = np.uint64(self.q)
        a = vec.copy()
        t, m = self.n >> 1, 1
        while m < self.n:
            blk = a.reshape(t, 2, m)
            u = blk[:, 0, :]
            v = blk[:, 1, :]
            s0 = _cond_sub(u + v, q)
            d = _cond_sub(u + q - v, q)
            blk[:, 0, :] = s0
            blk[:, 1, :] = self._mul_tw(d, t, 2 * t, inverse=True)
            t >>= 1
            m <<= 1
        return self.mul(a, np.uint64(self.n_inv))


class RingParams:
    """Ring degree, limb primes, and precomputed transform plans.

    Immutable after construction; the twiddle tables are read-only and the
    whole object is safe to share across threads.  Limbs whose primes fit
    below 2^32 are transformed together through one stacked butterfly
    network; wider limbs run their own per-limb plan.
    """

    __slots__ = (
        "n", "limbs", "plans", "q_col",
        "_direct", "_others", "_q_direct",
        "_tw_fwd_stack", "_tw_inv_stack", "_ninv_direct",
    )

    def __init__(self, n: int, limbs: tuple[int, ...], plans: tuple[_LimbPlan, ...]):
        self.n = n
        self.limbs = limbs
        self.plans = plans
        self.q_col = np.array(limbs, dtype=np.uint64)[:, None]
        self._direct = tuple(i for i, p in enumerate(plans) if p.mode == "direct")
        self._others = tuple(i for i, p in enumerate(plans) if p.mode != "direct")
        if self._direct:
            self._q_direct = np.array([limbs[i] for i in self._direct], dtype=np.uint64)
            self._tw_fwd_stack = np.stack([plans[i].tw_fwd for i in self._direct])
            self._tw_inv_stack = np.stack([plans[i].tw_inv for i in self._direct])
            self._ninv_direct = np.array(
                [plans[i].n_inv for i in self._direct], dtype=np.uint64
            )
        else:
            self._q_direct = None
            self._tw_fwd_stack = None
            self._tw_inv_stack = None
            self._ninv_direct = None

    def limb_product(self, count: int | None = None) -> int:
        """Product of the first `count` limb primes (all limbs if None)."""
        count = len(self.limbs) if count is None else count
        out = 1
        for q in self.limbs[:count]:
            out *= q
        return out

    def _groups(self, limb_count: int):
        direct = [i for i in self._direct if i < limb_count]
        others = [i for i in self._others if i < limb_count]
        return direct, others

    def fwd_rows(self, rows: np.ndarray) -> np.ndarray:
        """Forward transform of a (limbs, n) residue block."""
        limb_count = rows.shape[0]
        out = np.empty_like(rows)
        direct, others = self._groups(limb_count)
        if direct:
            a = np.ascontiguousarray(rows[direct])
            k = len(direct)
            qs = self._q_direct[:k]
            q3 = qs[:, None, None]
            tw = self._tw_fwd_stack[:k]
            t, m = 1, self.n >> 1
            while m >= 1:
                blk = a.reshape(k, t, 2, m)
                u = blk[:, :, 0, :]
                v = blk[:, :, 1, :] * tw[:, t:2 * t, None]
                for j in range(k):  # scalar-divisor fast path per limb
                    v[j] %= qs[j]
                s0 = _cond_sub(u + v, q3)
                s1 = _cond_sub(u + q3 - v, q3)
                blk[:, :, 0, :] = s0
                blk[:, :, 1, :] = s1
                t <<= 1
                m >>= 1
            out[direct] = a
        for i in others:
            out[i] = self.plans[i].fwd(rows[i])
        return out

    def inv_rows(self, rows: np.ndarray) -> np.ndarray:
        """Inverse transform of a (limbs, n) residue block."""
        limb_count = rows.shape[0]
        out = np.empty_like(rows)
        direct, others = self._groups(limb_count)
        if direct:
            a = np.ascontiguousarray(rows[direct])
            k = len(direct)
            qs = self._q_direct[:k]
            q3 = qs[:, None, None]
            tw = self._tw_inv_stack[:k]
            t, m = self.n >> 1, 1
            while m < self.n:
                blk = a.reshape(k, t, 2, m)
                u = blk[:, :, 0, :]
                v = blk[:, :, 1, :]
                s0 = _cond_sub(u + v, q3)
                d = (u + q3 - v) * tw[:, t:2 * t, None]
                for j in range(k):
                    d[j] %= qs[j]
                blk[:, :, 0, :] = s0
                blk[:, :, 1, :] = d
                t >>= 1
                m <<= 1
            prod = a * self._ninv_direct[:k][:, None]
            for j in range(k):
                prod[j] %= qs[j]
            out[direct] = prod
        for i in others:
            out[i] = self.plans[i].inv(rows[i])
        return out

    def mul_rows(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise modular product of two (limbs, n) residue blocks."""
        limb_count = a.shape[0]
        out = np.empty_like(a)
        direct, others = self._groups(limb_count)
        if direct:
            prod = a[direct] * b[direct]
            for j, i in enumerate(direct):
                prod[j] %= self._q_direct[j]
            out[direct] = prod
        for i in others:
            out[i] = self.plans[i].mul(a[i], b[i])
        return out

    def __repr__(self) -> str:  # keep reprs short, the tables are large
        return f"RingParams(n={self.n}, limbs={self.limbs})"


def make_ring_params(n: int, primes: Sequence[int]) -> RingParams:
    """Validate and precompute a parameter set for Z_{q_i}[x]/(x^n + 1)."""
    if n < 8 or (n & (n - 1)) != 0:
        raise ValidationError(f"ring degree {n} must be a power of two >= 8")
    primes = tuple(int(q) for q in primes)
    if not primes:
        raise ValidationError("at least one limb prime is required")
    if len(set(primes)) != len(primes):
        raise ValidationError("limb primes must be pairwise distinct")
    for q in primes:
        if q >= (1 << 62):
            raise ValidationError(f"limb prime {q} must be below 2^62")
        if q % (2 * n) != 1:
            raise ValidationError(f"limb prime {q} != 1 mod {2 * n}")
        if not is_prime(q):
            raise ValidationError(f"limb modulus {q} is not prime")
    plans = tuple(_LimbPlan(q, n) for q in primes)
    return RingParams(n=n, limbs=primes, plans=plans)


class RnsPoly:
    """A ring element: one residue row per active limb, plus a domain flag.

    Instances are immutable by convention; every operation returns a new
    value and never writes into an input's residue array.
    """

    __slots__ = ("params", "residues", "domain")

    def __init__(self, params: RingParams, residues: np.ndarray, domain: Domain):
        if residues.ndim != 2 or residues.shape[1] != params.n:
            raise ValidationError(
                f"residue array shape {residues.shape} does not match n={params.n}"
            )
        if not 1 <= residues.shape[0] <= len(params.limbs):
            raise ValidationError("limb count out of range for parameter set")
        if residues.dtype != np.uint64:
            residues = residues.astype(np.uint64)
        self.params = params
        self.residues = residues
        self.domain = domain

    @property
    def limb_count(self) -> int:
        return self.residues.shape[0]

    def copy(self) -> "RnsPoly":
        return RnsPoly(self.params, self.residues.copy(), self.domain)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RnsPoly):
            return NotImplemented
        return (
            same_ring(self.params, other.params)
            and self.domain == other.domain
            and self.residues.shape == other.residues.shape
            and bool(np.array_equal(self.residues, other.residues))
        )

    def __repr__(self) -> str:
        return f"RnsPoly(n={self.params.n}, limbs={self.limb_count}, domain={self.domain.value})"


def zero_poly(params: RingParams, limb_count: int | None = None, domain: Domain = Domain.COEFF) -> RnsPoly:
    count = len(params.limbs) if limb_count is None else limb_count
    return RnsPoly(params, np.zeros((count, params.n), dtype=np.uint64), domain)


def from_int_coeffs(params: RingParams, coeffs, limb_count: int | None = None) -> RnsPoly:
    """Build a COEFF-domain element from signed integer coefficients.

    Accepts any integer sequence (including Python ints wider than 64 bits);
    each limb row is the coefficient vector reduced mod q_i.
    """
    count = len(params.limbs) if limb_count is None else limb_count
    arr = np.asarray(coeffs, dtype=object)
    if arr.shape != (params.n,):
        raise ValidationError(f"expected {params.n} coefficients, got {arr.shape}")
    rows = np.empty((count, params.n), dtype=np.uint64)
    for i in range(count):
        rows[i] = (arr % params.limbs[i]).astype(np.uint64)
    return RnsPoly(params, rows, Domain.COEFF)


def same_ring(a: RingParams, b: RingParams) -> bool:
    return a is b or (a.n == b.n and a.limbs == b.limbs)


def _check_pair(a: RnsPoly, b: RnsPoly) -> None:
    if not same_ring(a.params, b.params):
        raise ValidationError("operands built under different ring parameters")
    if a.limb_count != b.limb_count:
        raise ValidationError(
            f"limb count mismatch: {a.limb_count} vs {b.limb_count}"
        )
    if a.domain != b.domain:
        raise ValidationError(f"domain mismatch: {a.domain} vs {b.domain}")


def ntt_forward(p: RnsPoly) -> RnsPoly:
    """Transform COEFF -> NTT (evaluation at the n odd powers of psi per limb)."""
    if p.domain != Domain.COEFF:
        raise ValidationError("ntt_forward expects a COEFF-domain input")
    return RnsPoly(p.params, p.params.fwd_rows(p.residues), Domain.NTT)


def ntt_inverse(p: RnsPoly) -> RnsPoly:
    """Transform NTT -> COEFF; exact inverse of ntt_forward."""
    if p.domain != Domain.NTT:
        raise ValidationError("ntt_inverse expects an NTT-domain input")
    return RnsPoly(p.params, p.params.inv_rows(p.residues), Domain.COEFF)


def poly_add(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    _check_pair(a, b)
    q = a.params.q_col[: a.limb_count]
    return RnsPoly(a.params, (a.residues + b.residues) % q, a.domain)


def poly_sub(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    _check_pair(a, b)
    q = a.params.q_col[: a.limb_count]
    return RnsPoly(a.params, (a.residues + q - b.residues) % q, a.domain)


def poly_neg(a: RnsPoly) -> RnsPoly:
    q = a.params.q_col[: a.limb_count]
    return RnsPoly(a.params, (q - a.residues) % q, a.domain)


def poly_mul(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    """Negacyclic product a*b mod (x^n + 1), returned in the caller's domain."""
    _check_pair(a, b)
    coeff_in = a.domain == Domain.COEFF
    if coeff_in:
        a = ntt_forward(a)
        b = ntt_forward(b)
    prod = RnsPoly(a.params, a.params.mul_rows(a.residues, b.residues), Domain.NTT)
    return ntt_inverse(prod) if coeff_in else prod


def pointwise_mul(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    """Slot product of two NTT-domain elements (no implicit transforms)."""
    if a.domain != Domain.NTT or b.domain != Domain.NTT:
        raise ValidationError("pointwise_mul expects NTT-domain operands")
    return poly_mul(a, b)


def scalar_mul(a: RnsPoly, scalars: Sequence[int]) -> RnsPoly:
    """Multiply by a per-limb scalar (each already reduced mod its q_i)."""
    out = np.empty_like(a.residues)
    for i in range(a.limb_count):
        out[i] = a.params.plans[i].mul(a.residues[i], np.uint64(scalars[i]))
    return RnsPoly(a.params, out, a.domain)


# -- randomness -------------------------------------------------------------


def sample_uniform(params: RingParams, seed, limb_count: int | None = None,
                   domain: Domain = Domain.COEFF) -> RnsPoly:
    """Uniform element of the ring; per-limb residues drawn independently."""
    count = len(params.limbs) if limb_count is None else limb_count
    rng = np.random.default_rng(seed)
    rows = np.empty((count, params.n), dtype=np.uint64)
    for i in range(count):
        rows[i] = rng.integers(0, params.limbs[i], size=params.n, dtype=np.uint64)
    return RnsPoly(params, rows, domain)


def sample_ternary(params: RingParams, seed, limb_count: int | None = None) -> RnsPoly:
    """Uniform coefficients in {-1, 0, 1}, mapped to residues per limb."""
    count = len(params.limbs) if limb_count is None else limb_count
    rng = np.random.default_rng(seed)
    vals = rng.integers(-1, 2, size=params.n, dtype=np.int64)
    rows = np.empty((count, params.n), dtype=np.uint64)
    for i in range(count):
        rows[i] = np.mod(vals, params.limbs[i]).astype(np.uint64)
    return RnsPoly(params, rows, Domain.COEFF)


def _gaussian_cdt(sigma: float):
    tail = int(math.ceil(10.0 * sigma))
    ks = np.arange(-tail, tail + 1, dtype=np.int64)
    probs = np.exp(-(ks.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    cdf = np.cumsum(probs / probs.sum())
    return ks, cdf


def sample_gaussian(params: RingParams, sigma: float, seed,
                    limb_count: int | None = None) -> RnsPoly:
    """Discrete Gaussian coefficients via inverse-CDF table lookup.

    The table covers [-10*sigma, 10*sigma]; a uniform draw per coefficient
    is inverted against the cumulative table, so sampling is deterministic
    for a fixed seed and exactly reproducible across platforms.
    """
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    count = len(params.limbs) if limb_count is None else limb_count
    ks, cdf = _gaussian_cdt(sigma)
    rng = np.random.default_rng(seed)
    u = rng.random(params.n)
    vals = ks[np.searchsorted(cdf, u, side="right")]
    rows = np.empty((count, params.n), dtype=np.uint64)
    for i in range(count):
        rows[i] = np.mod(vals, params.limbs[i]).astype(np.uint64)
    return RnsPoly(params, rows, Domain.COEFF)


# -- limb management ----------------------------------------------------------


def drop_limb(p: RnsPoly) -> RnsPoly:
    """Remove the last limb with an exact divide-and-round by its prime.

    The centered remainder of the last residue row is subtracted from every
    remaining row, then each row is multiplied by q_last^{-1} mod q_i.  The
    result represents round(x / q_last).  Plain truncation would corrupt the
    represented value; see truncate_limbs for the value-preserving variant.
    """
    if p.limb_count < 2:
        raise ValidationError("drop_limb requires at least two limbs")
    params = p.params
    last_idx = p.limb_count - 1
    q_last = params.limbs[last_idx]
    half = q_last >> 1

    if p.domain == Domain.NTT:
        last_coeff = params.plans[last_idx].inv(p.residues[last_idx])
    else:
        last_coeff = p.residues[last_idx]
    big = last_coeff > np.uint64(half)  # centered lift is negative here

    out = np.empty((last_idx, params.n), dtype=np.uint64)
    for i in range(last_idx):
        q_i = params.limbs[i]
        plan = params.plans[i]
        # centered remainder mod q_i: subtract q_last where the lift is negative
        c = last_coeff % np.uint64(q_i)
        c = np.where(big, (c + q_i - (q_last % q_i)) % np.uint64(q_i), c)
        if p.domain == Domain.NTT:
            c = plan.fwd(c)
        diff = (p.residues[i] + np.uint64(q_i) - c) % np.uint64(q_i)
        inv = pow(q_last, -1, q_i)
        out[i] = plan.mul(diff, np.uint64(inv))
    return RnsPoly(params, out, p.domain)


def truncate_limbs(p: RnsPoly, keep: int) -> RnsPoly:
    """Keep the first `keep` limb rows, preserving the represented value.

    Valid only when the centered lift of the element is small relative to
    the remaining modulus, which holds for every ciphertext decryption
    identity (the noise-plus-message term is tiny compared to any prefix
    modulus).  The represented small value and any tracked scale are
    unchanged.
    """
    if not 1 <= keep <= p.limb_count:
        raise ValidationError(f"cannot keep {keep} of {p.limb_count} limbs")
    if keep == p.limb_count:
        return p
    return RnsPoly(p.params, p.residues[:keep].copy(), p.domain)

"""Ring arithmetic tests: transforms, schoolbook oracle, RNS consistency, sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hewflow.errors import ValidationError
from hewflow.ring import (
    Domain,
    RnsPoly,
    drop_limb,
    find_ntt_primes,
    from_int_coeffs,
    is_prime,
    make_ring_params,
    ntt_forward,
    ntt_inverse,
    poly_add,
    poly_mul,
    poly_neg,
    poly_sub,
    sample_gaussian,
    sample_ternary,
    sample_uniform,
    truncate_limbs,
    zero_poly,
)

# Small primes q = 1 (mod 2n) used throughout: 17 and 97 for n=8, 97 for n=16,
# 193 for n=32.
P8 = make_ring_params(8, [17])
P8_97 = make_ring_params(8, [97])
P16 = make_ring_params(16, [97])
P32 = make_ring_params(32, [193])


def schoolbook_negacyclic(a, b, q):
    """O(n^2) reference product in Z_q[x]/(x^n + 1), x^n wraps to -1."""
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            term = int(a[i]) * int(b[j])
            if k >= n:
                out[k - n] = (out[k - n] - term) % q
            else:
                out[k] = (out[k] + term) % q
    return [c % q for c in out]


def coeff_poly(params, coeffs):
    return from_int_coeffs(params, list(coeffs) + [0] * (params.n - len(coeffs)))


def rand_poly(params, rng):
    coeffs = rng.integers(0, params.limbs[0], size=params.n)
    return from_int_coeffs(params, [int(c) for c in coeffs], limb_count=1)


class TestTransforms:
    def test_delta_transforms_to_all_ones(self):
        delta = coeff_poly(P8, [1])
        out = ntt_forward(delta)
        assert np.array_equal(out.residues[0], np.ones(8, dtype=np.uint64))
        assert out.domain == Domain.NTT

    def test_all_ones_inverts_to_delta(self):
        ones = RnsPoly(P8, np.ones((1, 8), dtype=np.uint64), Domain.NTT)
        back = ntt_inverse(ones)
        expect = np.zeros(8, dtype=np.uint64)
        expect[0] = 1
        assert np.array_equal(back.residues[0], expect)

    def test_round_trip_exact(self):
        rng = np.random.default_rng(7)
        for params in (P8, P16, P32):
            for _ in range(20):
                p = rand_poly(params, rng)
                assert ntt_inverse(ntt_forward(p)) == p

    def test_ntt_then_forward_round_trip(self):
        rng = np.random.default_rng(11)
        p = ntt_forward(rand_poly(P16, rng))
        assert ntt_forward(ntt_inverse(p)) == p

    def test_domain_errors(self):
        p = rand_poly(P8, np.random.default_rng(0))
        with pytest.raises(ValidationError):
            ntt_inverse(p)
        with pytest.raises(ValidationError):
            ntt_forward(ntt_forward(p))


class TestMultiplication:
    def test_multiplicative_identity(self):
        rng = np.random.default_rng(3)
        a = rand_poly(P8_97, rng)
        one = coeff_poly(P8_97, [1])
        assert poly_mul(a, one) == a

    def test_negacyclic_wraparound(self):
        # x^4 * x^4 = x^8 = -1 in Z_q[x]/(x^8 + 1)
        x4 = coeff_poly(P8, [0, 0, 0, 0, 1])
        prod = poly_mul(x4, x4)
        expect = np.zeros(8, dtype=np.uint64)
        expect[0] = 17 - 1
        assert np.array_equal(prod.residues[0], expect)

    @pytest.mark.parametrize("params", [P8_97, P16, P32])
    def test_matches_schoolbook(self, params):
        rng = np.random.default_rng(params.n)
        q = params.limbs[0]
        for _ in range(200):
            a = rand_poly(params, rng)
            b = rand_poly(params, rng)
            got = poly_mul(a, b)
            want = schoolbook_negacyclic(a.residues[0], b.residues[0], q)
            assert [int(c) for c in got.residues[0]] == want

    def test_pointwise_product_is_transform_of_product(self):
        rng = np.random.default_rng(42)
        a = rand_poly(P8_97, rng)
        b = rand_poly(P8_97, rng)
        lhs = ntt_inverse(poly_mul(ntt_forward(a), ntt_forward(b)))
        want = schoolbook_negacyclic(a.residues[0], b.residues[0], 97)
        assert [int(c) for c in lhs.residues[0]] == want

    def test_ring_relation_monomials(self):
        # multiplying by x^k for k >= n equals multiplying by -x^(k-n)
        rng = np.random.default_rng(5)
        a = rand_poly(P8_97, rng)
        for k in range(8, 16):
            hi = poly_mul(a, coeff_poly(P8_97, [0] * (k - 8) + [1]))
            assert poly_mul_by_monomial(a, k) == poly_neg(hi)

    def test_mismatched_params_rejected(self):
        a = rand_poly(P8, np.random.default_rng(0))
        b = rand_poly(P8_97, np.random.default_rng(0))
        with pytest.raises(ValidationError):
            poly_mul(a, b)


def poly_mul_by_monomial(a, k):
    """Multiply by x^k via explicit coefficient rotation with sign wrap."""
    n = a.params.n
    q = a.params.limbs[0]
    out = [0] * n
    for i in range(n):
        j = i + k
        sign = 1
        while j >= n:
            j -= n
            sign = -sign
        out[j] = int(a.residues[0][i]) * sign % q
    return from_int_coeffs(a.params, out, limb_count=1)


class TestAdditive:
    def test_add_zero(self):
        a = rand_poly(P16, np.random.default_rng(1))
        assert poly_add(a, zero_poly(P16, 1)) == a

    def test_sub_self_is_zero(self):
        a = rand_poly(P16, np.random.default_rng(2))
        assert poly_sub(a, a) == zero_poly(P16, 1)

    @given(st.integers(0, 2**32))
    @settings(max_examples=30, deadline=None)
    def test_add_then_sub_round_trips(self, seed):
        rng = np.random.default_rng(seed)
        a = rand_poly(P16, rng)
        b = rand_poly(P16, rng)
        assert poly_sub(poly_add(a, b), b) == a

    def test_neg_twice(self):
        a = rand_poly(P8, np.random.default_rng(9))
        assert poly_neg(poly_neg(a)) == a


class TestRnsConsistency:
    def test_per_limb_matches_integer_oracle(self):
        # two limbs below 2^20; CRT-recombined per-limb arithmetic must equal
        # direct arithmetic mod q0*q1 on an integer implementation
        n = 8
        q0, q1 = find_ntt_primes(n, [18, 19])
        assert q0 < 2**20 and q1 < 2**20
        params = make_ring_params(n, [q0, q1])
        q = q0 * q1
        rng = np.random.default_rng(123)
        for _ in range(50):
            av = [int(x) for x in rng.integers(0, q, size=n)]
            bv = [int(x) for x in rng.integers(0, q, size=n)]
            a = from_int_coeffs(params, av)
            b = from_int_coeffs(params, bv)
            got = poly_mul(a, b)
            want = schoolbook_negacyclic(av, bv, q)
            recon = [
                crt_pair(int(got.residues[0][i]), int(got.residues[1][i]), q0, q1)
                for i in range(n)
            ]
            assert recon == want


def crt_pair(r0, r1, q0, q1):
    m = q0 * q1
    e0 = q1 * pow(q1, -1, q0)
    e1 = q0 * pow(q0, -1, q1)
    return (r0 * e0 + r1 * e1) % m


class TestSampling:
    PARAMS = make_ring_params(64, find_ntt_primes(64, [30, 30]))

    def test_uniform_deterministic(self):
        a = sample_uniform(self.PARAMS, 77)
        b = sample_uniform(self.PARAMS, 77)
        assert a == b
        assert a != sample_uniform(self.PARAMS, 78)

    def test_ternary_values(self):
        p = sample_ternary(self.PARAMS, 5)
        q0 = self.PARAMS.limbs[0]
        lifted = set(int(x) for x in p.residues[0])
        assert lifted <= {0, 1, q0 - 1}
        assert sample_ternary(self.PARAMS, 5) == p

    def test_gaussian_statistics(self):
        # mean within 3*sigma/sqrt(N) of zero, stddev within 5% of target
        sigma = 3.2
        n_total = 100_000
        params = make_ring_params(8192, find_ntt_primes(8192, [30]))
        draws = []
        for seed in range(-(-n_total // params.n)):
            p = sample_gaussian(params, sigma, seed)
            q0 = params.limbs[0]
            v = p.residues[0].astype(np.int64)
            v = np.where(v > q0 // 2, v - q0, v)
            draws.append(v)
        vals = np.concatenate(draws).astype(np.float64)
        assert len(vals) >= n_total
        assert abs(vals.mean()) < 3 * sigma / np.sqrt(len(vals))
        assert abs(vals.std() - sigma) / sigma < 0.05

    def test_gaussian_requires_positive_sigma(self):
        with pytest.raises(ValidationError):
            sample_gaussian(self.PARAMS, 0.0, 1)


class TestLimbManagement:
    PARAMS = make_ring_params(16, find_ntt_primes(16, [30, 24, 24]))

    def test_drop_limb_structural(self):
        p = sample_uniform(self.PARAMS, 1)
        out = drop_limb(p)
        assert out.limb_count == 2
        assert out.residues.size == p.residues.size - self.PARAMS.n

    def test_drop_limb_is_rounded_division(self):
        # encode a known small integer times q_last plus remainder; the drop
        # must recover the rounded quotient
        q_last = self.PARAMS.limbs[-1]
        vals = [5 * q_last + 3, -(7 * q_last) + q_last // 3, q_last // 2 + 1, 0] + [0] * 12
        p = from_int_coeffs(self.PARAMS, vals)
        out = drop_limb(p)
        want = [round_div(v, q_last) for v in vals]
        got = [
            crt_pair(int(out.residues[0][i]), int(out.residues[1][i]),
                     self.PARAMS.limbs[0], self.PARAMS.limbs[1])
            for i in range(self.PARAMS.n)
        ]
        q01 = self.PARAMS.limbs[0] * self.PARAMS.limbs[1]
        want_mod = [w % q01 for w in want]
        assert got == want_mod

    def test_drop_limb_matches_in_ntt_domain(self):
        p = sample_uniform(self.PARAMS, 9)
        via_coeff = ntt_forward(drop_limb(p))
        via_ntt = drop_limb(ntt_forward(p))
        assert via_coeff == via_ntt

    def test_single_limb_rejected(self):
        p = sample_uniform(self.PARAMS, 2)
        twice = drop_limb(drop_limb(p))
        assert twice.limb_count == 1
        with pytest.raises(ValidationError):
            drop_limb(twice)

    def test_truncate_preserves_small_values(self):
        vals = [3, -2, 1, 0, -1, 4, 0, 0] + [0] * 8
        p = from_int_coeffs(self.PARAMS, vals)
        t = truncate_limbs(p, 1)
        q0 = self.PARAMS.limbs[0]
        got = [int(x) if x <= q0 // 2 else int(x) - q0 for x in t.residues[0]]
        assert got == vals


def round_div(x, q):
    # round-half-away-from-center matching the centered-remainder drop
    r = x % q
    if r > q // 2:
        r -= q
    return (x - r) // q


class TestParamsValidation:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValidationError):
            make_ring_params(12, [97])

    def test_rejects_small_degree(self):
        with pytest.raises(ValidationError):
            make_ring_params(4, [17])

    def test_rejects_bad_residue_class(self):
        with pytest.raises(ValidationError):
            make_ring_params(8, [19])  # 19 != 1 mod 16

    def test_rejects_composite(self):
        with pytest.raises(ValidationError):
            make_ring_params(8, [17 * 97])

    def test_rejects_duplicates(self):
        with pytest.raises(ValidationError):
            make_ring_params(8, [97, 97])

    def test_prime_search_is_deterministic(self):
        assert find_ntt_primes(2048, [40, 30]) == find_ntt_primes(2048, [40, 30])
        for q in find_ntt_primes(2048, [40, 30, 30]):
            assert is_prime(q) and q % 4096 == 1

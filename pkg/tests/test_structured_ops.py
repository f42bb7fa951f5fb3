import json
import math

import numpy as np
import pytest

from helsonlab.structured_ops import (
    HankelTruncation, HelsonTruncation, LinearMap, build_hankel, build_helson,
    dense_matrix, hankel_matvec_fft, probe_linearity, probe_symmetry,
    rank_one_dirichlet, write_csv_matrix,
)
from helsonlab.symbols import DomainError, SymbolSpec, restrict


def hilbert_b(N):
    # b(n) = 1/(n+1): the Hankel section is the Hilbert matrix
    return 1.0 / (np.arange(2 * N - 1) + 1.0)


class TestLinearMap:
    def test_shape_checks(self):
        lm = LinearMap(2, 3, False, lambda u: np.zeros(2))
        with pytest.raises(ValueError):
            lm.apply(np.zeros(2))
        assert lm.apply(np.zeros(3)).shape == (2,)

    def test_bad_matvec_shape_detected(self):
        lm = LinearMap(2, 2, False, lambda u: np.zeros(3))
        with pytest.raises(ValueError):
            lm.apply(np.zeros(2))

    def test_metadata_json(self):
        lm = build_hankel(hilbert_b(4))
        rec = json.loads(lm.to_json())
        assert rec == {"rows": 4, "cols": 4, "symmetric": True,
                       "description": lm.description}

    def test_probe_invariants_on_all_constructors(self):
        rng = np.random.default_rng(7)
        maps = [
            build_hankel(hilbert_b(33)),
            build_helson(SymbolSpec("helson_a", alpha=1.0), 40),
            rank_one_dirichlet(25, 0.3),
        ]
        for lm in maps:
            assert probe_linearity(lm, rng) < 1e-12
        for lm in maps[:2]:
            assert probe_symmetry(lm, rng) < 1e-12


class TestHankel:
    def test_hilbert_two_by_two(self):
        M = dense_matrix(build_hankel(hilbert_b(2)))
        assert np.allclose(M, [[1.0, 0.5], [0.5, 1.0 / 3.0]], rtol=0, atol=1e-15)

    def test_delta_sequence(self):
        M = dense_matrix(build_hankel([1.0, 0.0, 0.0]))
        want = np.zeros((2, 2))
        want[0, 0] = 1.0
        assert np.allclose(M, want, rtol=0, atol=1e-15)

    def test_antidiagonal_constancy(self):
        rng = np.random.default_rng(3)
        H = HankelTruncation(rng.standard_normal(127))
        N = H.N
        for j in range(N - 1):
            for k in range(N - 1):
                assert H.entry(j + 1, k) == H.entry(j, k + 1)

    def test_even_length_rejected(self):
        with pytest.raises(ValueError):
            HankelTruncation(np.ones(4))

    def test_scalar_case(self):
        H = HankelTruncation(np.array([2.5]))
        assert np.allclose(hankel_matvec_fft(H, np.array([3.0])), [7.5])

    def test_column_extraction(self):
        b = hilbert_b(16)
        H = HankelTruncation(b)
        e0 = np.zeros(16)
        e0[0] = 1.0
        assert np.allclose(hankel_matvec_fft(H, e0), b[:16], rtol=1e-14, atol=0)

    @pytest.mark.parametrize("N", [2, 5, 64, 257, 1024, 2048])
    def test_fft_matches_dense(self, N):
        rng = np.random.default_rng(N)
        b = rng.standard_normal(2 * N - 1)
        H = HankelTruncation(b)
        u = rng.standard_normal(N)
        want = H.dense() @ u
        got = hankel_matvec_fft(H, u)
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)

    def test_hilbert_1024_against_dense(self):
        N = 1024
        rng = np.random.default_rng(0)
        H = HankelTruncation(hilbert_b(N))
        u = rng.standard_normal(N)
        want = H.dense() @ u
        got = hankel_matvec_fft(H, u)
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)

    def test_complex_input(self):
        N = 8
        rng = np.random.default_rng(1)
        H = HankelTruncation(rng.standard_normal(2 * N - 1))
        u = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        assert np.allclose(hankel_matvec_fft(H, u), H.dense() @ u, rtol=1e-12)

    def test_dimension_mismatch(self):
        H = HankelTruncation(np.ones(5))
        with pytest.raises(ValueError):
            hankel_matvec_fft(H, np.ones(4))


class TestHelson:
    def test_first_row_is_the_sequence(self):
        N = 30
        spec = SymbolSpec("helson_a", alpha=1.0)
        lm = build_helson(spec, N)
        e1 = np.zeros(N)
        e1[0] = 1.0
        want = restrict(spec, N).values
        assert np.allclose(lm.apply(e1), want, rtol=0, atol=0)

    def test_two_by_two_expansion(self):
        t, s = 0.7, -0.2
        table = {1: 1.0, 2: t, 3: 0.0, 4: s}
        lm = build_helson(lambda n: np.vectorize(table.__getitem__)(n), 2)
        got = lm.apply(np.array([1.0, 1.0]))
        assert np.allclose(got, [1.0 + t, t + s], rtol=0, atol=1e-15)

    def test_matches_dense_oracle(self):
        N = 256
        spec = SymbolSpec("helson_a", alpha=1.0)
        lm = build_helson(spec, N)
        T = HelsonTruncation(spec, N)
        rng = np.random.default_rng(5)
        u = rng.standard_normal(N)
        want = T.dense() @ u
        got = lm.apply(u)
        assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)

    def test_symmetry_exact(self):
        T = HelsonTruncation(SymbolSpec("helson_a", alpha=2.0), 50)
        M = T.dense()
        assert np.array_equal(M, M.T)

    def test_sequence_spec_contract(self):
        N = 5
        seq = restrict(SymbolSpec("helson_a", alpha=1.0), N * N)
        T = HelsonTruncation(seq, N)
        spec_direct = HelsonTruncation(SymbolSpec("helson_a", alpha=1.0), N)
        assert np.array_equal(T.dense(), spec_direct.dense())

    def test_short_sequence_rejected(self):
        seq = restrict(SymbolSpec("helson_a", alpha=1.0), 10)
        with pytest.raises(ValueError):
            HelsonTruncation(seq, 5)

    def test_entry_accessor(self):
        spec = SymbolSpec("helson_a", alpha=1.0)
        T = HelsonTruncation(spec, 20)
        seq = restrict(spec, 400)
        assert T.entry(13, 17) == seq.values[13 * 17 - 1]
        assert T.entry(1, 1) == 0.0
        with pytest.raises(IndexError):
            T.entry(0, 1)

    def test_domain_error_carries_index_context(self):
        def bad(n):
            n = np.asarray(n)
            if np.any(n > 10):
                raise DomainError("boom")
            return np.zeros(n.shape)

        lm = build_helson(bad, 4)
        with pytest.raises(DomainError, match="rows"):
            lm.apply(np.ones(4))


class TestRankOne:
    def test_single_entry(self):
        lm = rank_one_dirichlet(1, 0.7)
        s = np.linalg.svd(dense_matrix(lm), compute_uv=False)
        assert s[0] == pytest.approx(1.0, rel=1e-14)

    def test_harmonic_singular_value(self):
        lm = rank_one_dirichlet(4, 0.0)
        s = np.linalg.svd(dense_matrix(lm), compute_uv=False)
        assert s[0] == pytest.approx(25.0 / 12.0, rel=1e-14)
        assert np.all(s[1:] < 1e-14)

    @pytest.mark.parametrize("xi", [0.1, 0.5, 2.3])
    def test_singular_value_is_xi_free(self, xi):
        N = 37
        lm = rank_one_dirichlet(N, xi)
        s = np.linalg.svd(dense_matrix(lm), compute_uv=False)
        assert s[0] == pytest.approx(np.sum(1.0 / np.arange(1, N + 1)), rel=1e-13)

    def test_entries_are_product_powers(self):
        N, xi = 6, 0.4
        M = dense_matrix(rank_one_dirichlet(N, xi))
        j = np.arange(1, N + 1, dtype=float)
        jk = np.outer(j, j)
        want = jk ** (-0.5) * np.exp(2j * np.pi * xi * np.log(jk))
        assert np.allclose(M, want, rtol=1e-12, atol=0)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_log_bound_on_trace_norm(self, k):
        N = int(math.e ** k)
        lm = rank_one_dirichlet(N, 0.25)
        s = np.linalg.svd(dense_matrix(lm), compute_uv=False)
        assert s[0] <= 1.0 + k


class TestInterlacing:
    def test_nested_truncations_interlace(self):
        # lambda_n of the N-section never exceeds lambda_n of the N'-section
        spec = SymbolSpec("helson_a", alpha=1.0)
        small = np.linalg.eigvalsh(HelsonTruncation(spec, 64).dense())[::-1]
        big = np.linalg.eigvalsh(HelsonTruncation(spec, 96).dense())[::-1]
        assert np.all(small <= big[:64] + 1e-14)


class TestCsvExport:
    def test_round_trip_full_precision(self, tmp_path):
        rng = np.random.default_rng(11)
        M = rng.standard_normal((5, 7))
        p = tmp_path / "m.csv"
        write_csv_matrix(M, p)
        back = np.loadtxt(p, delimiter=",")
        assert np.array_equal(back, M)

    def test_complex_rejected(self, tmp_path):
        with pytest.raises(TypeError):
            write_csv_matrix(np.eye(2) * 1j, tmp_path / "x.csv")

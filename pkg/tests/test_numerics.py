import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prmiso.numerics import (ContractError, DomainError, RngStream, conj_transpose,
                             frobenius_norm, matmul, sample_complex_gaussian, solve_min_norm_ls,
                             vec)


def test_zero_variance_gives_zeros(rng):
    assert np.all(sample_complex_gaussian(rng, 3, 4, 0.0) == 0)


def test_negative_variance_rejected(rng):
    with pytest.raises(DomainError):
        sample_complex_gaussian(rng, 2, 2, -1.0)


def test_unit_variance_second_moment(rng):
    h = sample_complex_gaussian(rng, 1, 100_000, 1.0)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02
    # real and imaginary halves carry half the variance each
    assert abs(np.var(h.real) - 0.5) < 0.01
    assert abs(np.var(h.imag) - 0.5) < 0.01
    assert abs(np.mean(h)) < 0.01


def test_same_seed_bit_identical():
    a = sample_complex_gaussian(RngStream(42), 5, 7)
    b = sample_complex_gaussian(RngStream(42), 5, 7)
    assert np.array_equal(a, b)


def test_stream_reproducibility_first_10k():
    a = RngStream(9).normal(10_000)
    b = RngStream(9).normal(10_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(10).normal(10_000))


def test_child_streams_are_addressable():
    root = RngStream(3)
    x = root.child(2, 5).normal(4)
    root.normal(100)  # consuming the parent does not move its children
    assert np.array_equal(x, RngStream(3).child(2, 5).normal(4))
    assert not np.array_equal(x, root.child(2, 6).normal(4))


def test_generator_is_counter_based():
    assert type(RngStream(0).generator.bit_generator).__name__ == "Philox"


def test_identity_system_returns_rhs():
    b = np.array([1 + 2j, -3.0, 0.5j])
    assert np.allclose(solve_min_norm_ls(np.eye(3), b), b)


def test_overdetermined_hand_example():
    x = solve_min_norm_ls(np.array([[1.0], [1.0]]), np.array([1.0, 3.0]))
    assert x == pytest.approx([2.0])


def test_rank_deficient_min_norm():
    x = solve_min_norm_ls(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([2.0, 2.0]))
    assert x == pytest.approx([1.0, 1.0])


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        solve_min_norm_ls(np.eye(3), np.ones(2))
    with pytest.raises(ContractError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def _random_complex(gen, shape):
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 8), n=st.integers(1, 8), rank=st.integers(1, 8), seed=st.integers(0, 2**32))
def test_ls_beats_random_candidates(m, n, rank, seed):
    gen = np.random.default_rng(seed)
    rank = min(rank, m, n)
    A = _random_complex(gen, (m, rank)) @ _random_complex(gen, (rank, n))
    b = _random_complex(gen, m)
    x = solve_min_norm_ls(A, b)
    best = np.linalg.norm(A @ x - b)
    for _ in range(100):
        y = _random_complex(gen, n)
        assert best <= np.linalg.norm(A @ y - b) + 1e-9
    # residual orthogonal to range(A)
    assert np.linalg.norm(conj_transpose(A) @ (A @ x - b)) < 1e-8 * max(1.0, np.linalg.norm(b))


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 8), n=st.integers(1, 8), rank=st.integers(1, 8), seed=st.integers(0, 2**32))
def test_pseudo_inverse_consistency(m, n, rank, seed):
    gen = np.random.default_rng(seed)
    rank = min(rank, m, n)
    A = _random_complex(gen, (m, rank)) @ _random_complex(gen, (rank, n))
    x0 = _random_complex(gen, n)
    b = A @ x0
    x = solve_min_norm_ls(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)
    # min norm: no longer than the generating solution
    assert np.linalg.norm(x) <= np.linalg.norm(x0) + 1e-9


def test_batched_solve_matches_loop(rng):
    A = sample_complex_gaussian(rng, 5, 3, batch=(4,))
    b = sample_complex_gaussian(rng, 5, 1, batch=(4,))[..., 0]
    xs = solve_min_norm_ls(A, b)
    for k in range(4):
        assert np.allclose(xs[k], np.linalg.lstsq(A[k], b[k], rcond=None)[0])


def test_matrix_helpers(rng):
    X = sample_complex_gaussian(rng, 3, 3)
    assert np.allclose(matmul(np.eye(3), X), X)
    assert frobenius_norm(np.zeros((2, 2))) == 0
    A = sample_complex_gaussian(rng, 3, 4)
    B = sample_complex_gaussian(rng, 4, 2)
    assert np.max(np.abs(conj_transpose(A @ B) - conj_transpose(B) @ conj_transpose(A))) < 1e-12
    assert np.array_equal(conj_transpose(conj_transpose(A)), A)
    assert np.array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])

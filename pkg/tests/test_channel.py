import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csitshare.channel import (
    SystemDims,
    generate_channel_set,
    load_channel_set,
    save_channel_set,
    stacked_interference_matrix,
)
from csitshare.linalg import qr_orthonormal_factor


def test_shapes_reference_system():
    cs = generate_channel_set(SystemDims(3, 5, 3, 2), np.random.default_rng(0))
    assert cs.H.shape == (3, 3, 3, 5)


def test_seeds_give_distinct_realizations():
    dims = SystemDims(3, 5, 3, 2)
    a = generate_channel_set(dims, np.random.default_rng(1))
    b = generate_channel_set(dims, np.random.default_rng(2))
    assert not np.allclose(a.H, b.H)


def test_unit_variance():
    dims = SystemDims(2, 50, 50, 1)
    H = np.concatenate([generate_channel_set(dims, np.random.default_rng(k)).H.ravel() for k in range(10)])
    assert len(H) == 100_000
    assert abs(np.mean(np.abs(H) ** 2) - 1) <= 0.02
    assert abs(np.mean(H.real ** 2) - np.mean(H.imag ** 2)) <= 0.02


def test_stack_blocks_in_order():
    cs = generate_channel_set(SystemDims(3, 5, 3, 2), np.random.default_rng(3))
    S = stacked_interference_matrix(cs, 1)
    assert S.shape == (6, 5)
    assert np.array_equal(S[:3], cs.H[0, 1])
    assert np.array_equal(S[3:], cs.H[2, 1])


def test_two_cells_single_block():
    cs = generate_channel_set(SystemDims(2, 2, 2, 1), np.random.default_rng(4))
    assert np.array_equal(stacked_interference_matrix(cs, 0), cs.H[1, 0])


def test_bad_index():
    cs = generate_channel_set(SystemDims(3, 5, 3, 2), np.random.default_rng(0))
    with pytest.raises(IndexError):
        stacked_interference_matrix(cs, 3)


def test_invalid_dims():
    with pytest.raises(ValueError):
        SystemDims(3, 0, 3, 1)
    with pytest.raises(ValueError):
        SystemDims(3, 2, 2, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_stack_then_qr_roundtrip(K, M, N, seed):
    d = 1
    dims = SystemDims(K, M, N, d)
    cs = generate_channel_set(dims, np.random.default_rng(seed))
    for j in range(K):
        S = stacked_interference_matrix(cs, j)
        assert S.shape == ((K - 1) * N, M)
        for r, i in enumerate(i for i in range(K) if i != j):
            assert np.array_equal(S[r * N:(r + 1) * N], cs.H[i, j])
        if dims.needs_alignment:
            F, C = qr_orthonormal_factor(S)
            assert np.linalg.norm(F @ C - S) <= 1e-10 * np.linalg.norm(S)


def test_json_dump_roundtrip(tmp_path):
    cs = generate_channel_set(SystemDims(3, 5, 3, 2), np.random.default_rng(9))
    save_channel_set(cs, tmp_path / "ch.json")
    back = load_channel_set(tmp_path / "ch.json")
    assert back.dims == cs.dims
    assert np.array_equal(back.H, cs.H)

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bia.scheme import (
    BiaScheme,
    ConstructionError,
    ParameterError,
    SchemeParams,
    block_length,
    build_basis_matrix,
    build_scheme,
    build_switch_matrix,
    coalition_shared_vector,
    coalitions,
    optimal_r,
    sum_dof_formula,
)

from goldens import K4R3_FT, K4R3_ST, K5_FT, K5_SHARED, bits


def feasible(K, r):
    try:
        SchemeParams.create(K, r)
    except ConstructionError:
        return False
    return True


@pytest.mark.parametrize("K,expected", [(5, 2), (1, 1), (3, 2), (2, 1), (42, 6), (10000, 100)])
def test_optimal_r(K, expected):
    assert optimal_r(K) == expected


def test_optimal_r_matches_ceiling_formula_away_from_float_trouble():
    for K in range(1, 3000):
        assert optimal_r(K) == math.ceil((math.sqrt(1 + 4 * K) - 1) / 2 - 1e-12)


def test_optimal_r_k3_maximizes_formula():
    vals = {r: sum_dof_formula(3, r) for r in (1, 2, 3)}
    assert max(vals, key=vals.get) == optimal_r(3)
    assert vals[2] == Fraction(6, 5)


@pytest.mark.parametrize("K,r,expected", [(5, 2, Fraction(10, 7)), (3, 2, Fraction(6, 5)), (4, 1, 1)])
def test_sum_dof_formula(K, r, expected):
    assert sum_dof_formula(K, r) == expected


@pytest.mark.parametrize("K,r", [(3, 0), (3, 4), (0, 1)])
def test_sum_dof_formula_rejects_bad_r(K, r):
    with pytest.raises(ParameterError):
        sum_dof_formula(K, r)


@pytest.mark.parametrize("K,r,n", [(5, 2, 14), (3, 2, 5), (2, 1, 2), (4, 3, 10)])
def test_block_length(K, r, n):
    assert block_length(K, r) == n


def test_k5_basis_matrix_matches_printed_listing():
    F = build_basis_matrix(SchemeParams.create(5))
    np.testing.assert_array_equal(F.T, K5_FT)
    # the complement of the last coalition {4,5} is the dropped B row
    b_rows = {tuple(row) for row in F[5:]}
    assert (1, 1, 1, 0, 0) not in b_rows


def test_k4_r3_padded_matrices():
    s = build_scheme(4, 3, pad_b=True)
    assert s.params.n == 12
    np.testing.assert_array_equal(s.F.T, K4R3_FT)
    np.testing.assert_array_equal(s.S.T, K4R3_ST)
    np.testing.assert_array_equal(s.S[:, 3], [1, 1, 1, 0, 1, 1, 1, 2, 0, 0, 0, 1])


def test_k4_r3_without_padding_is_rejected():
    with pytest.raises(ConstructionError, match="C\\(K-1,r-1\\)"):
        build_scheme(4, 3)


def test_optimal_r_from_k7_exceeds_distinct_b_rows():
    with pytest.raises(ConstructionError, match="C\\(K,K-r\\)"):
        build_scheme(7)


def test_k2_r1_basis():
    np.testing.assert_array_equal(build_scheme(2, 1).F, [[0, 1], [1, 0]])


@pytest.mark.parametrize("K", [3, 4, 5, 6])
def test_switch_matrix_equals_basis_for_r2(K):
    s = build_scheme(K, 2)
    np.testing.assert_array_equal(s.S, s.F)


@pytest.mark.parametrize("K", [1, 2, 5])
def test_switch_matrix_equals_basis_for_r1(K):
    s = build_scheme(K, 1)
    np.testing.assert_array_equal(s.S, s.F)


def test_switch_matrix_rejects_shape_mismatch():
    params = SchemeParams.create(5)
    with pytest.raises(ValueError):
        build_switch_matrix(params, np.zeros((13, 5), dtype=np.uint8))


def test_k5_precoders_match_listing():
    s = build_scheme(5)
    for ps in s.precoders:
        assert ps.labels == tuple(Q for Q in coalitions(5, 2) if ps.owner in Q)
        for Q, v in zip(ps.labels, ps.vectors):
            np.testing.assert_array_equal(v, bits(K5_SHARED[Q]))


def test_k4_r3_precoders_are_basis_columns():
    s = build_scheme(4, 3, pad_b=True)
    v = coalition_shared_vector(s.F, (1, 2, 3))
    np.testing.assert_array_equal(v, [1, 1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1])
    np.testing.assert_array_equal(coalition_shared_vector(s.F, (1, 2, 4)), s.F[:, 2])


def test_shared_vector_examples():
    F = build_scheme(5).F
    np.testing.assert_array_equal(coalition_shared_vector(F, (2, 3)), bits("01100000010000"))
    with pytest.raises(ParameterError):
        coalition_shared_vector(F, (1, 2, 3))
    with pytest.raises(ParameterError):
        coalition_shared_vector(F, (1, 9))


def test_shared_vector_empty_product_is_all_ones():
    s = build_scheme(1)
    np.testing.assert_array_equal(coalition_shared_vector(s.F, (1,)), [1])


FEASIBLE = [(K, r) for K in range(1, 12) for r in range(1, K + 1) if feasible(K, r)]


@pytest.mark.parametrize("K,r", FEASIBLE)
def test_structural_invariants(K, r):
    s = build_scheme(K, r)
    p = s.params
    assert s.F.shape == (p.n, K)
    assert p.n == math.comb(K - 1, r) + r * math.comb(K - 1, r - 1)
    assert p.M == r
    A = s.F[: (r - 1) * K]
    assert np.all(A.sum(axis=1) == K - 1)
    B = s.F[(r - 1) * K:]
    assert np.all(B.sum(axis=1) == K - r)
    assert len({tuple(row) for row in B}) == len(B)
    assert s.S.max() < max(p.M, 2)


@pytest.mark.parametrize("K,r", FEASIBLE)
def test_sharing_and_count_invariants(K, r):
    s = build_scheme(K, r)
    d = math.comb(K - 1, r - 1)
    owners = {}
    for ps in s.precoders:
        assert len(ps.vectors) == d
        for Q, v in zip(ps.labels, ps.vectors):
            assert ps.owner in Q
            owners.setdefault(v.tobytes(), set()).add(ps.owner)
            np.testing.assert_array_equal(v, coalition_shared_vector(s.F, Q, r))
    assert len(owners) == math.comb(K, r)
    assert all(len(o) == r for o in owners.values())


@pytest.mark.parametrize("K,r", [(K, r) for K, r in FEASIBLE if r >= 2])
def test_weight_invariant(K, r):
    s = build_scheme(K, r)
    p = s.params
    surviving = {tuple(np.nonzero(row == 0)[0] + 1) for row in s.F[(r - 1) * K:]}
    for Q in coalitions(K, r):
        v = coalition_shared_vector(s.F, Q, r)
        for blk in range(r - 1):
            assert v[blk * K:(blk + 1) * K].sum() == r
        assert v[(r - 1) * K:].sum() == (1 if Q in surviving else 0)
    if r == 2:
        # the r=2 block length always leaves exactly one coalition without a B row
        assert math.comb(K, 2) - p.b == 1


def test_determinism():
    a, b = build_scheme(6), build_scheme(6)
    assert a.to_json() == b.to_json()
    assert a.fingerprint == b.fingerprint


def test_outputs_are_read_only():
    s = build_scheme(5)
    with pytest.raises(ValueError):
        s.F[0, 0] = 1


def test_formula_consistency_small():
    for K in range(1, 30):
        for r in range(1, K + 1):
            n = block_length(K, r)
            assert Fraction(K * math.comb(K - 1, r - 1), n) == sum_dof_formula(K, r)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FEASIBLE + [(4, 3), (5, 2), (3, 3)]), st.booleans())
def test_json_round_trip_is_bit_exact(kr, pad):
    K, r = kr
    try:
        s = build_scheme(K, r, pad_b=pad)
    except ConstructionError:
        return
    back = BiaScheme.from_dict(json.loads(s.to_json(note="x")))
    assert back.params == s.params
    np.testing.assert_array_equal(back.F, s.F)
    np.testing.assert_array_equal(back.S, s.S)
    for a, b in zip(back.precoders, s.precoders):
        assert a.owner == b.owner and a.labels == b.labels
        for va, vb in zip(a.vectors, b.vectors):
            np.testing.assert_array_equal(va, vb)
    assert back.to_json() == s.to_json()


def test_save_and_load(tmp_path):
    s = build_scheme(5)
    path = tmp_path / "scheme.json"
    s.save(path)
    assert BiaScheme.load(path).fingerprint == s.fingerprint


def test_malformed_document():
    doc = build_scheme(3).to_dict()
    del doc["F"]
    with pytest.raises(ValueError, match="malformed"):
        BiaScheme.from_dict(doc)

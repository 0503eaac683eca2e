from fractions import Fraction

import numpy as np
import pytest

from jcncsim.protocode import (
    EncoderStructureError,
    LiftError,
    ProtographFormatError,
    bundled_code_path,
    lift,
    load_protograph,
)


def write_pg(tmp_path, text):
    f = tmp_path / "pg.txt"
    f.write_text(text)
    return f


def test_bundled_ar3a_loads(ar3a):
    assert ar3a.design_rate == Fraction(4, 5)
    assert ar3a.base_matrix.shape == (3, 11)
    assert ar3a.puncture_flags.sum() == 1
    # recompute the rate from dimensions (loader already validates this)
    m_b, n_b = ar3a.base_matrix.shape
    assert Fraction(n_b - m_b, n_b - 1) == Fraction(4, 5)


def test_simple_rate_half(tmp_path):
    pg = load_protograph(write_pg(tmp_path, "1 2\n1 1\npuncture: 0 0\nrate: 0.5\n"))
    assert pg.design_rate == Fraction(1, 2)


def test_all_zero_column_rejected(tmp_path):
    with pytest.raises(ProtographFormatError):
        load_protograph(write_pg(
            tmp_path, "2 3\n1 0 1\n1 0 1\npuncture: 0 0 0\nrate: 0.5\n"))


def test_inconsistent_row_width_rejected(tmp_path):
    with pytest.raises(ProtographFormatError):
        load_protograph(write_pg(
            tmp_path, "2 3\n1 1 1\n1 1\npuncture: 0 0 0\nrate: 0.5\n"))


def test_rate_mismatch_rejected(tmp_path):
    with pytest.raises(ProtographFormatError):
        load_protograph(write_pg(
            tmp_path, "1 2\n1 1\npuncture: 0 0\nrate: 0.75\n"))


def test_puncture_width_rejected(tmp_path):
    with pytest.raises(ProtographFormatError):
        load_protograph(write_pg(
            tmp_path, "1 2\n1 1\npuncture: 0\nrate: 0.5\n"))


def test_full_length_dimensions(ar3a):
    code = lift(ar3a, 800, seed=1)
    assert (code.n, code.k, code.p) == (8800, 6400, 800)
    assert code.puncture_mask().sum() == 800
    # rate identity at full lift
    assert code.k / (code.n - code.p) == 0.8


def test_desk_scale_dimensions(desk_code):
    assert (desk_code.n, desk_code.k, desk_code.p) == (1100, 800, 100)
    assert desk_code.k / (desk_code.n - desk_code.p) == 0.8


def test_lift_deterministic(ar3a):
    a = lift(ar3a, 50, seed=7)
    b = lift(ar3a, 50, seed=7)
    assert np.array_equal(a.edge_cn, b.edge_cn)
    assert np.array_equal(a.edge_vn, b.edge_vn)


def test_lift_factor_too_small(ar3a):
    with pytest.raises(LiftError):
        lift(ar3a, 2, seed=1)


def test_encode_all_zero(desk_code):
    cw = desk_code.encode(np.zeros(desk_code.k, dtype=np.uint8))
    assert not cw.any()


def test_encode_systematic_and_valid(desk_code, rng):
    # independent syndrome oracle: dense GF(2) product
    h_dense = desk_code.h_csr.toarray().astype(np.int64)
    for _ in range(20):
        u = rng.integers(0, 2, desk_code.k).astype(np.uint8)
        c = desk_code.encode(u)
        assert np.array_equal(c[desk_code.info_positions], u)
        assert not ((h_dense @ c) % 2).any()
        assert desk_code.syndrome_check(c)


def test_encode_wrong_length(desk_code):
    with pytest.raises(ValueError):
        desk_code.encode(np.zeros(desk_code.k + 1, dtype=np.uint8))


def test_xor_closure(desk_code, rng):
    for _ in range(50):
        c1 = desk_code.encode(rng.integers(0, 2, desk_code.k).astype(np.uint8))
        c2 = desk_code.encode(rng.integers(0, 2, desk_code.k).astype(np.uint8))
        assert desk_code.syndrome_check(c1 ^ c2)


def test_flip_one_breaks_syndrome(desk_code, rng):
    c = desk_code.encode(rng.integers(0, 2, desk_code.k).astype(np.uint8))
    for pos in rng.choice(desk_code.n, 50, replace=False):
        bad = c.copy()
        bad[pos] ^= 1
        assert not desk_code.syndrome_check(bad)


def test_syndrome_length_mismatch(desk_code):
    with pytest.raises(ValueError):
        desk_code.syndrome_check(np.zeros(desk_code.n - 1, dtype=np.uint8))


def test_puncture_mask(desk_code, ar3a):
    mask = desk_code.puncture_mask()
    assert mask.sum() == desk_code.p
    # aligned with the punctured column types
    ptypes = np.flatnonzero(ar3a.puncture_flags)
    assert set(np.unique(desk_code.vn_type[mask])) == set(ptypes)
    assert np.array_equal(mask, desk_code.puncture_mask())


def test_unpunctured_mask_all_false(tmp_path):
    pg = load_protograph(write_pg(tmp_path, "1 2\n1 1\npuncture: 0 0\nrate: 0.5\n"))
    code = lift(pg, 16, seed=0)
    assert not code.puncture_mask().any()


@pytest.mark.parametrize("lift_factor", [50, 100])
def test_no_four_cycles(ar3a, lift_factor):
    code = lift(ar3a, lift_factor, seed=3)
    gram = (code.h_csr.astype(np.int64) @ code.h_csr.T.astype(np.int64)).toarray()
    np.fill_diagonal(gram, 0)
    assert gram.max() <= 1


def test_rate_identity_across_lifts(ar3a):
    for z in (25, 100, 200):
        code = lift(ar3a, z, seed=2)
        assert code.k / (code.n - code.p) == 0.8


def test_linearity_superposition(desk_code, rng):
    # random-pair closure plus scaling by zero word
    c0 = desk_code.encode(np.zeros(desk_code.k, dtype=np.uint8))
    u = rng.integers(0, 2, desk_code.k).astype(np.uint8)
    c = desk_code.encode(u)
    assert desk_code.syndrome_check(c ^ c0)


def test_bundled_path_exists():
    assert bundled_code_path().exists()

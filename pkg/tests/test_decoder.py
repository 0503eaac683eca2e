import numpy as np
import pytest

from jcncsim import decoder as dec
from jcncsim.relaylink import (
    Scheme,
    channel_llrs,
    channel_messages,
    make_scheme_config,
    simulate_codeword,
)


def random_message(rng):
    return rng.dirichlet(np.ones(4))


def boxplus_oracle(a, b):
    return np.log((1.0 + np.exp(a + b)) / (np.exp(a) + np.exp(b)))


def test_llr_probability_bijection(rng):
    for _ in range(500):
        p = random_message(rng)
        lp, r1, r2 = dec.llrs_from_quaternary(p)
        back = dec.quaternary_from_llrs(lp, r1, r2)
        assert np.allclose(back, p, atol=1e-10)


def test_cn_update_certainty_preserved():
    e = np.array([1.0, 0.0, 0.0, 0.0])
    out = dec.cn_update_q([e, e])
    assert np.allclose(out, e)


def test_cn_update_uniform_absorbs(rng):
    u = np.full(4, 0.25)
    out = dec.cn_update_q([u, random_message(rng)])
    assert np.allclose(out, u, atol=1e-12)


def test_cn_update_empty_rejected():
    with pytest.raises(ValueError):
        dec.cn_update_q([])


def test_cn_primary_equals_boxplus(rng):
    # exact for arbitrary (nonzero-secondary) inputs
    for _ in range(500):
        p, q = random_message(rng), random_message(rng)
        out = dec.cn_update_q([p, q])
        want = boxplus_oracle(dec.primary_llr(p), dec.primary_llr(q))
        assert np.isclose(dec.primary_llr(out), want, atol=1e-10)


def test_boxplus_identity_and_absorber(rng):
    for _ in range(50):
        x = rng.normal() * 10
        assert dec.boxplus(x, np.inf) == pytest.approx(x, abs=1e-12)
        assert dec.boxplus(np.inf, x) == pytest.approx(x, abs=1e-12)
        assert dec.boxplus(x, 0.0) == 0.0


def test_boxplus_reference_value():
    assert dec.boxplus(2.0, 3.0) == pytest.approx(boxplus_oracle(2.0, 3.0), abs=1e-12)
    assert dec.boxplus(2.0, 3.0) == pytest.approx(1.6936, abs=2e-4)


def test_boxplus_commutative_associative(rng):
    for _ in range(200):
        a, b, c = rng.normal(size=3) * 8
        assert dec.boxplus(a, b) == pytest.approx(dec.boxplus(b, a), abs=1e-12)
        left = dec.boxplus(dec.boxplus(a, b), c)
        right = dec.boxplus(a, dec.boxplus(b, c))
        assert left == pytest.approx(right, abs=1e-9)


def test_cn_update_llr_basics(rng):
    x = 1.7
    assert dec.cn_update_llr([x]) == pytest.approx(x)
    assert dec.cn_update_llr([x, 0.0, rng.normal()]) == 0.0
    with pytest.raises(ValueError):
        dec.cn_update_llr([])


def test_cn_update_llr_matches_probability_domain(rng):
    for _ in range(300):
        msgs = [random_message(rng) for _ in range(4)]
        want = dec.primary_llr(dec.cn_update_q(msgs))
        got = dec.cn_update_llr([dec.primary_llr(m) for m in msgs])
        assert np.isclose(got, want, atol=1e-9)


def test_vn_update_uniform_inputs_pass_channel(rng):
    ch = random_message(rng)
    out = dec.vn_update_q(ch, [np.full(4, 0.25)] * 3)
    assert np.allclose(out, ch, atol=1e-12)


def test_vn_update_certain_channel():
    ch = np.array([1.0, 0.0, 0.0, 0.0])
    out = dec.vn_update_q(ch, [np.full(4, 0.25)])
    assert np.allclose(out, ch)


def test_vn_primary_with_offset_term(rng):
    # primary of the product message = L_g + sum L_i + K_v
    def half_term(r_g, r_w):
        return np.log((1 + np.exp(r_g + r_w)) / ((1 + np.exp(r_g)) * (1 + np.exp(r_w))))

    for _ in range(300):
        g, w = random_message(rng), random_message(rng)
        lg, rg1, rg2 = dec.llrs_from_quaternary(g)
        lw, rw1, rw2 = dec.llrs_from_quaternary(w)
        k_v = half_term(rg1, rw1) - half_term(rg2, rw2)
        out = dec.vn_update_q(g, [w])
        assert np.isclose(dec.primary_llr(out), lg + lw + k_v, atol=1e-9)


def test_vn_update_llr_basics():
    assert dec.vn_update_llr(1.3, []) == pytest.approx(1.3)
    assert dec.vn_update_llr(1.0, [2.0, -0.5]) == pytest.approx(2.5)


def test_vn_equivalence_zero_secondaries(rng):
    # messages with P0 = P3 and P1 = P2 carry zero secondary LLRs
    for _ in range(200):
        def symmetric_msg():
            a, b = rng.uniform(0.05, 1.0, 2)
            return np.array([a, b, b, a]) / (2 * (a + b))

        g, w1, w2 = symmetric_msg(), symmetric_msg(), symmetric_msg()
        out = dec.vn_update_q(g, [w1, w2])
        want = dec.vn_update_llr(
            dec.primary_llr(g), [dec.primary_llr(w1), dec.primary_llr(w2)])
        assert np.isclose(dec.primary_llr(out), want, atol=1e-10)


def test_message_normalization_invariant(rng):
    for _ in range(100):
        msgs = [random_message(rng) for _ in range(3)]
        out_c = dec.cn_update_q(msgs)
        out_v = dec.vn_update_q(msgs[0], msgs[1:])
        assert abs(out_c.sum() - 1.0) < 1e-12
        assert abs(out_v.sum() - 1.0) < 1e-12


def test_decision_symmetry(rng):
    # negating the observation flips secondaries but not the primary LLR
    from jcncsim.fading import BlockChannel
    from jcncsim.relaylink import channel_message, effective_params

    h = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    ec = effective_params(BlockChannel(h), Scheme.STBC_NR2)
    for _ in range(100):
        y = rng.normal() * 3
        gp = channel_message(ec, y, 0.4)
        gm = channel_message(ec, -y, 0.4)
        assert np.allclose(gm, gp[::-1], atol=1e-12)
        assert np.isclose(dec.primary_llr(gp), dec.primary_llr(gm), atol=1e-10)


# ---------------------------------------------------------------------------
# codeword-level decoding
# ---------------------------------------------------------------------------

def noise_free_setup(code, rng, scheme=Scheme.STBC_NR2):
    cfg = make_scheme_config(scheme, 2.0, 6.0)
    u_a = rng.integers(0, 2, code.k).astype(np.uint8)
    u_b = rng.integers(0, 2, code.k).astype(np.uint8)
    c_a, c_b = code.encode(u_a), code.encode(u_b)
    obs = simulate_codeword(cfg, 1.0 - 2.0 * c_a, 1.0 - 2.0 * c_b, rng)
    obs_clean = type(obs)(
        y=obs.xi_a * (1.0 - 2.0 * c_a) + obs.xi_b * (1.0 - 2.0 * c_b),
        xi_a=obs.xi_a, xi_b=obs.xi_b, alpha=obs.alpha)
    return obs_clean, c_a ^ c_b


def test_decode_noise_free(desk_code, rng):
    obs, c_x = noise_free_setup(desk_code, rng)
    g = channel_messages(obs, 1e-9, desk_code.puncture_mask_)
    res = dec.decode(desk_code, g, 100)
    assert res.converged
    assert res.iterations_used <= 5
    assert np.array_equal(res.xor_estimate, c_x)


def test_decode_simplified_noise_free(desk_code, rng):
    obs, c_x = noise_free_setup(desk_code, rng)
    llr = channel_llrs(obs, 1e-9, desk_code.puncture_mask_, simplified=False)
    res = dec.decode_simplified(desk_code, llr, 100)
    assert res.converged
    assert np.array_equal(res.xor_estimate, c_x)


def test_decode_no_information(desk_code, rng):
    # exactly uniform messages hit the trivial all-zero fixed point through
    # the ties-decide-zero rule; the estimate carries no information
    g = np.full((desk_code.n, 4), 0.25)
    res = dec.decode(desk_code, g, 10)
    assert not res.xor_estimate.any()
    # informationless symmetric noise does not converge within t_max
    llr = rng.normal(size=desk_code.n) * 1e-3
    res2 = dec.decode_simplified(desk_code, llr, 10)
    assert not res2.converged
    assert res2.iterations_used == 10


def test_decode_shape_errors(desk_code):
    with pytest.raises(ValueError):
        dec.decode(desk_code, np.full((desk_code.n - 1, 4), 0.25), 10)
    with pytest.raises(ValueError):
        dec.decode_simplified(desk_code, np.zeros(desk_code.n + 2), 10)
    with pytest.raises(ValueError):
        dec.decode(desk_code, np.full((desk_code.n, 4), 0.25), 0)


def test_decode_converged_implies_valid_syndrome(desk_code, rng):
    cfg = make_scheme_config(Scheme.STBC_NR2, 2.0, 2.0)
    hits = 0
    for _ in range(20):
        u_a = rng.integers(0, 2, desk_code.k).astype(np.uint8)
        u_b = rng.integers(0, 2, desk_code.k).astype(np.uint8)
        c_a, c_b = desk_code.encode(u_a), desk_code.encode(u_b)
        obs = simulate_codeword(cfg, 1.0 - 2.0 * c_a, 1.0 - 2.0 * c_b, rng)
        g = channel_messages(obs, cfg.sigma_n2, desk_code.puncture_mask_)
        res = dec.decode(desk_code, g, 50)
        if res.converged:
            hits += 1
            assert desk_code.syndrome_check(res.xor_estimate)
    assert hits > 0


def test_per_iteration_error_counts(desk_code, rng):
    obs, c_x = noise_free_setup(desk_code, rng)
    g = channel_messages(obs, 1e-9, desk_code.puncture_mask_)
    res = dec.decode(desk_code, g, 100, reference=c_x)
    assert res.per_iteration_error_counts is not None
    assert res.per_iteration_error_counts[-1] == 0


def reference_flooding_iteration(code, ch_msgs):
    """One flooding iteration via the reference message ops (tiny codes only)."""
    n_cn = code.num_checks
    edges = list(zip(code.edge_cn.tolist(), code.edge_vn.tolist()))
    v2c = {e: ch_msgs[vn] for e, (_, vn) in enumerate(edges)}
    c2v = {}
    for e, (cn, vn) in enumerate(edges):
        others = [v2c[e2] for e2, (cn2, _) in enumerate(edges) if cn2 == cn and e2 != e]
        c2v[e] = dec.cn_update_q(others)
    out = {}
    for e, (cn, vn) in enumerate(edges):
        others = [c2v[e2] for e2, (_, vn2) in enumerate(edges) if vn2 == vn and e2 != e]
        out[e] = dec.vn_update_q(ch_msgs[vn], others)
    return c2v, out


def test_first_iteration_projection(rng):
    # simplified first-iteration messages = primary projection of the 4-ary ones
    from jcncsim.protocode import lift, load_protograph, bundled_code_path

    code = lift(load_protograph(bundled_code_path()), 13, seed=4)
    cfg = make_scheme_config(Scheme.STBC_NR2, 2.0, 2.0)
    c0 = np.zeros(code.k, dtype=np.uint8)
    x = 1.0 - 2.0 * code.encode(c0)
    obs = simulate_codeword(cfg, x, x, rng)
    g = channel_messages(obs, cfg.sigma_n2, code.puncture_mask_)
    c2v, v2c = reference_flooding_iteration(code, list(g))

    llr = channel_llrs(obs, cfg.sigma_n2, code.puncture_mask_, simplified=False)
    edges = list(zip(code.edge_cn.tolist(), code.edge_vn.tolist()))
    for e, (cn, vn) in enumerate(edges):
        others = [llr[vn2] for e2, (cn2, vn2) in enumerate(edges) if cn2 == cn and e2 != e]
        want_c = dec.cn_update_llr(others)
        assert np.isclose(dec.primary_llr(c2v[e]), want_c, atol=1e-9)

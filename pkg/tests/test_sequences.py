import json

import numpy as np
import pytest

from echodex import (GeneratorSpec, InputSequence, WindowExhausted, d_prod,
                     d_unif, gen_context_task, gen_two_symbol,
                     gen_uniform_scaled, load_input, load_sequence, realize,
                     save_sequence, shift, splice_large_input)


def rand_seq(rng, n_i=2, first=-6, last=6):
    vals = rng.uniform(-1, 1, (last - first + 1, n_i))
    return InputSequence(anchor=first, values=vals,
                         lo=-np.ones(n_i), hi=np.ones(n_i))


def test_window_access_and_exhaustion():
    seq = rand_seq(np.random.default_rng(0), n_i=1, first=-3, last=4)
    assert seq.first == -3 and seq.last == 4 and seq.length == 8
    assert np.array_equal(seq.at(-3), seq.values[0])
    assert np.array_equal(seq.at(4), seq.values[-1])
    with pytest.raises(WindowExhausted):
        seq.at(5)
    with pytest.raises(WindowExhausted):
        seq.at(-4)
    with pytest.raises(WindowExhausted):
        seq.require_window(-4, 0)
    seq.require_window(-3, 4)
    sub = seq.slice(-1, 2)
    assert sub.first == -1 and sub.last == 2
    assert np.array_equal(sub.values, seq.values[2:6])
    with pytest.raises(WindowExhausted):
        seq.slice(-1, 5)


def test_shift_is_zero_copy_reindexing():
    seq = rand_seq(np.random.default_rng(1))
    moved = shift(seq, 4)
    assert moved.values is seq.values
    for k in range(moved.first, moved.last + 1):
        assert np.array_equal(moved.at(k), seq.at(k + 4))
    # shifts compose additively and shift 0 is the identity
    twice = shift(shift(seq, 2), 3)
    assert twice.anchor == shift(seq, 5).anchor
    assert shift(seq, 0).anchor == seq.anchor


def test_d_prod_matches_explicit_sum():
    rng = np.random.default_rng(2)
    for _ in range(20):
        u = rand_seq(rng)
        v = rand_seq(rng)
        hw = int(rng.integers(0, 7))
        want = 0.0
        for k in range(-hw, hw + 1):
            want += np.linalg.norm(u.at(k) - v.at(k)) * 0.5 ** abs(k)
        assert abs(d_prod(u, v, hw) - want) <= 1e-12
    u = rand_seq(rng)
    assert d_prod(u, u, 6) == 0.0
    with pytest.raises(ValueError):
        d_prod(u, rand_seq(rng, n_i=1), 3)
    with pytest.raises(ValueError):
        d_prod(u, rand_seq(rng), -1)
    with pytest.raises(WindowExhausted):
        d_prod(u, rand_seq(rng), 7)


def test_d_prod_far_tail_halves_per_unit():
    """Differences confined to |k| > m contribute like 2^-m."""
    rng = np.random.default_rng(3)
    base = rand_seq(rng, n_i=1, first=-30, last=30)
    far = np.array([5.0])
    dists = [d_prod(base, splice_large_input(base, m, far), 25)
             for m in (5, 10, 20)]
    r1 = (dists[0] / dists[1]) ** (1 / 5)
    r2 = (dists[1] / dists[2]) ** (1 / 10)
    assert 1.8 <= r1 <= 2.2 and 1.8 <= r2 <= 2.2


def test_d_unif_metric_axioms():
    rng = np.random.default_rng(4)
    for _ in range(100):
        u, v, w = (rand_seq(rng) for _ in range(3))
        duv, dvw, duw = d_unif(u, v), d_unif(v, w), d_unif(u, w)
        assert duv >= 0.0
        assert duv == d_unif(v, u)
        assert duw <= duv + dvw + 1e-15
        assert d_unif(u, u) == 0.0
    u = rand_seq(rng)
    v = InputSequence(anchor=u.anchor, values=u.values.copy(), lo=u.lo, hi=u.hi)
    assert d_unif(u, v) == 0.0
    with pytest.raises(ValueError):
        d_unif(u, rand_seq(rng, first=-5, last=7))


def test_two_symbol_degenerate_probabilities():
    u1, u2 = np.array([0.25, 0.15]), np.array([-0.25, -0.15])
    always = gen_two_symbol(u1, u2, 1.0, 0, 50, seed=0)
    never = gen_two_symbol(u1, u2, 0.0, 0, 50, seed=0)
    assert np.all(always.values == u1)
    assert np.all(never.values == u2)


def test_two_symbol_balanced_frequency():
    # law-of-large-numbers band for the committed stream
    u1, u2 = np.array([1.0]), np.array([-1.0])
    seq = gen_two_symbol(u1, u2, 0.5, 1, 10000, seed=0)
    freq = float(np.mean(seq.values[:, 0] > 0))
    assert 0.48 <= freq <= 0.52
    rows = seq.values[:, 0]
    assert set(np.unique(rows)) == {-1.0, 1.0}


def test_two_symbol_determinism_and_seed_sensitivity():
    u1, u2 = np.array([0.3]), np.array([-0.3])
    a = gen_two_symbol(u1, u2, 0.5, -10, 200, seed=5)
    b = gen_two_symbol(u1, u2, 0.5, -10, 200, seed=5)
    c = gen_two_symbol(u1, u2, 0.5, -10, 200, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    with pytest.raises(ValueError):
        gen_two_symbol(u1, u2, 1.5, 0, 10, seed=0)


def test_uniform_scaled_bounds_and_mean():
    assert np.all(gen_uniform_scaled(0.0, 0, 99, seed=1).values == 0.0)
    w = 0.05
    seq = gen_uniform_scaled(w, 1, 100000, seed=1)
    assert np.all(np.abs(seq.values) <= w)
    # mean of Uniform(-w, w) has sd w/sqrt(3 n)
    sigma = w / np.sqrt(3.0 * seq.length)
    assert abs(float(seq.values.mean())) <= 3.0 * sigma
    with pytest.raises(ValueError):
        gen_uniform_scaled(-0.1, 0, 10, seed=0)


def test_context_task_channels_and_targets():
    task = gen_context_task(0, 3000, 0.01, seed=0)
    smooth = task.drive.values
    assert smooth.shape == (3001, 2)
    # each channel is normalized to peak exactly at one
    assert np.isclose(smooth[:, 0].max(), 1.0) and np.isclose(smooth[:, 1].max(), 1.0)
    assert np.all(smooth > 0.0)
    z1, z2 = task.targets[:, 0], task.targets[:, 1]
    assert set(np.unique(z1)) <= {-1.0, 1.0}
    # z2 selects channel 1 in the "on" context and channel 2 otherwise
    on = z1 > 0
    assert np.array_equal(z2[on], smooth[on, 0])
    assert np.array_equal(z2[~on], smooth[~on, 1])
    # context starts "off" and flips exactly at pulse arrivals
    state = -1.0
    for t in range(3001):
        if task.pulses[t, 0] == 1.0:
            state = 1.0
        elif task.pulses[t, 1] == 1.0:
            state = -1.0
        assert z1[t] == state
    full = task.full_input()
    off = task.pulses_off_input()
    assert full.n_i == 4 and off.n_i == 4
    assert np.array_equal(full.values[:, :2], smooth)
    assert np.array_equal(full.values[:, 2:], task.pulses)
    assert np.all(off.values[:, 2:] == 0.0)
    assert np.array_equal(off.values[:, :2], smooth)


def test_context_task_pulse_rate():
    task = gen_context_task(0, 20000, 0.01, seed=3)
    rate = task.pulses.mean()
    # Bernoulli(0.01) per channel, 3 sigma band
    assert abs(rate - 0.01) <= 3 * np.sqrt(0.01 * 0.99 / task.pulses.size)


def test_splice_identity_beyond_window():
    rng = np.random.default_rng(8)
    base = rand_seq(rng, n_i=1, first=-12, last=9)
    spliced = splice_large_input(base, 12, np.array([9.0]))
    assert np.array_equal(spliced.values, base.values)


def test_splice_replaces_only_far_samples():
    rng = np.random.default_rng(9)
    base = rand_seq(rng, n_i=1, first=-20, last=20)
    far = np.array([3.5])
    out = splice_large_input(base, 4, far)
    for k in range(-20, 21):
        if abs(k) <= 4:
            assert np.array_equal(out.at(k), base.at(k))
        else:
            assert np.array_equal(out.at(k), far)


class _Nothing:
    def contains(self, u):
        return False


class _Everything:
    def contains(self, u):
        return True


def test_splice_admissibility_is_enforced():
    rng = np.random.default_rng(10)
    base = rand_seq(rng, n_i=1)
    with pytest.raises(ValueError):
        splice_large_input(base, 2, np.array([2.0]), admissible=_Nothing())
    splice_large_input(base, 2, np.array([2.0]), admissible=_Everything())
    with pytest.raises(ValueError):
        splice_large_input(base, 2, np.array([2.0, 1.0]))


def test_sequence_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(11)
    seq = rand_seq(rng, n_i=3, first=-7, last=12)
    path = tmp_path / "input.csv"
    save_sequence(seq, path)
    back = load_sequence(path)
    assert back.anchor == seq.anchor
    assert np.array_equal(back.values, seq.values)
    header = path.read_text().splitlines()[0]
    assert header == "k,u_1,u_2,u_3"
    bad = tmp_path / "missing_header.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_sequence(bad)
    gap = tmp_path / "gap.csv"
    gap.write_text("k,u_1\n0,0.5\n2,0.5\n")
    with pytest.raises(ValueError):
        load_sequence(gap)


def test_realize_reproduces_from_provenance(tmp_path):
    seq = gen_two_symbol(np.array([0.25, 0.15]), np.array([-0.25, -0.15]),
                         0.5, -50, 150, seed=4)
    again = realize(seq.provenance)
    assert np.array_equal(again.values, seq.values)
    assert again.anchor == seq.anchor
    spec_path = tmp_path / "gen.json"
    spec_path.write_text(json.dumps(seq.provenance.to_dict()))
    loaded = load_input(spec_path)
    assert np.array_equal(loaded.values, seq.values)
    with pytest.raises(ValueError):
        realize(GeneratorSpec("mystery", {}, 0))


def test_generator_spec_roundtrip():
    spec = GeneratorSpec("uniform_scaled", {"w": 0.01, "first": 0, "last": 5}, 7)
    back = GeneratorSpec.from_dict(spec.to_dict())
    assert back == spec
    assert np.array_equal(realize(back).values, realize(spec).values)

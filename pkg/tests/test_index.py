import numpy as np
import pytest

from echodex import (ConfigurationError, EnsembleRun, IndexProtocol,
                     KloedenSystem, Region, RnnParams, WindowExhausted,
                     cluster_asymptotics, ensemble_to_csv, estimate_echo_index,
                     gen_uniform_scaled, hausdorff_semidistance, orbit,
                     pair_divergence_step, pullback_fibre, run_ensemble,
                     separatrix_bisect)
from echodex.sequences import InputSequence


def const_seq(value, first, last, n_i=1):
    vals = np.tile(np.atleast_1d(np.asarray(value, dtype=float)),
                   (last - first + 1, 1))
    return InputSequence(anchor=first, values=vals)


def scalar_expander(w=0.0):
    return RnnParams(alpha=1.0, w_r=[[1.01]], w_in=[[w]])


class RotationSystem:
    """Isometry of the plane; ensembles never cluster under it."""

    state_dim = 2
    state_bound = 1.0

    def __init__(self, angle=0.73):
        c, s = np.cos(angle), np.sin(angle)
        self.rot = np.array([[c, -s], [s, c]])

    def step_one(self, u, x):
        return self.rot @ x

    def step_batch(self, u, xs):
        return xs @ self.rot.T


def test_run_ensemble_is_deterministic_and_thread_invariant(monkeypatch):
    params = scalar_expander(0.01)
    seq = gen_uniform_scaled(0.01, -5, 400, seed=3)
    monkeypatch.setenv("ECHODEX_THREADS", "1")
    serial = run_ensemble(params, seq, 12, transient=100, horizon=40, ic_seed=2)
    monkeypatch.setenv("ECHODEX_THREADS", "4")
    threaded = run_ensemble(params, seq, 12, transient=100, horizon=40, ic_seed=2)
    assert np.array_equal(serial.trajectories, threaded.trajectories)
    assert np.array_equal(serial.initial_conditions, threaded.initial_conditions)
    again = run_ensemble(params, seq, 12, transient=100, horizon=40, ic_seed=2)
    assert np.array_equal(serial.trajectories, again.trajectories)


def test_run_ensemble_duplicate_ics_identical():
    params = RnnParams(alpha=0.5, w_r=0.4 * np.eye(2),
                       w_in=np.array([[1.0], [0.5]]))
    seq = gen_uniform_scaled(0.3, -2, 120, seed=0)
    ics = np.array([[0.3, -0.4], [0.1, 0.2], [0.3, -0.4]])
    run = run_ensemble(params, seq, ics, transient=20, horizon=30)
    assert np.array_equal(run.trajectories[0], run.trajectories[2])
    assert run.count == 3
    assert run.tail_anchor == 20
    traj = run.trajectory(1)
    assert traj.anchor == 20 and traj.n_steps == 30


def test_scalar_fast_path_matches_solo_orbits():
    params = scalar_expander(0.01)
    seq = gen_uniform_scaled(0.01, -5, 300, seed=9)
    run = run_ensemble(params, seq, 7, transient=50, horizon=60, ic_seed=4)
    for i in range(run.count):
        ref = orbit(params, seq, run.initial_conditions[i], 110).states
        assert np.array_equal(run.trajectories[i], ref[50:])


def test_ensemble_csv_format(tmp_path):
    params = scalar_expander(0.0)
    seq = const_seq(0.0, -1, 40)
    run = run_ensemble(params, seq, 3, transient=10, horizon=5, ic_seed=0)
    path = tmp_path / "ens.csv"
    ensemble_to_csv(run, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "ic_id,k,x_1"
    assert len(lines) == 1 + 3 * 6
    first = lines[1].split(",")
    assert first[0] == "0" and int(first[1]) == 10


def synthetic_run(tails):
    tails = np.asarray(tails, dtype=float)
    m, t, d = tails.shape
    return EnsembleRun(system=None, input_seq=None,
                       initial_conditions=np.zeros((m, d)), transient=0,
                       horizon=t - 1, anchor=0, ic_seed=0, trajectories=tails)


def test_clustering_separates_two_constant_tails():
    t = 30
    a = np.zeros((t, 1))
    b = np.ones((t, 1))
    run = synthetic_run([a, a + 1e-5, b, b - 1e-5, b + 1e-5])
    rep = cluster_asymptotics(run, cluster_tol=1e-3)
    assert rep.index == 2
    assert rep.is_definite and rep.verdict() == "2"
    sizes = sorted(c.member_count for c in rep.clusters)
    assert sizes == [2, 3]
    assert abs(rep.min_separation - (1.0 - 2e-5)) <= 1e-9
    assert rep.max_diameter <= 2e-5 + 1e-15
    assert rep.diagnostics["coverage"] == 1.0
    assert not rep.diagnostics["switching_tails"]
    doc = rep.summary_dict()
    assert doc["index"] == "2" and sorted(doc["cluster_sizes"]) == [2, 3]


def test_clustering_three_clusters():
    t = 24
    tails = [np.full((t, 2), v) for v in (-1.0, 0.0, 1.0)]
    rep = cluster_asymptotics(synthetic_run(tails), cluster_tol=1e-3)
    assert rep.index == 3


def test_ambiguity_band_degrades_to_indefinite():
    t = 30
    a = np.zeros((t, 1))
    # separation of 2 tol falls inside the [tol/4, 4 tol] band
    rep = cluster_asymptotics(synthetic_run([a, a + 2e-3]), cluster_tol=1e-3)
    assert rep.index is None
    assert rep.verdict() == "indefinite"
    assert rep.diagnostics["ambiguous_pairs"] == 1


def test_mid_window_merge_degrades_to_indefinite():
    t = 30
    a = np.zeros((t, 1))
    b = np.zeros((t, 1))
    b[:t // 2] = 1.0  # two clusters in the first half, one in the second
    rep = cluster_asymptotics(synthetic_run([a, b]), cluster_tol=1e-3)
    assert rep.index is None
    counts = rep.diagnostics["subwindow_counts"]
    assert len(set(counts)) > 1


def test_wandering_tail_sets_switching_flag():
    t = 40
    a = np.zeros((t, 1))
    b = np.linspace(2.0, 2.5, t)[:, None]  # drifts half a unit
    rep = cluster_asymptotics(synthetic_run([a, b]), cluster_tol=1e-3)
    assert rep.diagnostics["switching_tails"]


def test_clustering_window_validation():
    run = synthetic_run([np.zeros((30, 1))])
    with pytest.raises(ConfigurationError):
        cluster_asymptotics(run, window=5)
    with pytest.raises(ConfigurationError):
        cluster_asymptotics(run, window=31)
    solo = cluster_asymptotics(run, window=30)
    assert solo.index == 1
    assert solo.min_separation == float("inf")


def test_estimate_echo_index_switching(switching_system, switching_input):
    proto = IndexProtocol(ic_counts=(16, 24), transients=(150, 300),
                          horizon=120, window=100)
    rep = estimate_echo_index(switching_system, switching_input, protocol=proto)
    assert rep.index == 2
    assert rep.diagnostics["stabilized"]
    assert rep.diagnostics["shift_check"] == "agree"
    assert [r[2] for r in rep.diagnostics["rungs"]] == ["2", "2"]


def test_estimate_echo_index_contracting_reservoir():
    rng = np.random.default_rng(5)
    w = rng.uniform(-1, 1, (4, 4))
    w = 0.8 * w / np.linalg.norm(w, 2)
    params = RnnParams(alpha=1.0, w_r=w, w_in=rng.uniform(-1, 1, (4, 1)))
    seq = gen_uniform_scaled(0.5, -20, 900, seed=2)
    rep = estimate_echo_index(params, seq)
    assert rep.index == 1


def test_estimate_never_stabilizes_on_an_isometry():
    system = RotationSystem()
    seq = const_seq(0.0, -20, 2000)
    rep = estimate_echo_index(system, seq)
    assert rep.index is None
    assert not rep.diagnostics["stabilized"]


def test_protocol_validation():
    with pytest.raises(ConfigurationError):
        IndexProtocol(ic_counts=(16,), transients=(100,))
    with pytest.raises(ConfigurationError):
        IndexProtocol(ic_counts=(16, 24), transients=(100,))


def test_kloeden_past_fibre_shrinks_monotonically():
    system = KloedenSystem(a=1.5)
    seq = system.arrival_sequence(-80, 0)
    # fibre at time -1 sees only the contracting past drive
    past = pullback_fibre(system, seq, n=-1, depth=60)
    assert past.final_diameter < 1e-8
    assert np.all(np.diff(past.diameters) <= 0.0)
    # criterion depth at time 0 (one expanding arrival at k = 0)
    fib = pullback_fibre(system, seq, n=0, depth=35)
    assert fib.diameters[0] == 2.0
    assert fib.final_diameter < 1e-6
    assert fib.points.shape[1] == 1


def test_fibre_cloud_path_for_higher_dimensions():
    rng = np.random.default_rng(8)
    w = rng.uniform(-1, 1, (3, 3))
    w = 0.6 * w / np.linalg.norm(w, 2)
    params = RnnParams(alpha=1.0, w_r=w, w_in=rng.uniform(-1, 1, (3, 1)))
    seq = gen_uniform_scaled(0.2, -60, 10, seed=1)
    fib = pullback_fibre(params, seq, n=0, depth=40)
    assert fib.points.shape == (1000, 3)
    assert fib.final_diameter < 1e-6
    again = pullback_fibre(params, seq, n=0, depth=40)
    assert np.array_equal(fib.points, again.points)
    other = pullback_fibre(params, seq, n=0, depth=40, cloud_seed=1)
    assert not np.array_equal(fib.points, other.points)


def test_fibre_respects_region_and_window(switching_system, switching_input):
    r_plus = Region(lo=np.array([-1.0, 0.55]), hi=np.array([1.0, 1.0]))
    fib = pullback_fibre(switching_system, switching_input, n=0, depth=80,
                         region=r_plus)
    assert fib.final_diameter < 1e-4
    assert fib.diameters.shape == (81,)
    deep = pullback_fibre(switching_system, switching_input, n=0, depth=200,
                          region=r_plus)
    assert deep.final_diameter < 1e-10
    with pytest.raises(WindowExhausted):
        pullback_fibre(switching_system, switching_input, n=0, depth=400)
    with pytest.raises(ConfigurationError):
        pullback_fibre(switching_system, switching_input, n=0, depth=-1)
    with pytest.raises(ConfigurationError):
        pullback_fibre(switching_system, switching_input, n=0, depth=10,
                       region=Region(lo=[0.0], hi=[1.0]))
    solo = pullback_fibre(switching_system, switching_input, n=0, depth=0,
                          region=r_plus)
    assert solo.diameters.shape == (1,)


def bistable_scalar():
    # autonomous tanh(2x): stable points near +-0.9575, unstable at 0
    return RnnParams(alpha=1.0, w_r=[[2.0]], w_in=[[0.0]])


def test_separatrix_odd_symmetry_boundary_at_zero():
    # by odd symmetry the basin boundary is 0; the bracket is kept
    # asymmetric so no midpoint lands exactly on the fixed point
    params = bistable_scalar()
    seq = const_seq(0.0, -1, 300)
    res = separatrix_bisect(params, seq, np.array([-0.37]), np.array([0.52]),
                            horizon=250)
    assert res.width <= 1e-12
    assert abs(res.boundary[0]) <= 1e-12
    assert res.warning is None
    assert res.straddle_pair is not None
    a, b = res.straddle_pair
    assert np.linalg.norm(b - a) <= 1e-11
    near = res.trace[res.trace[:, 0] <= 1e-2]
    assert near.shape[0] > 10
    assert np.all(np.diff(near[:, 1]) >= 0.0)


def test_separatrix_same_basin_is_rejected():
    params = bistable_scalar()
    seq = const_seq(0.0, -1, 300)
    with pytest.raises(ConfigurationError):
        separatrix_bisect(params, seq, np.array([0.2]), np.array([0.5]),
                          horizon=250)


def test_pair_divergence_step():
    params = bistable_scalar()
    seq = const_seq(0.0, -1, 300)
    res = separatrix_bisect(params, seq, np.array([-0.37]), np.array([0.52]),
                            horizon=250)
    a, b = res.straddle_pair
    t = pair_divergence_step(params, seq, a, b, threshold=0.1, horizon=250)
    # a 1e-11 gap doubling per step crosses 0.1 after about 33 steps
    assert t is not None and 20 <= t <= 60
    assert pair_divergence_step(params, seq, a, a, threshold=0.1,
                                horizon=50) is None


def brute_hausdorff(a, b):
    worst = 0.0
    for p in a:
        best = min(float(np.linalg.norm(p - q)) for q in b)
        worst = max(worst, best)
    return worst


def test_hausdorff_semidistance_exact():
    assert hausdorff_semidistance([[0.0]], [[0.0], [1.0]]) == 0.0
    assert hausdorff_semidistance([[0.0], [1.0]], [[0.0]]) == 1.0
    rng = np.random.default_rng(12)
    for _ in range(25):
        a = rng.uniform(-3, 3, (int(rng.integers(1, 9)), 2))
        b = rng.uniform(-3, 3, (int(rng.integers(1, 9)), 2))
        assert hausdorff_semidistance(a, b) == brute_hausdorff(a, b)
    with pytest.raises(ValueError):
        hausdorff_semidistance(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        hausdorff_semidistance(np.zeros((2, 2)), np.zeros((3, 1)))

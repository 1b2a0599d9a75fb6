"""Echo index estimation: ensembles, clustering, fibres, separatrix.

The echo index of an input sequence is the number of simultaneously
stable responses the driven network supports.  It is estimated here by
evolving an ensemble of initial conditions under one fixed input
realization, discarding a transient, and single-linkage clustering the
retained tails in the max-over-window state metric.  The verdict is
"indefinite" (index None) whenever the evidence is ambiguous: unstable
cluster counts across subwindows, pairwise distances inside the
ambiguity band around the clustering tolerance, or failure to
stabilize under protocol escalation.

Systems are either RnnParams or any object exposing `state_dim`,
`state_bound`, `step_one(u, x)` and `step_batch(u, xs)` (the map applied
rowwise); `step_batch` must act elementwise per row so batched and solo
evolutions agree bit-exactly, which holds for the scalar systems that
use this hook.
"""

from dataclasses import dataclass, field, replace
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist

from .core import ConfigurationError, RnnParams, Trajectory, orbit, step_batch
from .contraction import Region
from .rng import DOMAIN_FIBRE, DOMAIN_IC, substream


def thread_cap():
    """Worker cap from ECHODEX_THREADS (default 1, i.e. serial)."""
    try:
        return max(1, int(os.environ.get("ECHODEX_THREADS", "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------
# ensemble evolution
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleRun:
    """Ensemble of trajectories under one shared input realization.

    trajectories[i, j] is the state of IC i at time
    anchor + transient + j, for j = 0..horizon.
    """

    system: object
    input_seq: object
    initial_conditions: np.ndarray = field(repr=False)
    transient: int
    horizon: int
    anchor: int
    ic_seed: int
    trajectories: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.initial_conditions.shape[0]

    @property
    def tail_anchor(self):
        return self.anchor + self.transient

    def trajectory(self, i):
        return Trajectory(anchor=self.tail_anchor, states=self.trajectories[i])


def _is_scalar_rnn(system):
    return (isinstance(system, RnnParams) and system.n_r == 1
            and system.n_i == 1 and system.readout == "none")


def _solo_states(system, seq, x0, anchor, n):
    """States (n+1, d) of one trajectory; the bit-exact reference path."""
    if isinstance(system, RnnParams):
        return orbit(system, seq, x0, n, anchor=anchor).states
    x = np.asarray(x0, dtype=float)
    states = np.empty((n + 1, x.shape[0]))
    states[0] = x
    for j in range(1, n + 1):
        x = system.step_one(seq.at(anchor + j), x)
        states[j] = x
    return states


def _system_step_batch(system, u, xs):
    if isinstance(system, RnnParams):
        return step_batch(system, u, xs)
    return system.step_batch(u, xs)


def _evolve_scalar_rnn(params, seq, ics, anchor, transient, horizon):
    """Elementwise batch for 1-neuron, 1-input, feedback-free networks.

    Every operation is elementwise over ICs, so each row is bit-identical
    to the solo orbit path (asserted by tests); this makes long scalar
    sweeps cheap without weakening the reproducibility contracts.
    """
    total = transient + horizon
    w = params.w_r[0, 0]
    om = 1.0 - params.alpha
    ks = np.arange(anchor + 1, anchor + total + 1)
    drive = params.w_in[0, 0] * seq.values[ks - seq.anchor, 0]
    x = ics[:, 0].copy()
    tails = np.empty((ics.shape[0], horizon + 1, 1))
    for j in range(1, total + 1):
        x = om * x + params.alpha * np.tanh(w * x + drive[j - 1])
        if j >= transient:
            tails[:, j - transient, 0] = x
    if transient == 0:
        tails[:, 0, 0] = ics[:, 0]
    return tails


def run_ensemble(system, input_seq, ics, transient, horizon, anchor=0, ic_seed=0):
    """Evolve an ensemble and retain the tail window of every member.

    Parameters
    ----------
    ics : int or array
        Either a count (ICs drawn uniformly from [-L, L]^d, one PRNG
        substream per IC) or an explicit (m, d) array.
    transient, horizon : int
        Steps discarded / retained.  The input window must cover
        [anchor + 1, anchor + transient + horizon].
    """
    d = system.state_dim
    if np.isscalar(ics):
        count = int(ics)
        if count < 1:
            raise ConfigurationError("need at least one initial condition")
        bound = system.state_bound
        ics_arr = np.stack([substream(ic_seed, DOMAIN_IC, i).uniform(-bound, bound, d)
                            for i in range(count)])
    else:
        ics_arr = np.array(ics, dtype=float)
        if ics_arr.ndim == 1:
            ics_arr = ics_arr[:, None]
        if ics_arr.ndim != 2 or ics_arr.shape[1] != d:
            raise ConfigurationError(f"explicit ICs must be (m, {d}), got {ics_arr.shape}")
    if transient < 0 or horizon < 1:
        raise ConfigurationError("need transient >= 0 and horizon >= 1")
    input_seq.require_window(anchor + 1, anchor + transient + horizon)

    if _is_scalar_rnn(system):
        tails = _evolve_scalar_rnn(system, input_seq, ics_arr, anchor, transient, horizon)
    else:
        m = ics_arr.shape[0]
        tails = np.empty((m, horizon + 1, d))

        def one(i):
            states = _solo_states(system, input_seq, ics_arr[i], anchor,
                                  transient + horizon)
            tails[i] = states[transient:]

        workers = thread_cap()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(one, range(m)))
        else:
            for i in range(m):
                one(i)
    return EnsembleRun(system=system, input_seq=input_seq,
                       initial_conditions=ics_arr, transient=int(transient),
                       horizon=int(horizon), anchor=int(anchor),
                       ic_seed=int(ic_seed) if np.isscalar(ics) else -1,
                       trajectories=tails)


def ensemble_to_csv(run, path):
    """Plot-ready CSV: one row per IC per retained step."""
    d = run.trajectories.shape[2]
    cols = ",".join(f"x_{j + 1}" for j in range(d))
    lines = [f"ic_id,k,{cols}"]
    for i in range(run.count):
        for j in range(run.horizon + 1):
            row = ",".join(f"{v:.17g}" for v in run.trajectories[i, j])
            lines.append(f"{i},{run.tail_anchor + j},{row}")
    Path(path).write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# clustering
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    member_count: int
    representative_ic: int
    final_state: np.ndarray
    tail: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class EchoIndexReport:
    """Clustering verdict; index None means "indefinite".

    For a definite index, min_separation > cluster_tol > max_diameter
    holds and the cluster count is identical across the last three
    equal subwindows (both enforced before declaring definiteness).
    min_separation is the smallest over-time gap between members of
    different clusters (inf over the window); max_diameter is the
    largest intra-cluster distance at the final retained step.
    """

    index: object
    clusters: list
    min_separation: float
    max_diameter: float
    cluster_tol: float
    diagnostics: dict

    @property
    def is_definite(self):
        return self.index is not None

    def verdict(self):
        return str(self.index) if self.is_definite else "indefinite"

    def summary_dict(self):
        return {
            "index": self.verdict(),
            "cluster_sizes": [c.member_count for c in self.clusters],
            "min_separation": self.min_separation,
            "max_diameter": self.max_diameter,
            "cluster_tol": self.cluster_tol,
            "diagnostics": {k: v for k, v in self.diagnostics.items()},
        }


def _component_labels(adj):
    n_comp, labels = connected_components(csr_matrix(adj), directed=False)
    return n_comp, labels


def cluster_asymptotics(run, cluster_tol=1e-3, window=None):
    """Cluster ensemble tails and derive the index verdict.

    Single linkage at `cluster_tol` in the max-over-window metric.  The
    verdict degrades to indefinite when the cluster count changes across
    the last three equal subwindows, when any pairwise distance falls in
    the ambiguity band [tol/4, 4 tol], or when the separation/diameter
    margins fail.
    """
    tails_full = run.trajectories
    max_window = tails_full.shape[1]
    if window is None:
        window = max_window
    if window < 10:
        raise ConfigurationError(f"window must be >= 10 steps, got {window}")
    if window > max_window:
        raise ConfigurationError(f"window {window} exceeds retained steps {max_window}")
    tails = tails_full[:, max_window - window:, :]
    m = tails.shape[0]
    third = window // 3

    d_max = np.zeros((m, m))
    d_min = np.zeros((m, m))
    d_parts = np.zeros((3, m, m))
    for i in range(m - 1):
        diff = tails[i + 1:] - tails[i][None, :, :]
        norms = np.sqrt(np.sum(diff * diff, axis=2))
        d_max[i, i + 1:] = norms.max(axis=1)
        d_min[i, i + 1:] = norms.min(axis=1)
        for p in range(3):
            hi = window - (2 - p) * third
            seg = norms[:, hi - third:hi]
            d_parts[p, i, i + 1:] = seg.max(axis=1)
    d_max = d_max + d_max.T
    d_min = d_min + d_min.T
    d_parts = d_parts + np.transpose(d_parts, (0, 2, 1))

    n_clusters, labels = _component_labels(d_max <= cluster_tol)
    part_counts = tuple(_component_labels(d_parts[p] <= cluster_tol)[0]
                        for p in range(3))

    off_diag = ~np.eye(m, dtype=bool)
    band = (d_max >= cluster_tol / 4) & (d_max <= 4 * cluster_tol) & off_diag
    ambiguous_pairs = int(np.count_nonzero(band) // 2)

    finals = tails[:, -1, :]
    fdiff = finals[:, None, :] - finals[None, :, :]
    d_final = np.sqrt(np.sum(fdiff * fdiff, axis=2))

    clusters = []
    for lbl in range(n_clusters):
        members = np.flatnonzero(labels == lbl)
        sub = d_max[np.ix_(members, members)]
        medoid = members[int(np.argmin(sub.max(axis=1)))]
        clusters.append(Cluster(member_count=int(members.size),
                                representative_ic=int(medoid),
                                final_state=finals[medoid].copy(),
                                tail=tails[medoid].copy()))

    cross = labels[:, None] != labels[None, :]
    min_separation = float(d_min[cross].min()) if cross.any() else float("inf")
    same = (labels[:, None] == labels[None, :]) & off_diag
    max_diameter = float(d_final[same].max()) if same.any() else 0.0

    coverage = float(np.mean([d_final[i, clusters[labels[i]].representative_ic]
                              <= cluster_tol for i in range(m)]))
    tail_stds = [float(np.std(c.tail, axis=0).max()) for c in clusters]
    diagnostics = {
        "subwindow_counts": part_counts,
        "ambiguous_pairs": ambiguous_pairs,
        "coverage": coverage,
        "tail_std": tail_stds,
        "switching_tails": bool(any(s > 10 * cluster_tol for s in tail_stds)),
        "window": int(window),
    }

    definite = (part_counts[0] == part_counts[1] == part_counts[2] == n_clusters
                and ambiguous_pairs == 0
                and min_separation > cluster_tol
                and max_diameter < cluster_tol)
    return EchoIndexReport(index=int(n_clusters) if definite else None,
                           clusters=clusters,
                           min_separation=min_separation,
                           max_diameter=max_diameter,
                           cluster_tol=float(cluster_tol),
                           diagnostics=diagnostics)


# ----------------------------------------------------------------------
# estimation protocol
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class IndexProtocol:
    """Escalation ladder for estimate_echo_index.

    Rung r runs ic_counts[r] initial conditions after transients[r]
    discarded steps; the estimate is accepted once two consecutive rungs
    give the same definite index, then spot-checked at a shifted anchor.
    """

    ic_counts: tuple = (16, 24, 32)
    transients: tuple = (150, 300, 600)
    horizon: int = 120
    window: int = 100
    cluster_tol: float = 1e-3
    ic_seed: int = 0
    shift_check: int = 13

    def __post_init__(self):
        if len(self.ic_counts) != len(self.transients) or len(self.ic_counts) < 2:
            raise ConfigurationError(
                "protocol needs matching ic_counts/transients with >= 2 rungs")


def _single_estimate(system, input_seq, protocol, anchor, count, transient):
    run = run_ensemble(system, input_seq, count, transient, protocol.horizon,
                       anchor=anchor, ic_seed=protocol.ic_seed)
    return cluster_asymptotics(run, cluster_tol=protocol.cluster_tol,
                               window=protocol.window)


def estimate_echo_index(system, input_seq, protocol=None, anchor=0):
    """Escalating ensemble estimate of the echo index at one anchor.

    Escalates through the protocol's rungs until two consecutive rungs
    agree on a definite index, then requires the same index at a second
    anchor (shift invariance); any disagreement or exhaustion of the
    ladder yields "indefinite".
    """
    protocol = protocol or IndexProtocol()
    reports = []
    rung_trace = []
    stable_at = None
    for count, transient in zip(protocol.ic_counts, protocol.transients):
        rep = _single_estimate(system, input_seq, protocol, anchor, count, transient)
        reports.append(rep)
        rung_trace.append((int(count), int(transient), rep.verdict()))
        if (len(reports) >= 2 and rep.is_definite
                and reports[-2].index == rep.index):
            stable_at = len(reports) - 1
            break
    final = reports[-1]
    diagnostics = dict(final.diagnostics)
    diagnostics["rungs"] = rung_trace
    if stable_at is None:
        diagnostics["stabilized"] = False
        return replace(final, index=None, diagnostics=diagnostics)
    diagnostics["stabilized"] = True
    shifted = _single_estimate(system, input_seq, protocol,
                               anchor + protocol.shift_check,
                               protocol.ic_counts[stable_at],
                               protocol.transients[stable_at])
    if shifted.index != final.index:
        diagnostics["shift_check"] = (
            f"disagreement at anchor {anchor + protocol.shift_check}: "
            f"{shifted.verdict()} vs {final.verdict()}")
        return replace(final, index=None, diagnostics=diagnostics)
    diagnostics["shift_check"] = "agree"
    return replace(final, diagnostics=diagnostics)


# ----------------------------------------------------------------------
# pullback fibres
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PullbackFibre:
    """Image of the state box pushed from time n - depth up to time n."""

    time: int
    depth: int
    points: np.ndarray = field(repr=False)
    diameters: np.ndarray

    @property
    def final_diameter(self):
        return float(self.diameters[-1])


def pullback_fibre(system, input_seq, n, depth, boundary_grid=None, region=None,
                   cloud_seed=0):
    """Approximate the natural-association fibre at time n.

    Seeds a deterministic grid over the state box (33 per axis for
    dimension <= 2) or a fixed-seed 1000-point cloud (higher dimension),
    evolves it from time n - depth to n, and records the exact pairwise
    diameter at every step.  In certified contraction regions the trace
    shrinks at least like mu^depth.
    """
    if depth < 0:
        raise ConfigurationError("depth must be nonnegative")
    d = system.state_dim
    bound = system.state_bound
    box = region if region is not None else Region(lo=-bound * np.ones(d),
                                                   hi=bound * np.ones(d))
    if box.dim != d:
        raise ConfigurationError("region dimension does not match the state")
    if d <= 2:
        points, _ = box.grid(boundary_grid or 33)
    else:
        count = boundary_grid or 1000
        rng = substream(cloud_seed, DOMAIN_FIBRE, 0)
        points = rng.uniform(box.lo, box.hi, size=(int(count), d))
    input_seq.require_window(n - depth + 1, n)
    diameters = np.empty(depth + 1)
    xs = points
    diameters[0] = pdist(xs).max() if xs.shape[0] > 1 else 0.0
    for j, k in enumerate(range(n - depth + 1, n + 1), start=1):
        xs = _system_step_batch(system, input_seq.at(k), xs)
        diameters[j] = pdist(xs).max() if xs.shape[0] > 1 else 0.0
    return PullbackFibre(time=int(n), depth=int(depth), points=xs,
                         diameters=diameters)


# ----------------------------------------------------------------------
# separatrix bisection
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SeparatrixResult:
    """Bisection outcome: boundary point, bracket, and escape-time trace.

    trace[i] = (bracket width after iteration i, smallest commit step
    among the measured endpoints of that bracket).  straddle_pair holds
    the first bracket whose width dropped to <= 1e-11, for
    divergence-time studies.
    """

    boundary: np.ndarray
    bracket_lo: np.ndarray
    bracket_hi: np.ndarray
    trace: np.ndarray
    straddle_pair: tuple
    warning: str = None

    @property
    def width(self):
        return float(np.linalg.norm(self.bracket_hi - self.bracket_lo))


def _commit_step(states, rep_a, rep_b, cluster_tol):
    """First step where a trajectory is within tol of one representative
    and at least 10 tol from the other; None if it never commits."""
    da = np.linalg.norm(states - rep_a, axis=1)
    db = np.linalg.norm(states - rep_b, axis=1)
    to_a = (da <= cluster_tol) & (db >= 10 * cluster_tol)
    to_b = (db <= cluster_tol) & (da >= 10 * cluster_tol)
    hit_a = int(np.argmax(to_a)) if to_a.any() else None
    hit_b = int(np.argmax(to_b)) if to_b.any() else None
    if hit_a is not None and (hit_b is None or hit_a <= hit_b):
        return "a", hit_a
    if hit_b is not None:
        return "b", hit_b
    return None, None


def separatrix_bisect(system, input_seq, lo, hi, horizon=600, max_iters=80,
                      cluster_tol=1e-3, anchor=0, target_width=1e-12):
    """Bisect the segment [lo, hi] for the basin boundary.

    lo and hi must converge to different basins under the given input
    (checked first); their orbits serve as the cluster representatives
    for labeling midpoints.  Each midpoint is evolved until it commits
    (within cluster_tol of one representative, >= 10 cluster_tol from
    the other).  The trace records, per iteration, the bracket width
    after the update and the smaller commit step among the endpoints
    measured so far; every replacement lands strictly closer to the
    boundary, so this escape time never decreases as the bracket
    tightens (plateaus happen while one side waits for its update).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    input_seq.require_window(anchor + 1, anchor + horizon)
    rep_a = _solo_states(system, input_seq, lo, anchor, horizon)
    rep_b = _solo_states(system, input_seq, hi, anchor, horizon)
    if np.linalg.norm(rep_a[-1] - rep_b[-1]) <= 10 * cluster_tol:
        raise ConfigurationError("lo and hi converge to the same basin")
    a, b = lo.copy(), hi.copy()
    commit_times = {"a": None, "b": None}
    trace = []
    straddle = None
    warning = None
    for _ in range(max_iters):
        width = float(np.linalg.norm(b - a))
        if width <= target_width:
            break
        mid = (a + b) / 2.0
        states = _solo_states(system, input_seq, mid, anchor, horizon)
        side, t = _commit_step(states, rep_a, rep_b, cluster_tol)
        if side is None:
            warning = ("midpoint did not commit within the horizon; "
                       "returning the best bracket")
            break
        if side == "a":
            a = mid
        else:
            b = mid
        commit_times[side] = t
        known = [v for v in commit_times.values() if v is not None]
        trace.append((float(np.linalg.norm(b - a)), min(known)))
        if straddle is None and np.linalg.norm(b - a) <= 1e-11:
            straddle = (a.copy(), b.copy())
    return SeparatrixResult(boundary=(a + b) / 2.0, bracket_lo=a, bracket_hi=b,
                            trace=np.asarray(trace, dtype=float).reshape(-1, 2),
                            straddle_pair=straddle, warning=warning)


def pair_divergence_step(system, input_seq, a, b, threshold, horizon, anchor=0):
    """First step at which two orbits drift more than `threshold` apart."""
    sa = _solo_states(system, input_seq, np.asarray(a, float), anchor, horizon)
    sb = _solo_states(system, input_seq, np.asarray(b, float), anchor, horizon)
    gaps = np.linalg.norm(sa - sb, axis=1)
    over = gaps > threshold
    return int(np.argmax(over)) if over.any() else None


# ----------------------------------------------------------------------
# Hausdorff semi-distance
# ----------------------------------------------------------------------

def hausdorff_semidistance(a, b):
    """sup over a of the distance to b, exact for finite point sets.

    Not symmetric: h({0}, {0, 1}) = 0 while h({0, 1}, {0}) = 1.  Each
    pair distance is np.linalg.norm of the difference, so the result is
    bit-identical to the obvious two-loop computation (a vectorized
    square-sum can differ in the last ulp through fused multiply-adds).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("hausdorff_semidistance requires nonempty sets")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets live in different dimensions")
    worst = 0.0
    for p in a:
        best = min(float(np.linalg.norm(p - q)) for q in b)
        if best > worst:
            worst = best
    return worst

"""Preset experiments: data-producing runs with built-in assertions.

Each preset resolves a config (defaults + overrides, unknown keys
rejected), runs, and returns an ExperimentResult holding a summary, a
list of named pass/fail assertions, and the files written.  Every run
with an output directory also writes a manifest capturing the fully
resolved config; re-running from the manifest reproduces every output
byte for byte (no timestamps, fixed float formatting, committed seeds).
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import json
import math
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .contraction import (Region, large_input_radius, region_contraction_check,
                          region_invariance_check, strip_bounds_closed_form)
from .core import orbit
from .index import (IndexProtocol, ensemble_to_csv, estimate_echo_index,
                    pullback_fibre, run_ensemble, separatrix_bisect,
                    pair_divergence_step, thread_cap)
from .presets import (KloedenSystem, context_reservoir, scalar_params,
                      switching_inputs, switching_params)
from .sequences import (d_prod, gen_context_task, gen_two_symbol,
                        gen_uniform_scaled, splice_large_input)
from .training import (ReservoirConfig, TrainedModel, closed_loop_eval, nrmse,
                       pca_project, ridge_readout, save_model,
                       teacher_forced_states)


@dataclass(frozen=True)
class Assertion:
    """One named pass/fail claim checked inside a preset run."""

    name: str
    ok: bool
    detail: str

    def to_dict(self):
        return {"name": self.name, "ok": bool(self.ok), "detail": self.detail}


@dataclass(frozen=True)
class ExperimentResult:
    preset: str
    config: dict
    assertions: list
    summary: dict
    outputs: dict

    @property
    def ok(self):
        return all(a.ok for a in self.assertions)

    def failures(self):
        return [a.to_dict() for a in self.assertions if not a.ok]


# Per-preset defaults; the benchmark constants live in presets.py, these
# are the run-shape knobs.  Override keys must come from this table.
DEFAULTS = {
    "kloeden": {
        "a": 1.5, "ics": 11, "k_start": -10, "k_end": 25,
        "fibre_depth": 35, "fibre_depth_deep": 60,
    },
    "switching2d": {
        "p": 0.5, "ic_count": 30, "transients": [200, 400],
        "horizon": 120, "window": 100, "cluster_tol": 1e-3,
        "mu": 0.999, "grid": 33, "fibre_depth": 80, "fibre_depth_deep": 200,
        "sep_lo": [0.49, -0.2], "sep_hi": [0.49, 0.0], "sep_horizon": 600,
        "input_first": -300, "input_last": 700,
    },
    "scalar_sweep": {
        "w_list": [0.0006, 0.01, 0.05], "n_seeds": 5, "ic_count": 30,
        "transients": [20000, 40000], "horizon": 120, "window": 100,
        "cluster_tol": 1e-3, "input_first": -100, "input_last": 40400,
        "sample_ics": 10, "sample_steps": 2000,
    },
    "fold_bisect": {
        "tolerance": 1e-6, "w_lo": 0.0, "w_hi": 0.002,
        "max_steps": 30000, "escape_threshold": 0.05,
    },
    "splice_demo": {
        "m_list": [5, 10, 20], "w": 0.0006, "half_width": 40,
        "epsilon": 1.0, "mu": 0.5, "ic_count": 30,
        "transients": [20000, 40000], "horizon": 120, "window": 100,
        "cluster_tol": 1e-3, "input_first": -100, "input_last": 40400,
    },
    "context_task": {
        "n_r": 200, "train_len": 6000, "test_len": 3000, "washout": 200,
        "pulse_prob": 0.01, "noise_std": 0.05, "ridge_lambda": 0.7,
        "spectral_radius": 0.9, "sparsity": 0.95, "weight_range": 1.0,
        "exclusion": 20, "accuracy_min": 0.95, "pca_min": 0.9,
        "ens_ics": 100, "ens_transients": [400, 800], "ens_horizon": 120,
        "ens_window": 100, "cluster_tol": 1e-3,
    },
}

# Committed seeds: fixed input/weight realizations for which the preset
# assertions were verified; --seed explores other realizations.
DEFAULT_SEEDS = {
    "kloeden": 0,
    "switching2d": 0,
    "scalar_sweep": 1,
    "fold_bisect": 0,
    "splice_demo": 1,
    "context_task": 0,
}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    return v


def resolve_config(preset, seed=None, overrides=None):
    """Merge defaults with overrides; unknown keys or presets are errors."""
    if preset not in DEFAULTS:
        raise KeyError(f"unknown preset {preset!r}; choose from "
                       f"{sorted(DEFAULTS)}")
    cfg = dict(DEFAULTS[preset])
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise KeyError(f"unknown config key {key!r} for preset {preset!r}; "
                           f"valid keys: {sorted(cfg)}")
        cfg[key] = value
    cfg["seed"] = int(DEFAULT_SEEDS[preset] if seed is None else seed)
    return _jsonable(cfg)


def _write_json(doc, path):
    Path(path).write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True)
                          + "\n")


def _scan_roots(fn, lo=-0.9999, hi=0.9999, samples=4001):
    """All simple roots of fn on [lo, hi] via sign changes + brentq."""
    xs = np.linspace(lo, hi, samples)
    vals = np.array([fn(x) for x in xs])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(float(brentq(fn, xs[i], xs[i + 1], xtol=1e-14)))
    return roots


# ----------------------------------------------------------------------
# kloeden
# ----------------------------------------------------------------------

def _run_kloeden(cfg, out):
    a = float(cfg["a"])
    system = KloedenSystem(a)
    k0, k1 = int(cfg["k_start"]), int(cfg["k_end"])
    ics = np.linspace(-1.0, 1.0, int(cfg["ics"]))

    runs = np.stack([system.run(x0, k0, k1) for x0 in ics])
    root = float(brentq(lambda x: x - math.tanh(a * x / (1.0 + abs(x))),
                        0.1, 0.9999, xtol=1e-14))

    # zero is a fixed point of every component map, so it must hold exactly
    zero_rows = np.flatnonzero(ics == 0.0)
    zero_ok = all(np.all(runs[i] == 0.0) for i in zero_rows)

    finals = runs[:, -1]
    nonzero = ics != 0.0
    end_err = np.abs(np.abs(finals[nonzero]) - root)
    ends_ok = bool(np.all(end_err < 1e-3))

    # arrivals at k < 0 use the past drive 1/a < 1 and contract to 0
    past = runs[:, : -k0]
    past_ok = bool(np.all(np.diff(np.abs(past), axis=1) <= 0.0))

    depth, deep = int(cfg["fibre_depth"]), int(cfg["fibre_depth_deep"])
    seq = system.arrival_sequence(-max(depth, deep), 0)
    fibre = pullback_fibre(system, seq, n=0, depth=depth)
    fibre_deep = pullback_fibre(system, seq, n=0, depth=deep)

    assertions = [
        Assertion("zero-ic-fixed", zero_ok, "x=0 stays exactly 0"),
        Assertion("ends-at-roots", ends_ok,
                  f"max |final - root| = {float(end_err.max()):.3g} < 1e-3"),
        Assertion("past-contraction", past_ok,
                  "|x| non-increasing while the drive is 1/a (k < 0)"),
        Assertion("fibre-collapse", fibre.final_diameter < 1e-6,
                  f"depth {depth} fibre diameter {fibre.final_diameter:.3g} < 1e-6"),
        Assertion("fibre-collapse-deep", fibre_deep.final_diameter < 1e-8,
                  f"depth {deep} fibre diameter {fibre_deep.final_diameter:.3g} < 1e-8"),
    ]
    summary = {
        "a": a, "root": root,
        "final_states": finals.tolist(),
        "fibre_diameter": fibre.final_diameter,
        "fibre_diameter_deep": fibre_deep.final_diameter,
    }
    outputs = {}
    if out is not None:
        path = out / "trajectories.csv"
        lines = ["ic_id,k,x"]
        for i in range(len(ics)):
            for j, k in enumerate(range(k0, k1 + 1)):
                lines.append(f"{i},{k},{runs[i, j]:.17g}")
        path.write_text("\n".join(lines) + "\n")
        outputs["trajectories"] = str(path)
    return summary, assertions, outputs


# ----------------------------------------------------------------------
# switching2d
# ----------------------------------------------------------------------

def _coordinate_map(alpha, w, c):
    return lambda x: (1.0 - alpha) * x + alpha * math.tanh(w * x + c) - x


def _switching_fixed_points(params, u):
    """Per-coordinate fixed points of one component map, with stability.

    The map is diagonal, so fixed points are products of 1-D roots; the
    middle x2 root has a > 1 slope in x2, making it the saddle row.
    """
    alpha = params.alpha
    pts = []
    roots1 = _scan_roots(_coordinate_map(alpha, 0.5, u[0]))
    roots2 = _scan_roots(_coordinate_map(alpha, 1.5, u[1]))
    for r2 in sorted(roots2):
        slope2 = 1.0 - alpha + alpha * 1.5 * (1.0 - math.tanh(1.5 * r2 + u[1]) ** 2)
        for r1 in roots1:
            pts.append({"x": [r1, r2],
                        "kind": "saddle" if slope2 > 1.0 else "node"})
    return pts


def _run_switching2d(cfg, out):
    params = switching_params()
    u1, u2 = switching_inputs()
    seed = int(cfg["seed"])
    seq = gen_two_symbol(u1, u2, float(cfg["p"]), int(cfg["input_first"]),
                         int(cfg["input_last"]), seed)
    tol = float(cfg["cluster_tol"])

    protocol = IndexProtocol(
        ic_counts=(int(cfg["ic_count"]),) * 2,
        transients=tuple(int(t) for t in cfg["transients"]),
        horizon=int(cfg["horizon"]), window=int(cfg["window"]),
        cluster_tol=tol, ic_seed=seed)
    report = estimate_echo_index(params, seq, protocol)

    strip_plus = strip_bounds_closed_form(1)
    strip_minus = strip_bounds_closed_form(-1)

    r_plus = Region(lo=[-1.0, 0.55], hi=[1.0, 1.0])
    r_minus = Region(lo=[-1.0, -1.0], hi=[1.0, -0.55])
    mu, grid = float(cfg["mu"]), int(cfg["grid"])
    certs = {}
    for name, region in (("R+", r_plus), ("R-", r_minus)):
        inv_ok, witness = region_invariance_check(params, region, [u1, u2],
                                                  grid=grid)
        con = region_contraction_check(params, region, [u1, u2], mu, grid=grid)
        certs[name] = {"invariant": inv_ok,
                       "witness": None if witness is None
                       else [witness[0].tolist(), witness[1].tolist()],
                       "worst_norm": con.worst_norm, "margin": con.margin,
                       "certified": con.certified}

    depth, deep = int(cfg["fibre_depth"]), int(cfg["fibre_depth_deep"])
    fibres = {}
    for name, region in (("R+", r_plus), ("R-", r_minus)):
        fb = pullback_fibre(params, seq, n=0, depth=depth, region=region)
        fb_deep = pullback_fibre(params, seq, n=0, depth=deep, region=region)
        fibres[name] = {"diameter": fb.final_diameter,
                        "diameter_deep": fb_deep.final_diameter,
                        "point": fb_deep.points.mean(axis=0).tolist()}

    # the deep fibre must land on the matching forward cluster: push its
    # endpoint to the ensemble tail time and compare representatives
    trace_ok, trace_detail = True, []
    if report.is_definite and report.index == 2:
        last_transient = report.diagnostics["rungs"][-1][1]
        t_end = last_transient + protocol.horizon
        for name in ("R+", "R-"):
            p0 = np.asarray(fibres[name]["point"])
            state = orbit(params, seq, p0, t_end).final
            side = 1.0 if name == "R+" else -1.0
            reps = [c.final_state for c in report.clusters
                    if np.sign(c.final_state[1]) == side]
            if not reps:
                trace_ok = False
                trace_detail.append(f"{name}: no cluster on this side")
                continue
            gap = min(float(np.linalg.norm(state - r)) for r in reps)
            trace_detail.append(f"{name}: {gap:.3g}")
            trace_ok = trace_ok and gap < tol
    else:
        trace_ok = False
        trace_detail = ["no definite index-2 report to compare against"]

    sep = separatrix_bisect(params, seq, np.asarray(cfg["sep_lo"], float),
                            np.asarray(cfg["sep_hi"], float),
                            horizon=int(cfg["sep_horizon"]), cluster_tol=tol)
    # commit times are only guaranteed monotone once the bracket sits in
    # the linear neighbourhood of the boundary; coarse early brackets see
    # nonlinear transients, so filter to widths below 1e-2
    escapes = sep.trace[:, 1] if sep.trace.size else np.zeros(0)
    near = sep.trace[sep.trace[:, 0] <= 1e-2, 1] if sep.trace.size else np.zeros(0)
    monotone = bool(near.size > 5 and np.all(np.diff(near) >= 0))

    # a pair exactly 1e-11 apart across the boundary, then the step at
    # which the two orbits tear apart toward different clusters
    direction = np.array([0.0, 1.0])
    pa = sep.boundary - 5e-12 * direction
    pb = sep.boundary + 5e-12 * direction
    div_step = pair_divergence_step(params, seq, pa, pb, threshold=0.1,
                                    horizon=int(cfg["sep_horizon"]))
    ends = [orbit(params, seq, p, int(cfg["sep_horizon"])).final for p in (pa, pb)]
    split_ok = (div_step is not None
                and float(np.linalg.norm(ends[0] - ends[1])) > 0.5)

    fixed_points = {"f1": _switching_fixed_points(params, u1),
                    "f2": _switching_fixed_points(params, u2)}
    x1_star = fixed_points["f1"][0]["x"][0]
    saddles = [p for p in fixed_points["f1"] if p["kind"] == "saddle"]

    assertions = [
        Assertion("index-two", report.index == 2,
                  f"estimate_echo_index verdict {report.verdict()}"),
        Assertion("strip-bounds", abs(strip_plus[0] + 0.5390) <= 1e-3
                  and abs(strip_plus[1] - 0.3390) <= 1e-3,
                  f"strip {strip_plus} vs (-0.5390, 0.3390) within 1e-3"),
        Assertion("regions-invariant",
                  all(c["invariant"] for c in certs.values()),
                  "step images stay inside R+ and R- for both symbols"),
        Assertion("regions-contracting",
                  all(c["certified"] for c in certs.values()),
                  f"worst norms {[round(c['worst_norm'], 6) for c in certs.values()]}"
                  f" <= mu={mu}"),
        Assertion("fibre-pointlike",
                  all(f["diameter"] < 1e-4 for f in fibres.values()),
                  "depth-%d diameters %s < 1e-4" % (depth, ", ".join(
                      "%.3g" % f["diameter"] for f in fibres.values()))),
        Assertion("fibre-pointlike-deep",
                  all(f["diameter_deep"] < 1e-10 for f in fibres.values()),
                  "depth-%d diameters %s < 1e-10" % (deep, ", ".join(
                      "%.3g" % f["diameter_deep"] for f in fibres.values()))),
        Assertion("fibre-traces-cluster", trace_ok, "; ".join(trace_detail)),
        Assertion("separatrix-bracket", sep.width <= 1e-12,
                  f"bracket width {sep.width:.3g}"),
        Assertion("escape-monotone", monotone,
                  "escape times non-decreasing once bracket width <= 1e-2"),
        Assertion("straddle-tracks", div_step is not None and div_step >= 150,
                  f"pair at 1e-11 separation diverged at step {div_step}"),
        Assertion("straddle-splits", split_ok,
                  "straddling pair ends in different clusters"),
        Assertion("saddle-line", len(saddles) == 1
                  and abs(x1_star - 0.45) < 0.02,
                  f"f1 saddle at x1 = {x1_star:.6f}"),
    ]
    summary = {
        "index": report.verdict(),
        "min_separation": report.min_separation,
        "max_diameter": report.max_diameter,
        "strip_f1": list(strip_plus), "strip_f2": list(strip_minus),
        "certificates": certs, "fibres": fibres,
        "fixed_points": fixed_points,
        "separatrix": {"boundary": sep.boundary.tolist(),
                       "width": sep.width,
                       "iterations": int(sep.trace.shape[0]),
                       "final_escape_steps": (int(escapes[-1])
                                              if escapes.size else None),
                       "divergence_step": div_step},
    }
    outputs = {}
    if out is not None:
        run = run_ensemble(params, seq, int(cfg["ic_count"]),
                           transient=int(cfg["transients"][0]),
                           horizon=int(cfg["horizon"]), ic_seed=seed)
        path = out / "ensemble.csv"
        ensemble_to_csv(run, path)
        outputs["ensemble"] = str(path)
    return summary, assertions, outputs


# ----------------------------------------------------------------------
# scalar sweep
# ----------------------------------------------------------------------

def _majority(indices):
    """Most common definite index if it wins an absolute majority."""
    definite = [i for i in indices if i is not None]
    if not definite:
        return None
    value, hits = Counter(definite).most_common(1)[0]
    return value if hits > len(indices) // 2 else None


def _run_scalar_sweep(cfg, out):
    params = scalar_params()
    seed = int(cfg["seed"])
    w_list = [float(w) for w in cfg["w_list"]]
    n_seeds = int(cfg["n_seeds"])
    first, last = int(cfg["input_first"]), int(cfg["input_last"])
    protocol_base = IndexProtocol(
        ic_counts=(int(cfg["ic_count"]),) * 2,
        transients=tuple(int(t) for t in cfg["transients"]),
        horizon=int(cfg["horizon"]), window=int(cfg["window"]),
        cluster_tol=float(cfg["cluster_tol"]))

    jobs = [(wi, r) for wi in range(len(w_list)) for r in range(n_seeds)]
    results = {}

    def one(job):
        wi, r = job
        gen_seed = seed + r
        seq = gen_uniform_scaled(w_list[wi], first, last, gen_seed)
        rep = estimate_echo_index(params, seq,
                                  replace(protocol_base, ic_seed=gen_seed))
        results[job] = rep

    workers = thread_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, jobs))
    else:
        for job in jobs:
            one(job)

    table = []
    majorities = []
    switching_votes = []
    for wi, w in enumerate(w_list):
        verdicts = []
        switch = 0
        for r in range(n_seeds):
            rep = results[(wi, r)]
            verdicts.append(rep.index)
            flagged = bool(rep.diagnostics.get("switching_tails"))
            switch += flagged
            table.append({"w": w, "gen_seed": seed + r,
                          "index": rep.verdict(),
                          "min_separation": rep.min_separation,
                          "max_diameter": rep.max_diameter,
                          "max_tail_std": max(rep.diagnostics["tail_std"]),
                          "switching_tails": flagged})
        majorities.append(_majority(verdicts))
        switching_votes.append(switch)

    expected = {0.0006: 2, 0.01: 1, 0.05: 1}
    assertions = []
    for wi, w in enumerate(w_list):
        want = expected.get(w)
        if want is None:
            continue
        assertions.append(Assertion(
            f"index-w={w:g}", majorities[wi] == want,
            f"majority over {n_seeds} seeds = {majorities[wi]} (want {want})"))
    if 0.01 in w_list:
        wi = w_list.index(0.01)
        assertions.append(Assertion(
            "switching-flag-w=0.01", switching_votes[wi] > n_seeds // 2,
            f"{switching_votes[wi]}/{n_seeds} seeds flag a wandering tail"))

    summary = {"majorities": {f"{w:g}": majorities[i]
                              for i, w in enumerate(w_list)},
               "per_seed": table}
    outputs = {}
    if out is not None:
        path = out / "sweep_results.csv"
        lines = ["w,gen_seed,index,min_separation,max_diameter,"
                 "max_tail_std,switching_tails"]
        for row in table:
            lines.append(
                f"{row['w']:g},{row['gen_seed']},{row['index']},"
                f"{row['min_separation']:.17g},{row['max_diameter']:.17g},"
                f"{row['max_tail_std']:.17g},{int(row['switching_tails'])}")
        path.write_text("\n".join(lines) + "\n")
        outputs["sweep_results"] = str(path)
        for w in w_list:
            seq = gen_uniform_scaled(w, first, last, seed)
            run = run_ensemble(params, seq, int(cfg["sample_ics"]),
                               transient=0, horizon=int(cfg["sample_steps"]),
                               ic_seed=seed)
            sample = out / f"sample_w{w:g}.csv"
            ensemble_to_csv(run, sample)
            outputs[f"sample_w{w:g}"] = str(sample)
    return summary, assertions, outputs


# ----------------------------------------------------------------------
# fold bisect
# ----------------------------------------------------------------------

def _fold_analytic():
    """Fold of x -> tanh(1.01 x + c): slope-1 point, then |c| there."""
    x_star = math.sqrt(1.0 - 1.0 / 1.01)
    return x_star, 1.01 * x_star - math.atanh(x_star)


def _escapes_basin(w, max_steps, threshold):
    """Constant input +w from x0 = -1: does the orbit cross to x > 0?

    Below the fold value the negative attractor persists and the orbit
    stays negative; above it the orbit crawls through the ghost and
    escapes, taking ~ delta^(-1/2) steps near the fold.
    """
    x = -1.0
    for _ in range(max_steps):
        x = math.tanh(1.01 * x + w)
        if x > threshold:
            return True
    return False


def _run_fold_bisect(cfg, out):
    x_star, c_star = _fold_analytic()
    tol = float(cfg["tolerance"])
    cap = int(cfg["max_steps"])
    thresh = float(cfg["escape_threshold"])
    lo, hi = float(cfg["w_lo"]), float(cfg["w_hi"])
    if _escapes_basin(lo, cap, thresh) or not _escapes_basin(hi, cap, thresh):
        raise ValueError("bisection bracket does not straddle the fold")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if _escapes_basin(mid, cap, thresh):
            hi = mid
        else:
            lo = mid
    estimate = (lo + hi) / 2.0

    assertions = [
        Assertion("analytic-band", 0.00060 <= c_star <= 0.00075,
                  f"|c*| = {c_star:.8f} in [0.00060, 0.00075]"),
        Assertion("bisection-agrees", abs(estimate - c_star) <= 1e-5,
                  f"bisection {estimate:.8f} vs analytic {c_star:.8f}"),
    ]
    summary = {"x_star": x_star, "c_star_abs": c_star,
               "bisection": estimate, "bracket": [lo, hi]}
    return summary, assertions, {}


# ----------------------------------------------------------------------
# splice demo
# ----------------------------------------------------------------------

def _run_splice_demo(cfg, out):
    params = scalar_params()
    seed = int(cfg["seed"])
    w = float(cfg["w"])
    first, last = int(cfg["input_first"]), int(cfg["input_last"])
    base = gen_uniform_scaled(w, first, last, seed)
    protocol = IndexProtocol(
        ic_counts=(int(cfg["ic_count"]),) * 2,
        transients=tuple(int(t) for t in cfg["transients"]),
        horizon=int(cfg["horizon"]), window=int(cfg["window"]),
        cluster_tol=float(cfg["cluster_tol"]), ic_seed=seed)

    admissible = large_input_radius(params, float(cfg["epsilon"]),
                                    float(cfg["mu"]))
    far = admissible.far_value()

    base_report = estimate_echo_index(params, base, protocol)
    half_width = int(cfg["half_width"])
    table = []
    for m in [int(m) for m in cfg["m_list"]]:
        spliced = splice_large_input(base, m, far, admissible=admissible)
        rep = estimate_echo_index(params, spliced, protocol)
        table.append({"m": m, "index": rep.verdict(),
                      "d_prod": d_prod(base, spliced, half_width)})

    identity = splice_large_input(base, max(abs(first), abs(last)) + 1, far,
                                  admissible=admissible)

    ratios = []
    for prev, cur in zip(table, table[1:]):
        per_unit = (prev["d_prod"] / cur["d_prod"]) ** (1.0 / (cur["m"] - prev["m"]))
        ratios.append(per_unit)

    assertions = [
        Assertion("base-index-two", base_report.index == 2,
                  f"unspliced verdict {base_report.verdict()}"),
        Assertion("spliced-index-one",
                  all(row["index"] == "1" for row in table),
                  f"verdicts {[row['index'] for row in table]}"),
        Assertion("dprod-halves",
                  all(1.8 <= r <= 2.2 for r in ratios),
                  f"per-unit decay factors {[round(r, 3) for r in ratios]}"),
        Assertion("identity-beyond-window",
                  bool(np.array_equal(identity.values, base.values)),
                  "splice beyond the stored window leaves every value unchanged"),
    ]
    summary = {"far_value": far.tolist(), "radius": float(admissible.radii[0]),
               "base_index": base_report.verdict(), "table": table,
               "per_unit_ratios": ratios}
    outputs = {}
    if out is not None:
        path = out / "splice_table.csv"
        lines = ["m,index,d_prod"]
        for row in table:
            lines.append(f"{row['m']},{row['index']},{row['d_prod']:.17g}")
        path.write_text("\n".join(lines) + "\n")
        outputs["splice_table"] = str(path)
    return summary, assertions, outputs


# ----------------------------------------------------------------------
# context task
# ----------------------------------------------------------------------

def _run_context_task(cfg, out):
    seed = int(cfg["seed"])
    train_len, test_len = int(cfg["train_len"]), int(cfg["test_len"])
    total = train_len + test_len
    washout = int(cfg["washout"])
    task = gen_context_task(0, total, float(cfg["pulse_prob"]), seed)

    rc = ReservoirConfig(n_r=int(cfg["n_r"]), sparsity=float(cfg["sparsity"]),
                         spectral_radius_target=float(cfg["spectral_radius"]),
                         weight_range=float(cfg["weight_range"]),
                         noise_std=float(cfg["noise_std"]),
                         ridge_lambda=float(cfg["ridge_lambda"]), seed=seed)
    params0 = context_reservoir(rc)

    drive_train = task.drive.slice(0, train_len)
    pulses_train = task.pulses[: train_len + 1]
    targets_train = task.targets[: train_len + 1]
    states = teacher_forced_states(params0, drive_train, pulses_train,
                                   targets_train[:, 0], rc.noise_std, seed)
    w_out = ridge_readout(states[washout:], targets_train[washout:],
                          rc.ridge_lambda)
    params = replace(params0, w_out=w_out)
    train_err = nrmse(states[washout:] @ w_out.T, targets_train[washout:])

    drive_test = task.drive.slice(train_len, total)
    pulses_test = task.pulses[train_len:]
    targets_test = task.targets[train_len:]
    model = TrainedModel(params=params, train_error=train_err,
                         metadata={"seed": seed, "train_len": train_len,
                                   "test_len": test_len, "washout": washout})
    outputs_ts, traj = closed_loop_eval(model, drive_test, pulses_test,
                                        x0=states[-1])
    test_err = nrmse(outputs_ts[1:], targets_test[1:])
    model = replace(model, test_error=test_err)

    # steps inside the reaction window after any pulse are not scored
    exclusion = int(cfg["exclusion"])
    excluded = np.zeros(total + 1, dtype=bool)
    for t in np.flatnonzero(task.pulses.any(axis=1)):
        excluded[t: t + exclusion] = True
    scored = ~excluded[train_len + 1:]
    pred_sign = np.sign(outputs_ts[1:, 0])
    true_sign = targets_test[1:, 0]
    accuracy = float(np.mean(pred_sign[scored] == true_sign[scored]))

    projections, cumvar = pca_project(traj.states, 2)

    inputs_off = task.pulses_off_input()
    ens_protocol = IndexProtocol(
        ic_counts=(int(cfg["ens_ics"]),) * 2,
        transients=tuple(int(t) for t in cfg["ens_transients"]),
        horizon=int(cfg["ens_horizon"]), window=int(cfg["ens_window"]),
        cluster_tol=float(cfg["cluster_tol"]), ic_seed=seed)
    ens_report = estimate_echo_index(params, inputs_off, ens_protocol)

    assertions = [
        Assertion("context-accuracy",
                  accuracy >= float(cfg["accuracy_min"]),
                  f"z1 sign accuracy {accuracy:.4f} on {int(scored.sum())} "
                  f"scored steps (>= {cfg['accuracy_min']})"),
        Assertion("pca-cumvar", cumvar >= float(cfg["pca_min"]),
                  f"two-component cumulative variance {cumvar:.4f}"),
        Assertion("pulse-off-index-two", ens_report.index == 2,
                  f"{cfg['ens_ics']}-IC pulse-off verdict {ens_report.verdict()}"),
    ]
    summary = {
        "accuracy": accuracy, "scored_steps": int(scored.sum()),
        "excluded_steps": int(np.size(scored) - scored.sum()),
        "train_nrmse": train_err.tolist(), "test_nrmse": test_err.tolist(),
        "pca_cumulative_variance": cumvar,
        "pulse_off_index": ens_report.verdict(),
        "pulse_off_min_separation": ens_report.min_separation,
        "pulse_off_max_diameter": ens_report.max_diameter,
        "pulse_counts": [int(task.pulses[:, j].sum()) for j in range(2)],
    }
    outputs = {}
    if out is not None:
        model_path = out / "model.json"
        save_model(model, model_path)
        outputs["model"] = str(model_path)

        eval_path = out / "test_eval.csv"
        lines = ["k,z1_target,z1_out,z2_target,z2_out,scored"]
        for j in range(1, test_len + 1):
            k = train_len + j
            lines.append(f"{k},{targets_test[j, 0]:.17g},"
                         f"{outputs_ts[j, 0]:.17g},{targets_test[j, 1]:.17g},"
                         f"{outputs_ts[j, 1]:.17g},{int(not excluded[k])}")
        eval_path.write_text("\n".join(lines) + "\n")
        outputs["test_eval"] = str(eval_path)

        pca_path = out / "pca.csv"
        lines = ["k,pc1,pc2,z1_target"]
        for j in range(projections.shape[0]):
            lines.append(f"{train_len + j},{projections[j, 0]:.17g},"
                         f"{projections[j, 1]:.17g},{targets_test[j, 0]:.17g}")
        pca_path.write_text("\n".join(lines) + "\n")
        outputs["pca"] = str(pca_path)

        run = run_ensemble(params, inputs_off, int(cfg["ens_ics"]),
                           transient=int(cfg["ens_transients"][-1]),
                           horizon=int(cfg["ens_horizon"]), ic_seed=seed)
        z1_path = out / "ensemble_z1.csv"
        lines = ["ic_id,k,z1"]
        for i in range(run.count):
            z1 = run.trajectories[i] @ params.w_out[0]
            for j in range(run.horizon + 1):
                lines.append(f"{i},{run.tail_anchor + j},{z1[j]:.17g}")
        z1_path.write_text("\n".join(lines) + "\n")
        outputs["ensemble_z1"] = str(z1_path)
    return summary, assertions, outputs


# ----------------------------------------------------------------------
# dispatch and manifests
# ----------------------------------------------------------------------

_RUNNERS = {
    "kloeden": _run_kloeden,
    "switching2d": _run_switching2d,
    "scalar_sweep": _run_scalar_sweep,
    "fold_bisect": _run_fold_bisect,
    "splice_demo": _run_splice_demo,
    "context_task": _run_context_task,
}


def run_preset(preset, seed=None, out_dir=None, overrides=None):
    """Run one preset; writes data, report and manifest when out_dir given."""
    cfg = resolve_config(preset, seed=seed, overrides=overrides)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    summary, assertions, outputs = _RUNNERS[preset](cfg, out)
    if out is not None:
        report_path = out / "report.json"
        _write_json({"preset": preset, "ok": all(a.ok for a in assertions),
                     "assertions": [a.to_dict() for a in assertions],
                     "summary": summary}, report_path)
        outputs["report"] = str(report_path)
        manifest_path = out / "manifest.json"
        _write_json({"preset": preset, "seed": cfg["seed"],
                     "overrides": _jsonable(overrides or {}),
                     "resolved": cfg,
                     "outputs": sorted(Path(p).name for p in outputs.values())},
                    manifest_path)
        outputs["manifest"] = str(manifest_path)
    return ExperimentResult(preset=preset, config=cfg, assertions=assertions,
                            summary=_jsonable(summary), outputs=outputs)


def run_from_manifest(path, out_dir=None):
    """Re-run the exact configuration recorded in a manifest.

    With the same seed and overrides all outputs are reproduced byte for
    byte; pass a different out_dir to write alongside the original.
    """
    doc = json.loads(Path(path).read_text())
    target = out_dir if out_dir is not None else Path(path).parent
    return run_preset(doc["preset"], seed=doc["seed"], out_dir=target,
                      overrides=doc.get("overrides") or {})


def run_kloeden(seed=None, out_dir=None, **overrides):
    return run_preset("kloeden", seed, out_dir, overrides)


def run_switching2d(seed=None, out_dir=None, **overrides):
    return run_preset("switching2d", seed, out_dir, overrides)


def run_scalar_sweep(seed=None, out_dir=None, **overrides):
    return run_preset("scalar_sweep", seed, out_dir, overrides)


def run_fold_bisect(seed=None, out_dir=None, **overrides):
    return run_preset("fold_bisect", seed, out_dir, overrides)


def run_splice_demo(seed=None, out_dir=None, **overrides):
    return run_preset("splice_demo", seed, out_dir, overrides)


def run_context_task(seed=None, out_dir=None, **overrides):
    return run_preset("context_task", seed, out_dir, overrides)

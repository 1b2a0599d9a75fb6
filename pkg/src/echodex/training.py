"""Reservoir training with output feedback: init, harvest, ridge, eval.

The recipe: draw a sparse random reservoir, rescale it to a target
spectral radius, harvest states by teacher forcing (the feedback input
is the target output, with Gaussian noise injected inside the
activation), solve the readout by ridge regression, then close the
loop for evaluation.  Only the first output channel may feed back.
"""

from dataclasses import dataclass, field
import json
from pathlib import Path

import numpy as np

from .core import ConfigurationError, RnnParams, orbit
from .rng import DOMAIN_NOISE, DOMAIN_WEIGHTS, substream
from .sequences import InputSequence


@dataclass(frozen=True)
class ReservoirConfig:
    n_r: int = 500
    sparsity: float = 0.95
    spectral_radius_target: float = 0.9
    weight_range: float = 1.0
    noise_std: float = 0.05
    ridge_lambda: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.sparsity < 1.0:
            raise ConfigurationError("sparsity must lie in [0, 1)")
        if self.n_r < 1 or self.spectral_radius_target <= 0:
            raise ConfigurationError("need n_r >= 1 and a positive radius target")


def _spectral_radius(w):
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def init_reservoir(cfg, n_i, n_o):
    """Sparse uniform reservoir rescaled to the target spectral radius.

    Entries are uniform in [-range, range], independently zeroed with
    probability `sparsity`, then W_r is rescaled so its largest
    eigenvalue modulus equals the target within 1e-9 (verified; an
    all-zero draw retries on a fresh substream, at most 10 times).
    W_in and W_fb are dense uniform draws; the leak is fixed at 1.  The
    readout starts as all zeros so the feedback wiring is in place but
    silent until training fills it in.
    """
    rng_ranges = cfg.weight_range
    w = None
    for attempt in range(10):
        entries = substream(cfg.seed, DOMAIN_WEIGHTS, 4 * attempt + 0).uniform(
            -rng_ranges, rng_ranges, size=(cfg.n_r, cfg.n_r))
        keep = substream(cfg.seed, DOMAIN_WEIGHTS, 4 * attempt + 1).random(
            (cfg.n_r, cfg.n_r)) >= cfg.sparsity
        cand = entries * keep
        radius = _spectral_radius(cand)
        if radius > 0.0:
            w = cand * (cfg.spectral_radius_target / radius)
            break
    if w is None:
        raise ConfigurationError("reservoir draw produced a nilpotent matrix 10 times")
    achieved = _spectral_radius(w)
    if abs(achieved - cfg.spectral_radius_target) > 1e-9:
        raise ConfigurationError(
            f"eigensolve did not converge: radius {achieved} vs target "
            f"{cfg.spectral_radius_target}")
    w_in = substream(cfg.seed, DOMAIN_WEIGHTS, 2).uniform(
        -rng_ranges, rng_ranges, size=(cfg.n_r, n_i))
    w_fb = substream(cfg.seed, DOMAIN_WEIGHTS, 3).uniform(
        -rng_ranges, rng_ranges, size=(cfg.n_r, n_o))
    return RnnParams(alpha=1.0, w_r=w, w_in=w_in, w_fb=w_fb,
                     w_out=np.zeros((n_o, cfg.n_r)))


def _stacked_input(drive, pulses):
    pulses = np.asarray(pulses, dtype=float)
    if pulses.ndim != 2 or pulses.shape[0] != drive.length:
        raise ConfigurationError("drive and pulses must have equal lengths")
    vals = np.column_stack([drive.values, pulses])
    lo = np.concatenate([drive.lo, np.zeros(pulses.shape[1])])
    hi = np.concatenate([drive.hi, np.ones(pulses.shape[1])])
    return InputSequence(anchor=drive.anchor, values=vals, lo=lo, hi=hi,
                         provenance=drive.provenance)


def teacher_forced_states(params, drive, pulses, target_z1, noise_std, seed):
    """Harvest states with the target fed back instead of the readout.

    The transition into time k consumes the stacked input row at k and
    the target z1 at k - 1 through the first feedback column (all other
    feedback columns must be zero).  Gaussian noise of the given
    standard deviation is added inside the activation, one committed
    substream, one draw per transition.  Starts from the origin at the
    drive's anchor; returns (T, n_r) states aligned with the window.
    """
    full = _stacked_input(drive, pulses)
    target_z1 = np.asarray(target_z1, dtype=float)
    if target_z1.shape != (full.length,):
        raise ConfigurationError("target_z1 length must match the drive window")
    if full.n_i != params.n_i:
        raise ConfigurationError(
            f"stacked input has {full.n_i} channels, model expects {params.n_i}")
    if params.n_o >= 2 and np.any(params.w_fb[:, 1:] != 0.0):
        raise ConfigurationError(
            "only the first output channel may feed back during teacher forcing")
    noise = substream(seed, DOMAIN_NOISE, 0)
    fb_col = params.w_fb[:, 0] if params.n_o else np.zeros(params.n_r)
    states = np.zeros((full.length, params.n_r))
    x = states[0]
    for j in range(1, full.length):
        pre = params.w_r @ x
        pre = pre + params.w_in @ full.values[j]
        pre = pre + fb_col * target_z1[j - 1]
        if noise_std > 0.0:
            pre = pre + noise.normal(0.0, noise_std, size=params.n_r)
        x = (1.0 - params.alpha) * x + params.alpha * np.tanh(pre)
        states[j] = x
    return states


def ridge_readout(states, targets, lam):
    """Solve (S^T S + lam I) W = S^T Y; returns W^T of shape (n_o, n_r)."""
    s = np.asarray(states, dtype=float)
    y = np.asarray(targets, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ConfigurationError("states must be a nonempty (T, n_r) matrix")
    if y.shape[0] != s.shape[0]:
        raise ConfigurationError("states and targets must have equal row counts")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        raise ConfigurationError("ridge inputs must be finite")
    if lam < 0:
        raise ConfigurationError("ridge parameter must be nonnegative")
    gram = s.T @ s + lam * np.eye(s.shape[1])
    rhs = s.T @ y
    w = np.linalg.solve(gram, rhs)
    return w.T


def nrmse(predicted, target):
    """Per-column NRMSE, normalized by the target standard deviation."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    err = np.sqrt(np.mean((predicted - target) ** 2, axis=0))
    scale = np.std(target, axis=0)
    return err / np.where(scale > 0, scale, 1.0)


@dataclass(frozen=True)
class TrainedModel:
    """Readout-equipped parameters plus training metadata."""

    params: RnnParams
    train_error: np.ndarray
    test_error: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "train_error": np.asarray(self.train_error).tolist(),
            "test_error": (None if self.test_error is None
                           else np.asarray(self.test_error).tolist()),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(params=RnnParams.from_dict(doc["params"]),
                   train_error=np.asarray(doc["train_error"], dtype=float),
                   test_error=(None if doc.get("test_error") is None
                               else np.asarray(doc["test_error"], dtype=float)),
                   metadata=dict(doc.get("metadata", {})))


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path):
    doc = json.loads(Path(path).read_text())
    if "params" in doc:
        return TrainedModel.from_dict(doc)
    # bare parameter documents are accepted too
    return TrainedModel(params=RnnParams.from_dict(doc), train_error=np.zeros(0))


def closed_loop_eval(model, drive, pulses, x0=None):
    """Run the trained network with its own readout fed back.

    No teacher, no noise: this is a plain orbit of the parameters, since
    the feedback wiring is part of the state map.  Returns the (T, n_o)
    outputs and the state Trajectory over the drive window.
    """
    params = model.params
    full = _stacked_input(drive, pulses)
    if x0 is None:
        x0 = np.zeros(params.n_r)
    traj = orbit(params, full, x0, full.length - 1, anchor=full.anchor)
    outputs = traj.states @ params.w_out.T
    return outputs, traj


def pca_project(states, k):
    """Top-k principal components of mean-centered states.

    Returns (projections, cumulative_variance).  Component signs are
    canonicalized (largest-magnitude loading positive) so exports are
    reproducible.  k above the numerical rank is an error.
    """
    s = np.asarray(states, dtype=float)
    if s.ndim != 2:
        raise ConfigurationError("states must be a (T, n) matrix")
    if not 1 <= k <= s.shape[1]:
        raise ConfigurationError(f"k must lie in [1, {s.shape[1]}]")
    centred = s - s.mean(axis=0)
    cov = centred.T @ centred / max(1, s.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    rank = int(np.sum(evals > evals[0] * 1e-12)) if evals[0] > 0 else 0
    if k > rank:
        raise ConfigurationError(f"k={k} exceeds the numerical rank {rank}")
    top = evecs[:, :k]
    flip = np.sign(top[np.argmax(np.abs(top), axis=0), np.arange(k)])
    top = top * np.where(flip == 0, 1.0, flip)[None, :]
    projections = centred @ top
    total = float(np.sum(evals))
    cumulative = float(np.sum(evals[:k]) / total) if total > 0 else 0.0
    return projections, cumulative


__all__ = [
    "ReservoirConfig", "TrainedModel", "init_reservoir", "teacher_forced_states",
    "ridge_readout", "nrmse", "closed_loop_eval", "pca_project",
    "save_model", "load_model",
]

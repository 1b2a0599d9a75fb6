"""Leaky tanh network: state-update map, Jacobian, orbits.

The state update is

    x[k+1] = (1 - alpha) x[k] + alpha * phi(W_r x[k] + W_in u[k+1] + W_fb z[k])
    z[k]   = W_o x[k]                      (linear readout, optional)

with phi = tanh.  The feedback term is omitted when no readout is
configured.  The affine form is always evaluated in the fixed order
W_r x, then + W_in u, then + W_fb z, so that repeated runs are
bit-identical and the cocycle identity holds exactly.

All floats are 64-bit.  Parameter objects are frozen and their arrays
read-only; step / jacobian / orbit are pure functions safe to call from
many threads.
"""

from dataclasses import dataclass, field
import json
from pathlib import Path

import numpy as np


class ConfigurationError(ValueError):
    """Raised for dimension mismatches and invalid parameter values."""


# ----------------------------------------------------------------------
# activation descriptors
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Activation:
    """Bounded C1 activation descriptor.

    `bound` is the L with image (-L, L); it is stored, not hardcoded, so
    further activations can be registered later.  Only tanh ships today.
    """

    name: str
    bound: float


TANH = Activation("tanh", 1.0)

_ACTIVATIONS = {"tanh": TANH}


def get_activation(name):
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ConfigurationError(f"unknown activation {name!r}") from None


def _require_tanh(activation):
    if activation.name != "tanh":
        raise ConfigurationError(f"activation {activation.name!r} not supported yet")


# ----------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------

def _frozen_array(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RnnParams:
    """Immutable network parameters.

    w_r is (n_r, n_r), w_in is (n_r, n_i), w_fb is (n_r, n_o).  The
    readout is linear (w_out of shape (n_o, n_r)) or absent (w_out is
    None), in which case w_fb must be all zero because the feedback
    argument would be undefined.
    """

    alpha: float
    w_r: np.ndarray
    w_in: np.ndarray
    w_fb: np.ndarray = None
    w_out: np.ndarray = None
    activation: Activation = TANH

    def __post_init__(self):
        object.__setattr__(self, "w_r", _frozen_array(self.w_r))
        object.__setattr__(self, "w_in", _frozen_array(self.w_in))
        if self.w_r.ndim != 2 or self.w_r.shape[0] != self.w_r.shape[1]:
            raise ConfigurationError(f"w_r must be square, got {self.w_r.shape}")
        n_r = self.w_r.shape[0]
        if self.w_in.ndim != 2 or self.w_in.shape[0] != n_r:
            raise ConfigurationError(
                f"w_in must be ({n_r}, n_i), got {self.w_in.shape}")
        if self.w_fb is None:
            object.__setattr__(self, "w_fb", _frozen_array(np.zeros((n_r, 0))))
        else:
            object.__setattr__(self, "w_fb", _frozen_array(self.w_fb))
        if self.w_fb.ndim != 2 or self.w_fb.shape[0] != n_r:
            raise ConfigurationError(
                f"w_fb must be ({n_r}, n_o), got {self.w_fb.shape}")
        n_o = self.w_fb.shape[1]
        if self.w_out is not None:
            object.__setattr__(self, "w_out", _frozen_array(self.w_out))
            if self.w_out.shape != (n_o, n_r):
                raise ConfigurationError(
                    f"w_out must be ({n_o}, {n_r}), got {self.w_out.shape}")
        elif np.any(self.w_fb != 0.0):
            raise ConfigurationError("w_fb must be all zero when there is no readout")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        for name in ("w_r", "w_in", "w_fb", "w_out"):
            a = getattr(self, name)
            if a is not None and not np.all(np.isfinite(a)):
                raise ConfigurationError(f"{name} contains non-finite entries")
        _require_tanh(self.activation)
        # effective recurrent matrix M = W_r + W_fb W_o (constant for a
        # linear readout); cached because certifiers query it repeatedly
        if self.readout == "linear":
            m = self.w_r + self.w_fb @ self.w_out
        else:
            m = self.w_r.copy()
        object.__setattr__(self, "_m", _frozen_array(m))

    # -- shape helpers -------------------------------------------------

    @property
    def n_r(self):
        return self.w_r.shape[0]

    @property
    def n_i(self):
        return self.w_in.shape[1]

    @property
    def n_o(self):
        return self.w_fb.shape[1]

    @property
    def readout(self):
        return "none" if self.w_out is None else "linear"

    @property
    def effective_matrix(self):
        """W_r + W_fb W_o, the matrix entering the state Jacobian."""
        return self._m

    # state space is the hypercube [-L, L]^{n_r}
    @property
    def state_dim(self):
        return self.n_r

    @property
    def state_bound(self):
        return self.activation.bound

    # -- serialization -------------------------------------------------

    def to_dict(self):
        doc = {
            "alpha": self.alpha,
            "activation": self.activation.name,
            "readout": self.readout,
            "n_r": self.n_r,
            "n_i": self.n_i,
            "n_o": self.n_o,
            "w_r": self.w_r.tolist(),
            "w_in": self.w_in.tolist(),
            "w_fb": self.w_fb.tolist(),
        }
        if self.w_out is not None:
            doc["w_out"] = self.w_out.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc):
        n_r = int(doc["n_r"])
        n_o = int(doc["n_o"])
        w_fb = np.asarray(doc["w_fb"], dtype=float).reshape(n_r, n_o)
        w_out = None
        if doc.get("readout", "none") == "linear":
            w_out = np.asarray(doc["w_out"], dtype=float).reshape(n_o, n_r)
        return cls(
            alpha=float(doc["alpha"]),
            w_r=np.asarray(doc["w_r"], dtype=float).reshape(n_r, n_r),
            w_in=np.asarray(doc["w_in"], dtype=float).reshape(n_r, int(doc["n_i"])),
            w_fb=w_fb,
            w_out=w_out,
            activation=get_activation(doc.get("activation", "tanh")),
        )


def save_params(params, path):
    Path(path).write_text(json.dumps(params.to_dict(), indent=1) + "\n")


def load_params(path):
    return RnnParams.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------
# the map and its Jacobian
# ----------------------------------------------------------------------

def _step_raw(params, u, x):
    # fixed evaluation order: W_r x, + W_in u, + W_fb psi(x)
    pre = params.w_r @ x
    pre = pre + params.w_in @ u
    if params.w_out is not None:
        pre = pre + params.w_fb @ (params.w_out @ x)
    return (1.0 - params.alpha) * x + params.alpha * np.tanh(pre)


def _check_uq(params, u, x):
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != (params.n_i,):
        raise ConfigurationError(f"input must have shape ({params.n_i},), got {u.shape}")
    if x.shape != (params.n_r,):
        raise ConfigurationError(f"state must have shape ({params.n_r},), got {x.shape}")
    return u, x


def step(params, u, x):
    """One application of the state-update map G(u, x)."""
    u, x = _check_uq(params, u, x)
    return _step_raw(params, u, x)


def step_batch(params, u, xs):
    """Apply the map to every row of xs (m, n_r) under one input value.

    Row results equal step() up to last-ulp BLAS variation; contracts
    that rely on bit-exact equality use the solo path instead.
    """
    u = np.asarray(u, dtype=float)
    xs = np.asarray(xs, dtype=float)
    pre = xs @ params.w_r.T
    pre = pre + params.w_in @ u
    if params.w_out is not None:
        pre = pre + (xs @ params.w_out.T) @ params.w_fb.T
    return (1.0 - params.alpha) * xs + params.alpha * np.tanh(pre)


def jacobian(params, u, x):
    """State Jacobian D_x G(u, x) = (1 - alpha) I + alpha S(u, x) M.

    M = W_r + W_fb W_o is the effective recurrent matrix and
    S = diag(phi'(xi_j)) with xi_j the j-th pre-activation; for tanh,
    phi'(xi) = 1 - tanh(xi)^2.
    """
    u, x = _check_uq(params, u, x)
    pre = params.w_r @ x
    pre = pre + params.w_in @ u
    if params.w_out is not None:
        pre = pre + params.w_fb @ (params.w_out @ x)
    s = 1.0 - np.tanh(pre) ** 2
    return (1.0 - params.alpha) * np.eye(params.n_r) + params.alpha * (
        s[:, None] * params.effective_matrix)


def jacobian_batch(params, u, xs):
    """Jacobians at every row of xs; returns (m, n_r, n_r)."""
    u = np.asarray(u, dtype=float)
    xs = np.asarray(xs, dtype=float)
    pre = xs @ params.w_r.T
    pre = pre + params.w_in @ u
    if params.w_out is not None:
        pre = pre + (xs @ params.w_out.T) @ params.w_fb.T
    s = 1.0 - np.tanh(pre) ** 2
    eye = (1.0 - params.alpha) * np.eye(params.n_r)
    return eye[None, :, :] + params.alpha * (
        s[:, :, None] * params.effective_matrix[None, :, :])


# ----------------------------------------------------------------------
# orbits
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Finite orbit segment; states[j] is the state at time anchor + j."""

    anchor: int
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen_array(self.states))

    @property
    def n_steps(self):
        return self.states.shape[0] - 1

    @property
    def final(self):
        return self.states[-1]

    def at(self, k):
        """State at absolute time index k."""
        j = k - self.anchor
        if not 0 <= j <= self.n_steps:
            raise IndexError(f"time {k} outside trajectory [{self.anchor}, "
                             f"{self.anchor + self.n_steps}]")
        return self.states[j]


def orbit(params, input_seq, x0, n, anchor=0):
    """Iterate the map n times from x0 anchored at time `anchor`.

    The step arriving at time k consumes input value u[k], so the input
    window must cover [anchor + 1, anchor + n].  Underflow raises the
    sequence's window-exhausted error; there is no silent padding.

    Returns
    -------
    Trajectory
        states[j] is the state at time anchor + j, j = 0..n.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.n_r,):
        raise ConfigurationError(f"x0 must have shape ({params.n_r},), got {x0.shape}")
    if n < 0:
        raise ConfigurationError("n must be nonnegative")
    if n > 0:
        input_seq.require_window(anchor + 1, anchor + n)
    states = np.empty((n + 1, params.n_r))
    states[0] = x0
    x = x0
    for j in range(1, n + 1):
        x = _step_raw(params, input_seq.at(anchor + j), x)
        states[j] = x
    return Trajectory(anchor=anchor, states=states)


def spectral_norm(mat):
    """Largest singular value (induced 2-norm), relative accuracy 1e-10."""
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ConfigurationError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError("matrix contains non-finite entries")
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])

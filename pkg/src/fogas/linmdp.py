"""Linear MDP data types, a synthetic generator, and softmax policy machinery.

The environment is the tuple (X, A, Phi, Psi, omega, gamma, x0) where the
transition kernel factorizes as p(x'|x,a) = <phi(x,a), psi(x')> and the reward
is r(x,a) = <phi(x,a), omega>. The tabular P and r are derived on demand and
cached; all types are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Structural tolerances. Identities that hold by pure algebra get the tight
# values; quantities touched by a linear solve get the looser ones.
ROW_NONNEG_TOL = 1e-10
ROW_SUM_TOL = 1e-8
REWARD_TOL = 1e-10
OMEGA_NORM_TOL = 1e-8
RANK_TOL = 1e-8
PROB_ROW_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LinearMdp:
    """A finite linear MDP with a fixed initial state.

    ``phi`` has one row per state-action pair in state-major order, so row
    ``x * num_actions + a`` is the feature vector of (x, a). ``psi`` holds one
    column per state. The initial-state distribution is the delta at ``x0``.
    """

    num_states: int
    num_actions: int
    dim: int
    phi: np.ndarray  # (X*A, d)
    psi: np.ndarray  # (d, X)
    omega: np.ndarray  # (d,)
    gamma: float
    x0: int
    feature_bound: float = field(init=False, default=0.0)

    def __post_init__(self):
        X, A, d = self.num_states, self.num_actions, self.dim
        if X < 1 or A < 1 or d < 1:
            raise ValueError("num_states, num_actions and dim must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 <= self.x0 < X:
            raise ValueError(f"x0 must be a state index in [0, {X}), got {self.x0}")
        phi = _readonly(self.phi)
        psi = _readonly(self.psi)
        omega = _readonly(self.omega)
        if phi.shape != (X * A, d):
            raise ValueError(f"phi must have shape ({X * A}, {d}), got {phi.shape}")
        if psi.shape != (d, X):
            raise ValueError(f"psi must have shape ({d}, {X}), got {psi.shape}")
        if omega.shape != (d,):
            raise ValueError(f"omega must have shape ({d},), got {omega.shape}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(
            self, "feature_bound", float(np.linalg.norm(phi, axis=1).max())
        )

    @cached_property
    def transition_matrix(self) -> np.ndarray:
        """Derived tabular kernel P, shape (X*A, X)."""
        return _readonly(self.phi @ self.psi)

    @cached_property
    def rewards(self) -> np.ndarray:
        """Derived tabular reward vector r, shape (X*A,)."""
        return _readonly(self.phi @ self.omega)

    @cached_property
    def nu0(self) -> np.ndarray:
        out = np.zeros(self.num_states)
        out[self.x0] = 1.0
        return _readonly(out)

    def sa_index(self, x: int, a: int) -> int:
        return x * self.num_actions + a

    def state_features(self, x: int) -> np.ndarray:
        """All action feature vectors of state x, shape (A, d)."""
        return self.phi[x * self.num_actions : (x + 1) * self.num_actions]

    @property
    def phi_by_state(self) -> np.ndarray:
        """phi reshaped to (X, A, d)."""
        return self.phi.reshape(self.num_states, self.num_actions, self.dim)


def validate_linear_mdp(mdp: LinearMdp) -> list[str]:
    """Check all structural invariants; return one message per violation.

    An empty list means the MDP satisfies the linear-MDP definition within the
    stated tolerances.
    """
    report: list[str] = []
    X, A, d = mdp.num_states, mdp.num_actions, mdp.dim
    P = mdp.phi @ mdp.psi

    min_entries = P.min(axis=1)
    for idx in np.flatnonzero(min_entries < -ROW_NONNEG_TOL):
        x, a = divmod(int(idx), A)
        report.append(
            f"row-nonneg violation at (x={x}, a={a}): min entry {min_entries[idx]:.3e}"
        )
    row_sums = P.sum(axis=1)
    for idx in np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        x, a = divmod(int(idx), A)
        report.append(
            f"row-sum violation at (x={x}, a={a}): sum {row_sums[idx]:.12g}"
        )

    r = mdp.phi @ mdp.omega
    bad = (r < -REWARD_TOL) | (r > 1.0 + REWARD_TOL)
    for idx in np.flatnonzero(bad):
        x, a = divmod(int(idx), A)
        report.append(f"reward-range violation at (x={x}, a={a}): r = {r[idx]:.12g}")

    omega_norm = float(np.linalg.norm(mdp.omega))
    if omega_norm > np.sqrt(d) + OMEGA_NORM_TOL:
        report.append(
            f"omega-norm violation: ||omega|| = {omega_norm:.12g} > sqrt(d) = {np.sqrt(d):.12g}"
        )

    sv = np.linalg.svd(mdp.phi, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        report.append(
            f"rank violation: smallest/largest singular value = {sv[-1] / sv[0]:.3e}"
        )
    return report


def generate_linear_mdp(
    num_states: int, num_actions: int, dim: int, gamma: float, seed: int
) -> LinearMdp:
    """Draw a random linear MDP that satisfies the definition by construction.

    Columns of Psi stack d anchor next-state distributions, and each phi(x,a)
    is drawn from the d-simplex, so every p(.|x,a) is a convex mixture of the
    anchors and hence a distribution. Rewards use omega uniform in [0,1]^d so
    <phi, omega> lands in [0,1] and ||omega|| <= sqrt(d). Feature norms are at
    most 1 under this construction; the actual maximum is recorded.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if dim > num_states * num_actions:
        raise ValueError(
            f"dim ({dim}) must not exceed num_states*num_actions ({num_states * num_actions})"
        )
    rng = np.random.default_rng(seed)
    psi = rng.dirichlet(np.ones(num_states), size=dim)  # (d, X), rows are anchors
    phi = rng.dirichlet(np.ones(dim), size=num_states * num_actions)
    omega = rng.uniform(0.0, 1.0, size=dim)
    return LinearMdp(
        num_states=num_states,
        num_actions=num_actions,
        dim=dim,
        phi=phi,
        psi=psi,
        omega=omega,
        gamma=gamma,
        x0=0,
    )


@dataclass(frozen=True)
class TabularPolicy:
    """Explicit action distributions, one row per state."""

    probs: np.ndarray  # (X, A)

    def __post_init__(self):
        probs = _readonly(self.probs)
        if probs.ndim != 2:
            raise ValueError(f"probs must be 2-d, got shape {probs.shape}")
        if probs.min() < -PROB_ROW_TOL:
            raise ValueError("policy rows must be nonnegative")
        if np.abs(probs.sum(axis=1) - 1.0).max() > PROB_ROW_TOL:
            raise ValueError("policy rows must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    def table(self) -> "TabularPolicy":
        return self


def uniform_policy(num_states: int, num_actions: int) -> TabularPolicy:
    return TabularPolicy(np.full((num_states, num_actions), 1.0 / num_actions))


def _stable_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class SoftmaxPolicy:
    """Softmax policy with logits <phi(x,a), scale_times_param>.

    ``scale_times_param`` is the product of the mirror-ascent step size and
    the cumulative value-parameter sum, so the policy is fully specified by a
    single d-vector. Materialization subtracts the per-state maximum logit
    before exponentiating, so parameters with norm up to ~1e6 are safe.
    """

    phi: np.ndarray  # (X*A, d)
    num_states: int
    num_actions: int
    scale_times_param: np.ndarray  # (d,)

    def __post_init__(self):
        param = _readonly(self.scale_times_param)
        if not np.all(np.isfinite(param)):
            raise ValueError("scale_times_param must be finite")
        if param.shape != (self.phi.shape[1],):
            raise ValueError(
                f"scale_times_param must have shape ({self.phi.shape[1]},), got {param.shape}"
            )
        object.__setattr__(self, "phi", _readonly(self.phi))
        object.__setattr__(self, "scale_times_param", param)

    def logits(self) -> np.ndarray:
        return (self.phi @ self.scale_times_param).reshape(
            self.num_states, self.num_actions
        )

    def table(self) -> TabularPolicy:
        return TabularPolicy(_stable_softmax_rows(self.logits()))

    def probs_at(self, x: int) -> np.ndarray:
        row = self.phi[
            x * self.num_actions : (x + 1) * self.num_actions
        ] @ self.scale_times_param
        return _stable_softmax_rows(row)


def softmax_from_logit_param(mdp: LinearMdp, scaled_param: np.ndarray) -> SoftmaxPolicy:
    """Build the softmax policy pi(a|x) proportional to exp(<phi(x,a), scaled_param>)."""
    scaled_param = np.asarray(scaled_param, dtype=np.float64)
    if not np.all(np.isfinite(scaled_param)):
        raise ValueError("scaled_param must be finite")
    return SoftmaxPolicy(
        phi=mdp.phi,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        scale_times_param=scaled_param,
    )


def policy_update_step(
    prev: SoftmaxPolicy, theta_t: np.ndarray, alpha: float
) -> SoftmaxPolicy:
    """One entropy-regularized mirror ascent step in cumulative-parameter form.

    Adds alpha * theta_t to the stored parameter; the materialized table is
    identical to the one-step multiplicative update
    pi'(a|x) proportional to pi(a|x) * exp(alpha * <phi(x,a), theta_t>).
    """
    return SoftmaxPolicy(
        phi=prev.phi,
        num_states=prev.num_states,
        num_actions=prev.num_actions,
        scale_times_param=prev.scale_times_param + alpha * np.asarray(theta_t),
    )


def save_mdp(mdp: LinearMdp, path) -> None:
    """Write the MDP as a JSON document; floats round-trip exactly."""
    doc = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "dim": mdp.dim,
        "gamma": mdp.gamma,
        "x0": mdp.x0,
        "phi": mdp.phi.tolist(),
        "psi": mdp.psi.tolist(),
        "omega": mdp.omega.tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_mdp(path) -> LinearMdp:
    with open(path) as f:
        doc = json.load(f)
    return LinearMdp(
        num_states=int(doc["num_states"]),
        num_actions=int(doc["num_actions"]),
        dim=int(doc["dim"]),
        phi=np.array(doc["phi"], dtype=np.float64),
        psi=np.array(doc["psi"], dtype=np.float64),
        omega=np.array(doc["omega"], dtype=np.float64),
        gamma=float(doc["gamma"]),
        x0=int(doc["x0"]),
    )

"""Offline transition datasets, empirical feature covariance, and the
regularized least-squares transition estimator.

The estimator aggregates transitions by next state before solving, so building
it costs at most min(n, X) SPD solves; applying it to a value vector only ever
reads the observed next states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .linmdp import LinearMdp, _readonly
from .oracle import evaluate_policy


@dataclass(frozen=True)
class Transition:
    x: int
    a: int
    r: float
    x_next: int


@dataclass(frozen=True)
class OfflineDataset:
    """n sample transitions plus the feature rows of the sampled pairs."""

    xs: np.ndarray  # (n,) int
    actions: np.ndarray  # (n,) int
    rewards: np.ndarray  # (n,)
    x_nexts: np.ndarray  # (n,) int
    features: np.ndarray  # (n, d), row i = phi(X_i, A_i)
    num_states: int
    num_actions: int

    def __post_init__(self):
        n = len(self.xs)
        if n < 1:
            raise ValueError("dataset must contain at least one transition")
        for name in ("xs", "actions", "x_nexts"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.int64))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "rewards", _readonly(self.rewards))
        object.__setattr__(self, "features", _readonly(self.features))
        if not (
            len(self.actions) == len(self.rewards) == len(self.x_nexts) == n
            and self.features.shape[0] == n
        ):
            raise ValueError("all dataset columns must have the same length")
        if self.xs.min() < 0 or self.xs.max() >= self.num_states:
            raise ValueError("state index out of range")
        if self.x_nexts.min() < 0 or self.x_nexts.max() >= self.num_states:
            raise ValueError("next-state index out of range")
        if self.actions.min() < 0 or self.actions.max() >= self.num_actions:
            raise ValueError("action index out of range")

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def transitions(self) -> list[Transition]:
        return [
            Transition(int(x), int(a), float(r), int(xn))
            for x, a, r, xn in zip(self.xs, self.actions, self.rewards, self.x_nexts)
        ]

    @cached_property
    def next_state_groups(self):
        """(unique observed next states, per-sample position, summed features).

        ``summed_features`` column j is the sum of phi_i over samples whose
        next state is ``observed_states[j]``.
        """
        observed, inverse = np.unique(self.x_nexts, return_inverse=True)
        summed = np.zeros((self.dim, len(observed)))
        np.add.at(summed.T, inverse, self.features)
        return observed, inverse, _readonly(summed)


@dataclass(frozen=True)
class Covariance:
    """Ridge-regularized empirical feature covariance with a cached SPD factor."""

    beta: float
    lambda_mat: np.ndarray  # (d, d)
    n: int

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        mat = _readonly(self.lambda_mat)
        if np.abs(mat - mat.T).max() > 1e-12:
            raise ValueError("covariance matrix must be symmetric")
        object.__setattr__(self, "lambda_mat", mat)

    @cached_property
    def _factor(self):
        try:
            return scipy.linalg.cho_factor(self.lambda_mat)
        except np.linalg.LinAlgError as e:
            raise ValueError("covariance must be positive definite") from e

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Return Lambda^{-1} rhs via the cached Cholesky factorization."""
        return scipy.linalg.cho_solve(self._factor, np.asarray(rhs, dtype=np.float64))

    def weighted_sq_norm(self, vec: np.ndarray) -> float:
        """||vec||^2 in the Lambda^{-1} norm."""
        vec = np.asarray(vec, dtype=np.float64)
        return float(vec @ self.solve(vec))


def build_covariance(dataset: OfflineDataset, beta: float) -> Covariance:
    """Lambda = beta*I + (1/n) sum_i phi_i phi_i^T."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    n, d = dataset.features.shape
    mat = beta * np.eye(d) + (dataset.features.T @ dataset.features) / n
    mat = 0.5 * (mat + mat.T)  # kill roundoff asymmetry from the BLAS product
    return Covariance(beta=beta, lambda_mat=mat, n=n)


@dataclass(frozen=True)
class PsiHat:
    """Sparse column representation of the least-squares transition estimate.

    Only next states that actually appear in the data carry a nonzero column;
    ``columns[:, j]`` is the estimated psi-hat of ``observed_states[j]``.
    """

    num_states: int
    observed_states: np.ndarray  # (k,) int, sorted
    columns: np.ndarray  # (d, k)
    covariance: Covariance

    def __post_init__(self):
        object.__setattr__(self, "columns", _readonly(self.columns))

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.num_states))
        out[:, self.observed_states] = self.columns
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Psi-hat @ v, reading v only at observed next states."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.num_states,):
            raise ValueError(f"v must have shape ({self.num_states},), got {v.shape}")
        return self.columns @ v[self.observed_states]


def estimate_psi(dataset: OfflineDataset, beta: float) -> PsiHat:
    """Ridge least-squares estimate (1/n) Lambda^{-1} sum_i phi_i e_{X'_i}^T.

    One SPD solve against the aggregated multi-column right-hand side; columns
    for unobserved next states are identically zero.
    """
    cov = build_covariance(dataset, beta)
    observed, _, summed = dataset.next_state_groups
    columns = cov.solve(summed) / len(dataset)
    return PsiHat(
        num_states=dataset.num_states,
        observed_states=observed,
        columns=columns,
        covariance=cov,
    )


def apply_psi_hat(psi_hat: PsiHat, v: np.ndarray) -> np.ndarray:
    """(1/n) Lambda^{-1} sum_i phi_i v(X'_i); linear in v, O(n) at most."""
    return psi_hat.apply(v)


def collect_dataset(
    mdp: LinearMdp, behavior, n: int, sampling_mode: str, seed: int
) -> OfflineDataset:
    """Sample n transitions with X' ~ p(.|X, A) and R = r(X, A).

    ``sampling_mode`` selects how the pairs (X_i, A_i) are drawn: "occupancy"
    draws them i.i.d. from the exact discounted occupancy of the behavior
    policy (via the tabular oracle), "uniform" draws them uniformly over the
    state-action space.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    X, A = mdp.num_states, mdp.num_actions
    rng = np.random.default_rng(seed)
    if sampling_mode == "occupancy":
        mu = evaluate_policy(mdp, behavior).mu
        mu = np.clip(mu, 0.0, None)
        sa = rng.choice(X * A, size=n, p=mu / mu.sum())
    elif sampling_mode == "uniform":
        sa = rng.integers(0, X * A, size=n)
    else:
        raise ValueError(f"unknown sampling_mode {sampling_mode!r}")

    rows = mdp.transition_matrix[sa]  # (n, X)
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(n)
    x_next = (u[:, None] < cdf).argmax(axis=1)
    return OfflineDataset(
        xs=sa // A,
        actions=sa % A,
        rewards=mdp.rewards[sa],
        x_nexts=x_next,
        features=mdp.phi[sa],
        num_states=X,
        num_actions=A,
    )


def save_dataset(dataset: OfflineDataset, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "a", "r", "x_next"])
        for x, a, r, xn in zip(
            dataset.xs, dataset.actions, dataset.rewards, dataset.x_nexts
        ):
            writer.writerow([int(x), int(a), repr(float(r)), int(xn)])


def load_dataset(path, mdp: LinearMdp) -> OfflineDataset:
    xs, actions, rewards, x_nexts = [], [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["x", "a", "r", "x_next"]:
            raise ValueError(f"unexpected dataset header {header!r}")
        for row in reader:
            xs.append(int(row[0]))
            actions.append(int(row[1]))
            rewards.append(float(row[2]))
            x_nexts.append(int(row[3]))
    xs = np.array(xs, dtype=np.int64)
    actions = np.array(actions, dtype=np.int64)
    sa = xs * mdp.num_actions + actions
    return OfflineDataset(
        xs=xs,
        actions=actions,
        rewards=np.array(rewards),
        x_nexts=np.array(x_nexts, dtype=np.int64),
        features=mdp.phi[sa],
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
    )

"""Feature-occupancy gradient ascent (FOGAS).

Per iteration: the value-parameter player best-responds over a Euclidean ball,
the policy takes an entropy-regularized mirror ascent step stored in
cumulative-parameter form, and the feature occupancy takes a stabilized,
covariance-preconditioned ascent step. The solver only ever evaluates policies
and value functions at the initial state and the observed next states;
everything over the full state space lives in the oracle and diagnostics.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .data import Covariance, OfflineDataset, PsiHat, build_covariance
from .linmdp import LinearMdp, SoftmaxPolicy, _readonly, _stable_softmax_rows

BEST_RESPONSE_TIE_TOL = 1e-14


@dataclass(frozen=True)
class FogasConfig:
    """Solver hyperparameters.

    With ``auto_tune`` set, any rate left as None is filled from the
    theoretical schedule (which needs the MDP features and the sample count;
    see ``resolved``). Explicitly set values always win, which is how the
    stabilization ablation (rho=0) is run.
    """

    T: int
    seed: int = 0
    auto_tune: bool = False
    delta: float = 0.05
    alpha: float | None = None
    rho: float | None = None
    eta: float | None = None
    beta: float | None = None
    d_theta: float | None = None
    record_trajectory: bool = False
    check_gradient_bound: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        for name in ("alpha", "eta", "beta", "d_theta"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be >= 0")

    @property
    def is_resolved(self) -> bool:
        return None not in (self.alpha, self.rho, self.eta, self.beta, self.d_theta)

    def resolved(self, mdp: LinearMdp, n: int) -> "FogasConfig":
        """Fill unset rates from the theoretical schedule (auto_tune only)."""
        if self.is_resolved:
            return self
        if not self.auto_tune:
            raise ValueError(
                "all of alpha, rho, eta, beta, d_theta must be set unless auto_tune"
            )
        rates = theoretical_rates(mdp, n=n, T=self.T, delta=self.delta)
        t_min = theoretical_min_iterations(mdp, n=n, delta=self.delta)
        if self.T < t_min:
            warnings.warn(
                f"auto-tuned run with T={self.T} below the theoretical minimum "
                f"{t_min:.0f}; proceeding anyway",
                stacklevel=2,
            )
        updates = {k: v for k, v in rates.items() if getattr(self, k) is None}
        return replace(self, **updates)


def theoretical_rates(mdp: LinearMdp, n: int, T: int, delta: float) -> dict:
    """The full hyperparameter schedule as a dict of concrete rates."""
    d = mdp.dim
    gamma = mdp.gamma
    R = mdp.feature_bound
    A = mdp.num_actions
    log_A = np.log(A) if A > 1 else 1.0  # degenerate single-action case
    return {
        "d_theta": np.sqrt(d) / (1.0 - gamma),
        "beta": R**2 / (d * T),
        "alpha": float(np.sqrt(2.0 * (1.0 - gamma) ** 2 * log_A / (R**2 * d * T))),
        "rho": float(
            gamma
            * np.sqrt(320.0 * d**2 * np.log(2.0 * T / delta) / ((1.0 - gamma) ** 2 * n))
        ),
        "eta": float(np.sqrt((1.0 - gamma) ** 2 / (27.0 * R**2 * d**2 * T))),
    }


def theoretical_min_iterations(mdp: LinearMdp, n: int, delta: float) -> float:
    """Minimum iteration count the analysis asks for: 2 R^2 n ln(A) / ln(1/delta)."""
    log_A = np.log(mdp.num_actions) if mdp.num_actions > 1 else 1.0
    return 2.0 * mdp.feature_bound**2 * n * log_A / np.log(1.0 / delta)


def gradient_norm_bound(config: FogasConfig, mdp: LinearMdp) -> float:
    """Deterministic upper bound on ||Lambda g||^2 in the Lambda^{-1} norm."""
    d, R, gamma = mdp.dim, mdp.feature_bound, mdp.gamma
    D = config.d_theta
    return (
        6.0 * config.beta * (d + D**2)
        + 3.0 * d * (1.0 + R * D) ** 2
        + 3.0 * gamma**2 * d * R**2 * D**2
    )


@dataclass(frozen=True)
class FogasTrajectory:
    """Per-iteration record of a run; index t-1 holds iteration t's quantities.

    ``theta_bars[t-1]`` is the cumulative parameter after iteration t, so the
    policy in force at iteration t+1 is sigma(alpha * Phi @ theta_bars[t-1]);
    iteration 1 runs the uniform policy (cumulative parameter zero).
    """

    lambdas: np.ndarray  # (T, d), lambda_1..lambda_T
    thetas: np.ndarray  # (T, d)
    theta_bars: np.ndarray  # (T, d), theta_bar_1..theta_bar_T
    phi_mu_hats: np.ndarray  # (T, d)
    g_lambdas: np.ndarray  # (T, d)
    grad_sq_norms: np.ndarray  # (T,), g^T Lambda g per iteration

    def policy_param(self, t: int, alpha: float) -> np.ndarray:
        """alpha * theta_bar_{t-1}, the softmax parameter of iterate pi_t."""
        if not 1 <= t <= len(self.thetas):
            raise ValueError(f"iteration index must lie in [1, {len(self.thetas)}]")
        if t == 1:
            return np.zeros(self.thetas.shape[1])
        return alpha * self.theta_bars[t - 2]


@dataclass(frozen=True)
class FogasRun:
    config: FogasConfig  # fully resolved
    chosen_index: int  # J in {1..T}
    lambda_final: np.ndarray
    theta_bar_final: np.ndarray
    output_param: np.ndarray  # alpha * theta_bar_{J-1}
    output_policy: SoftmaxPolicy
    trajectory: FogasTrajectory | None


def best_response_theta(g: np.ndarray, d_theta: float) -> np.ndarray:
    """Minimizer of <theta, g> over the ball of radius d_theta.

    Returns the origin on a tie (g numerically zero), which leaves the
    cumulative policy parameter, and hence the policy, unchanged.
    """
    g = np.asarray(g, dtype=np.float64)
    norm = np.linalg.norm(g)
    if norm <= BEST_RESPONSE_TIE_TOL:
        return np.zeros_like(g)
    return -d_theta * g / norm


def mu_hat_features(
    mdp: LinearMdp,
    dataset: OfflineDataset,
    cov: Covariance,
    policy,
    lam: np.ndarray,
) -> np.ndarray:
    """Feature expectation of the estimated occupancy mu-hat at (lambda, pi).

    Equals (1-gamma) * sum_a pi(a|x0) phi(x0,a)
    + (gamma/n) * sum_i sum_a pi(a|X'_i) phi(X'_i,a) <phi_i, Lambda^{-1} lambda>.
    """
    lam = np.asarray(lam, dtype=np.float64)
    gamma = mdp.gamma
    probs_x0 = _policy_probs_at(policy, mdp, mdp.x0)
    first = (1.0 - gamma) * probs_x0 @ mdp.state_features(mdp.x0)

    observed, _, summed = dataset.next_state_groups
    bar_phi = _mean_features_under_policy(mdp, policy, observed)  # (k, d)
    w = cov.solve(lam)
    weights = summed.T @ w  # (k,), sum over samples grouped by next state
    return first + (gamma / len(dataset)) * bar_phi.T @ weights


def lambda_gradient(
    omega: np.ndarray,
    psi_hat: PsiHat,
    v_theta_pi: np.ndarray,
    theta: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """omega + gamma * PsiHat v - theta, the ascent direction for lambda."""
    return np.asarray(omega) + gamma * psi_hat.apply(v_theta_pi) - np.asarray(theta)


def lambda_update(
    lambda_t: np.ndarray, g: np.ndarray, cov: Covariance, eta: float, rho: float
) -> np.ndarray:
    """Closed form of the stabilized, preconditioned mirror ascent step.

    Exact argmax of <lambda, g> - ||lambda - lambda_t||^2_{Lambda^{-1}}/(2 eta)
    - rho/2 * ||lambda||^2_{Lambda^{-1}}.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    lambda_t = np.asarray(lambda_t, dtype=np.float64)
    return (lambda_t + eta * cov.lambda_mat @ np.asarray(g)) / (1.0 + rho * eta)


def _policy_probs_at(policy, mdp: LinearMdp, x: int) -> np.ndarray:
    if isinstance(policy, SoftmaxPolicy):
        return policy.probs_at(x)
    return policy.table().probs[x]


def _mean_features_under_policy(mdp, policy, states) -> np.ndarray:
    """sum_a pi(a|x) phi(x,a) for each state in ``states``; shape (k, d)."""
    phi_states = mdp.phi_by_state[states]  # (k, A, d)
    if isinstance(policy, SoftmaxPolicy):
        logits = np.einsum("kad,d->ka", phi_states, policy.scale_times_param)
        probs = _stable_softmax_rows(logits)
    else:
        probs = policy.table().probs[states]
    return np.einsum("ka,kad->kd", probs, phi_states)


def run_fogas(mdp: LinearMdp, dataset: OfflineDataset, config: FogasConfig) -> FogasRun:
    """Run the full ascent loop and return the randomized-index output policy.

    The returned policy is the iterate in force at the drawn iteration J, i.e.
    the softmax of alpha times the cumulative parameter after J-1 updates.
    """
    cfg = config.resolved(mdp, len(dataset))
    T, d = cfg.T, mdp.dim
    gamma = mdp.gamma
    n = len(dataset)

    cov = build_covariance(dataset, cfg.beta)
    observed, _, summed = dataset.next_state_groups  # summed: (d, k)
    phi_obs = mdp.phi_by_state[observed]  # (k, A, d)
    phi_x0 = mdp.state_features(mdp.x0)  # (A, d)
    grad_bound = gradient_norm_bound(cfg, mdp) + 1e-8

    J = int(np.random.default_rng(cfg.seed).integers(1, T + 1))

    lam = np.zeros(d)
    theta_bar = np.zeros(d)
    output_param = None
    traj_lambdas = np.empty((T, d)) if cfg.record_trajectory else None
    traj_thetas = np.empty((T, d)) if cfg.record_trajectory else None
    traj_theta_bars = np.empty((T, d)) if cfg.record_trajectory else None
    traj_phimu = np.empty((T, d)) if cfg.record_trajectory else None
    traj_g = np.empty((T, d)) if cfg.record_trajectory else None
    traj_gnorm = np.empty(T) if cfg.record_trajectory else None

    for t in range(1, T + 1):
        if t == J:
            output_param = cfg.alpha * theta_bar

        # Policy in force at iteration t, evaluated only where needed.
        scaled = cfg.alpha * theta_bar
        probs_x0 = _stable_softmax_rows(phi_x0 @ scaled)
        probs_obs = _stable_softmax_rows(np.einsum("kad,d->ka", phi_obs, scaled))
        bar_phi = np.einsum("ka,kad->kd", probs_obs, phi_obs)  # (k, d)

        # Value-parameter step: best response to the estimated feature occupancy.
        w = cov.solve(lam)
        phimu = (1.0 - gamma) * probs_x0 @ phi_x0 \
            + (gamma / n) * bar_phi.T @ (summed.T @ w)
        theta = best_response_theta(phimu - lam, cfg.d_theta)

        # Policy step in cumulative form.
        theta_bar = theta_bar + theta

        # Feature-occupancy step.
        v_obs = bar_phi @ theta  # v_{theta_t, pi_t} at observed next states
        psi_hat_v = cov.solve(summed @ v_obs) / n
        g = mdp.omega + gamma * psi_hat_v - theta
        grad_sq = float(g @ (cov.lambda_mat @ g))
        if cfg.check_gradient_bound and grad_sq > grad_bound:
            raise AssertionError(
                f"gradient norm bound violated at iteration {t}: "
                f"{grad_sq:.6g} > {grad_bound:.6g}"
            )
        lam_next = (lam + cfg.eta * cov.lambda_mat @ g) / (1.0 + cfg.rho * cfg.eta)

        if not (
            np.all(np.isfinite(lam_next))
            and np.all(np.isfinite(theta_bar))
            and np.all(np.isfinite(g))
        ):
            raise FloatingPointError(
                f"non-finite iterate at iteration {t} "
                f"(lambda finite: {bool(np.all(np.isfinite(lam_next)))}, "
                f"theta_bar finite: {bool(np.all(np.isfinite(theta_bar)))}, "
                f"gradient finite: {bool(np.all(np.isfinite(g)))})"
            )

        if cfg.record_trajectory:
            traj_lambdas[t - 1] = lam
            traj_thetas[t - 1] = theta
            traj_theta_bars[t - 1] = theta_bar
            traj_phimu[t - 1] = phimu
            traj_g[t - 1] = g
            traj_gnorm[t - 1] = grad_sq
        lam = lam_next

    trajectory = None
    if cfg.record_trajectory:
        trajectory = FogasTrajectory(
            lambdas=_readonly(traj_lambdas),
            thetas=_readonly(traj_thetas),
            theta_bars=_readonly(traj_theta_bars),
            phi_mu_hats=_readonly(traj_phimu),
            g_lambdas=_readonly(traj_g),
            grad_sq_norms=_readonly(traj_gnorm),
        )
    output_policy = SoftmaxPolicy(
        phi=mdp.phi,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        scale_times_param=output_param,
    )
    return FogasRun(
        config=cfg,
        chosen_index=J,
        lambda_final=_readonly(lam),
        theta_bar_final=_readonly(theta_bar),
        output_param=_readonly(output_param),
        output_policy=output_policy,
        trajectory=trajectory,
    )


def save_run(run: FogasRun, path) -> None:
    """Serialize a run (config echo, J, output parameter, optional trajectory)."""
    doc = {
        "config": asdict(run.config),
        "chosen_index": run.chosen_index,
        "lambda_final": run.lambda_final.tolist(),
        "theta_bar_final": run.theta_bar_final.tolist(),
        "output_param": run.output_param.tolist(),
    }
    if run.trajectory is not None:
        doc["trajectory"] = {
            "lambdas": run.trajectory.lambdas.tolist(),
            "thetas": run.trajectory.thetas.tolist(),
            "theta_bars": run.trajectory.theta_bars.tolist(),
            "phi_mu_hats": run.trajectory.phi_mu_hats.tolist(),
            "g_lambdas": run.trajectory.g_lambdas.tolist(),
            "grad_sq_norms": run.trajectory.grad_sq_norms.tolist(),
        }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_run(path, mdp: LinearMdp) -> FogasRun:
    with open(path) as f:
        doc = json.load(f)
    cfg = FogasConfig(**doc["config"])
    trajectory = None
    if "trajectory" in doc:
        tr = doc["trajectory"]
        trajectory = FogasTrajectory(
            lambdas=_readonly(np.array(tr["lambdas"])),
            thetas=_readonly(np.array(tr["thetas"])),
            theta_bars=_readonly(np.array(tr["theta_bars"])),
            phi_mu_hats=_readonly(np.array(tr["phi_mu_hats"])),
            g_lambdas=_readonly(np.array(tr["g_lambdas"])),
            grad_sq_norms=_readonly(np.array(tr["grad_sq_norms"])),
        )
    output_param = np.array(doc["output_param"])
    return FogasRun(
        config=cfg,
        chosen_index=int(doc["chosen_index"]),
        lambda_final=_readonly(np.array(doc["lambda_final"])),
        theta_bar_final=_readonly(np.array(doc["theta_bar_final"])),
        output_param=_readonly(output_param),
        output_policy=SoftmaxPolicy(
            phi=mdp.phi,
            num_states=mdp.num_states,
            num_actions=mdp.num_actions,
            scale_times_param=output_param,
        ),
        trajectory=trajectory,
    )

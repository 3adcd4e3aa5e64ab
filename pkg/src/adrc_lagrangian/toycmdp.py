"""Tabular constrained MDP and a penalized REINFORCE trainer.

The trainer maximizes the rescaled Lagrangian ``(J - lam J_c) / (1 + lam)``
with likelihood-ratio gradients; the multiplier is updated once per epoch
from the sampled cost return by any :class:`~.controller.ControllerConfig`.

Instance files are plain text, one directive per line (``#`` starts a
comment)::

    states 6
    actions 2
    gamma 0.9
    d 25
    mu 1 0 0 0 0 0
    T <s> <a> <s'> <prob>     # transition entries; each (s, a) row must sum to 1
    R <s> <a> <reward>        # omitted entries are 0
    C <s> <a> <cost>          # omitted entries are 0; costs must be >= 0
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TextIO

import numpy as np

from .controller import ControllerConfig, ControllerMode, initial_state, update_lambda
from .errors import ConfigError, DivergenceError, ParameterError
from .metrics import EpisodeCosts
from .reference import ReferenceParams, make_reference

__all__ = [
    "TabularCmdp",
    "SoftmaxPolicy",
    "load_cmdp",
    "parse_cmdp",
    "reference_instance",
    "exact_returns",
    "sample_episodes",
    "TrainingLog",
    "train",
    "LOGIT_LIMIT",
]

LOGIT_LIMIT = 50.0
_TRUNCATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class TabularCmdp:
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray  # (S, A)
    cost: np.ndarray  # (S, A)
    mu: np.ndarray  # (S,)
    gamma: float
    d: float
    name: str = "cmdp"

    def __post_init__(self) -> None:
        P = np.asarray(self.transition, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ParameterError("transition must have shape (S, A, S)")
        S, A, _ = P.shape
        R = np.asarray(self.reward, dtype=float)
        C = np.asarray(self.cost, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if R.shape != (S, A) or C.shape != (S, A) or mu.shape != (S,):
            raise ParameterError("reward/cost must be (S, A) and mu must be (S,)")
        if np.any(P < 0.0) or np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-12):
            raise ParameterError("transition rows must be distributions summing to 1")
        if np.any(C < 0.0):
            raise ParameterError("costs must be >= 0")
        if np.any(mu < 0.0) or abs(mu.sum() - 1.0) > 1e-12:
            raise ParameterError("mu must be a distribution")
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError("gamma must lie in (0, 1)")
        for name, arr in (("transition", P), ("reward", R), ("cost", C), ("mu", mu)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def cost_bound(self) -> float:
        """``B_c = max cost / (1 - gamma)``."""
        return float(self.cost.max()) / (1.0 - self.gamma)

    @property
    def truncation_horizon(self) -> int:
        """Smallest ``T`` with ``gamma^T * max(B_c, B_r) < 1e-6``."""
        scale = max(self.cost_bound, float(np.abs(self.reward).max()) / (1.0 - self.gamma), 1.0)
        return int(math.ceil(math.log(_TRUNCATION_TOL / scale) / math.log(self.gamma))) + 1


def parse_cmdp(text: str, name: str = "cmdp") -> TabularCmdp:
    header: dict[str, str] = {}
    entries: list[tuple[str, list[str], int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key in ("T", "R", "C"):
            entries.append((key, rest, lineno))
        elif key in ("states", "actions", "gamma", "d", "mu", "name"):
            header[key] = " ".join(rest)
        else:
            raise ConfigError(f"line {lineno}: unknown directive {key!r}")
    for key in ("states", "actions", "gamma", "d", "mu"):
        if key not in header:
            raise ConfigError(f"missing directive {key!r}")
    try:
        S, A = int(header["states"]), int(header["actions"])
        gamma, d = float(header["gamma"]), float(header["d"])
        mu = np.array([float(v) for v in header["mu"].split()])
    except ValueError as exc:
        raise ConfigError(f"malformed header: {exc}") from None
    if mu.size != S:
        raise ConfigError(f"mu has {mu.size} entries, expected {S}")
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    C = np.zeros((S, A))
    for key, rest, lineno in entries:
        try:
            if key == "T":
                s, a, s2, p = int(rest[0]), int(rest[1]), int(rest[2]), float(rest[3])
                P[s, a, s2] += p
            else:
                s, a, v = int(rest[0]), int(rest[1]), float(rest[2])
                (R if key == "R" else C)[s, a] = v
        except (ValueError, IndexError):
            raise ConfigError(f"line {lineno}: malformed {key} entry") from None
    try:
        return TabularCmdp(P, R, C, mu, gamma, d, header.get("name", name))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def load_cmdp(path: str | Path) -> TabularCmdp:
    p = Path(path)
    return parse_cmdp(p.read_text(), name=p.stem)


def reference_instance(name: str = "risky_chain") -> TabularCmdp:
    """Bundled instances: ``risky_chain`` (6 states) and ``chain3`` (3 states)."""
    try:
        text = resources.files("adrc_lagrangian").joinpath("data").joinpath(f"{name}.cmdp").read_text()
    except FileNotFoundError:
        raise ConfigError(f"no bundled instance named {name!r}") from None
    return parse_cmdp(text, name=name)


@dataclass
class SoftmaxPolicy:
    logits: np.ndarray
    step_size: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        self.logits = np.array(self.logits, dtype=float)
        if self.logits.ndim != 2:
            raise ParameterError("logits must be a (states, actions) table")
        if not self.step_size > 0.0:
            raise ParameterError("step_size must be positive")

    @classmethod
    def uniform(cls, cmdp: TabularCmdp, step_size: float = 0.05, seed: int = 0) -> "SoftmaxPolicy":
        return cls(np.zeros((cmdp.n_states, cmdp.n_actions)), step_size, seed)

    def probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def copy(self) -> "SoftmaxPolicy":
        return SoftmaxPolicy(self.logits.copy(), self.step_size, self.seed)


def _as_probs(policy: SoftmaxPolicy | np.ndarray) -> np.ndarray:
    return policy.probs() if isinstance(policy, SoftmaxPolicy) else np.asarray(policy, dtype=float)


def exact_returns(cmdp: TabularCmdp, policy: SoftmaxPolicy | np.ndarray) -> tuple[float, float]:
    """``(J, J_c)`` from the discounted Bellman linear system."""
    pi = _as_probs(policy)
    P = np.einsum("sa,sat->st", pi, cmdp.transition)
    M = np.eye(cmdp.n_states) - cmdp.gamma * P
    rc = np.stack([(pi * cmdp.reward).sum(axis=1), (pi * cmdp.cost).sum(axis=1)], axis=1)
    v = np.linalg.solve(M, rc)
    J, Jc = cmdp.mu @ v
    return float(J), float(Jc)


@dataclass
class EpisodeBatch:
    states: np.ndarray  # (T, N)
    actions: np.ndarray  # (T, N)
    rewards: np.ndarray  # (T, N)
    costs: np.ndarray  # (T, N)

    def discounted_to_go(self, gamma: float, values: np.ndarray) -> np.ndarray:
        out = np.empty_like(values)
        acc = np.zeros(values.shape[1])
        for t in range(values.shape[0] - 1, -1, -1):
            acc = values[t] + gamma * acc
            out[t] = acc
        return out


def sample_episodes(
    cmdp: TabularCmdp,
    policy: SoftmaxPolicy | np.ndarray,
    n: int,
    rng: np.random.Generator,
    horizon: int | None = None,
) -> EpisodeBatch:
    """Roll out ``n`` episodes in lockstep for ``horizon`` steps."""
    if n < 1:
        raise ParameterError("need at least one episode")
    T = cmdp.truncation_horizon if horizon is None else int(horizon)
    pi_cum = np.cumsum(_as_probs(policy), axis=1)
    P_cum = np.cumsum(cmdp.transition, axis=2)
    A, S = cmdp.n_actions, cmdp.n_states
    s = np.minimum(np.searchsorted(np.cumsum(cmdp.mu), rng.random(n), side="right"), S - 1)
    states = np.empty((T, n), dtype=np.intp)
    actions = np.empty((T, n), dtype=np.intp)
    for t in range(T):
        u = rng.random((2, n))
        a = np.minimum((u[0][:, None] >= pi_cum[s]).sum(axis=1), A - 1)
        states[t], actions[t] = s, a
        s = np.minimum((u[1][:, None] >= P_cum[s, a]).sum(axis=1), S - 1)
    return EpisodeBatch(states, actions, cmdp.reward[states, actions], cmdp.cost[states, actions])


@dataclass
class TrainingLog:
    mode: str
    seed: int
    d: float
    J_hat: list[float] = field(default_factory=list)
    Jc_hat: list[float] = field(default_factory=list)
    J_exact: list[float] = field(default_factory=list)
    Jc_exact: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    reference: list[tuple[float, float, float]] = field(default_factory=list)
    episode_costs: list[np.ndarray] = field(default_factory=list)

    columns = ("epoch", "J_hat", "Jc_hat", "J_exact", "Jc_exact", "lam", "r", "r_dot", "r_ddot")

    @property
    def epochs(self) -> int:
        return len(self.lam)

    def all_episode_costs(self) -> EpisodeCosts:
        flat = np.concatenate(self.episode_costs) if self.episode_costs else np.empty(0)
        return EpisodeCosts(flat, self.d)

    def to_csv(self, out: TextIO | None = None, precision: int = 17) -> str | None:
        buf = io.StringIO() if out is None else out
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        fmt = f"%.{precision}g"
        for k in range(self.epochs):
            vals = (self.J_hat[k], self.Jc_hat[k], self.J_exact[k], self.Jc_exact[k], self.lam[k], *self.reference[k])
            w.writerow([k] + [fmt % v for v in vals])
        return buf.getvalue() if out is None else None


def train(
    cmdp: TabularCmdp,
    policy0: SoftmaxPolicy,
    ctrl: ControllerConfig,
    ref: ReferenceParams | None = None,
    epochs: int = 150,
    episodes_per_epoch: int = 32,
    seed: int | None = None,
    baseline_rate: float = 0.2,
) -> TrainingLog:
    """Penalized policy gradient with a per-epoch multiplier update.

    Each epoch samples ``episodes_per_epoch`` episodes, forms ``J_c`` from
    the mean discounted cost return, updates the multiplier and then takes
    one gradient step on the rescaled objective with that multiplier.
    ADRC modes track ``r(k dt)`` with ``x1_0`` anchored to the first observed
    cost estimate (``ref.x1_0`` is replaced); other modes track ``ref.d``.
    ``ref`` defaults to ``c_r = 0.1`` toward ``cmdp.d``. The RNG for epoch
    ``k`` is ``default_rng([seed, k])``, so logs replay bit-for-bit.
    """
    if epochs < 1 or episodes_per_epoch < 1:
        raise ParameterError("epochs and episodes_per_epoch must be >= 1")
    seed = policy0.seed if seed is None else int(seed)
    policy = policy0.copy()
    ref = ReferenceParams(0.1, cmdp.d, cmdp.d) if ref is None else ref
    traj = None
    state = initial_state(ctrl)
    gamma = cmdp.gamma
    T = cmdp.truncation_horizon
    disc = gamma ** np.arange(T)
    S, A = cmdp.n_states, cmdp.n_actions
    baseline = np.zeros(S)
    seen = np.zeros(S, dtype=bool)
    log = TrainingLog(mode=ctrl.mode.value, seed=seed, d=ref.d)

    for k in range(epochs):
        rng = np.random.default_rng([seed, k])
        batch = sample_episodes(cmdp, policy, episodes_per_epoch, rng, T)
        G = batch.discounted_to_go(gamma, batch.rewards)
        Gc = batch.discounted_to_go(gamma, batch.costs)
        J_hat, Jc_hat = float(G[0].mean()), float(Gc[0].mean())
        J_ex, Jc_ex = exact_returns(cmdp, policy)

        if ctrl.mode.is_adrc:
            if traj is None:
                traj = make_reference(ReferenceParams(ref.c_r, ref.d, Jc_hat, ref.x2_0))
            r = traj.eval(k * ctrl.dt)
        else:
            r = (ref.d, 0.0, 0.0)
        state, lam = update_lambda(state, ctrl, Jc_hat, r)

        log.J_hat.append(J_hat)
        log.Jc_hat.append(Jc_hat)
        log.J_exact.append(J_ex)
        log.Jc_exact.append(Jc_ex)
        log.lam.append(lam)
        log.reference.append(tuple(float(v) for v in r))
        log.episode_costs.append(Gc[0].copy())

        # rescaled penalized return-to-go with a tabular baseline
        Z = (G - lam * Gc) / (1.0 + lam)
        s, a = batch.states, batch.actions
        adv = Z - baseline[s]
        w = (disc[:, None] * adv).ravel()
        flat_sa = (s * A + a).ravel()
        W_sa = np.bincount(flat_sa, weights=w, minlength=S * A).reshape(S, A)
        W_s = W_sa.sum(axis=1, keepdims=True)
        grad = (W_sa - policy.probs() * W_s) / episodes_per_epoch
        policy.logits += policy.step_size * grad

        counts = np.bincount(s.ravel(), minlength=S)
        sums = np.bincount(s.ravel(), weights=Z.ravel(), minlength=S)
        visited = counts > 0
        means = np.divide(sums, counts, out=np.zeros(S), where=visited)
        init = visited & ~seen
        baseline[init] = means[init]
        upd = visited & seen
        baseline[upd] += baseline_rate * (means[upd] - baseline[upd])
        seen |= visited

        if not np.all(np.abs(policy.logits) <= LOGIT_LIMIT):
            raise DivergenceError(
                f"policy logits exceeded {LOGIT_LIMIT} at epoch {k} "
                f"(max |logit| = {np.abs(policy.logits).max():.3g}); lower the step size",
                step=k,
            )
    return log


def controller_for(mode: ControllerMode | str, **kw) -> ControllerConfig:
    """Default controller for ``mode`` with optional overrides."""
    return ControllerConfig(mode=ControllerMode(mode), **kw)

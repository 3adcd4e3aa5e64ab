"""Train a softmax policy on the small constrained MDP with three multiplier rules.

Prints the per-rule violation statistics averaged over a few seeds.
"""

# %%
import numpy as np

from adrc_lagrangian.controller import ControllerMode
from adrc_lagrangian.metrics import summarize
from adrc_lagrangian.reference import ReferenceParams
from adrc_lagrangian.toycmdp import SoftmaxPolicy, controller_for, exact_returns, reference_instance, train

cmdp = reference_instance("risky_chain")
print(f"{cmdp.n_states} states, {cmdp.n_actions} actions, cost limit {cmdp.d}, gamma {cmdp.gamma}")

# %% Two pure policies: always walk (safe) or always take the shortcut (lucrative, costly).
for name, col in (("walk", 0), ("shortcut", 1)):
    pi = np.zeros((cmdp.n_states, cmdp.n_actions))
    pi[:, col] = 1.0
    J, Jc = exact_returns(cmdp, pi)
    print(f"{name:8s}: J={J:.3f}  Jc={Jc:.3f}")

# %%
ref = ReferenceParams(0.1, cmdp.d, cmdp.d)
for mode in (ControllerMode.CLASSICAL_LAG, ControllerMode.PID_LAG, ControllerMode.ADRC_ALGORITHM1):
    rates, finals = [], []
    for seed in range(4):
        log = train(cmdp, SoftmaxPolicy.uniform(cmdp, 0.05, seed), controller_for(mode, cost_limit=cmdp.d),
                    ref, epochs=80, episodes_per_epoch=32, seed=seed)
        rates.append(summarize(log.all_episode_costs()).violation_rate)
        finals.append(log.Jc_exact[-1])
    print(f"{mode.value:16s} violation rate {np.mean(rates):.3f}   final exact Jc {np.mean(finals):.3f}")

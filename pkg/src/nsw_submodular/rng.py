"""Keyed random streams.

Every random draw in the package comes from a generator keyed by the master
seed plus a tuple of integers naming the task (phase, pass, step, agent,
trial, ...).  Results therefore do not depend on the order in which tasks run.
"""
import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))

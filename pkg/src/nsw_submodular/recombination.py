"""Matching-extension and alternating-path recombination diagnostics.

Neither procedure is used by the solver.  Both take a fractional solution
``y`` (zero outside ``A' x G'``) and matchings into ``H = tau(A)`` and check
the inequalities that bound the final matching step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import multilinear as ml
from .errors import InvariantViolation
from .matching import Matching
from .reference import ExactResult, optimum_fractional
from .relaxation import ratio_certificate

NEG_INF = float("-inf")
_REL = 1e-9


def _log(x: float) -> float:
    return math.log(x) if x > 0 else NEG_INF


@dataclass
class PathRecord:
    agents: list  # a_1 .. a_k, head first
    items: list   # i_j = tau(a_j)
    log_phi: float
    kind: str     # "tau-favorable" | "pi-favorable"

    def to_dict(self) -> dict:
        return {"agents": self.agents, "items": self.items, "log_phi": self.log_phi, "kind": self.kind}


@dataclass
class AlternatingDecomposition:
    components: list = field(default_factory=list)  # dicts: agents, items, cycle, has_B
    B: frozenset = frozenset()
    paths: list = field(default_factory=list)
    pi_prime: tuple = ()
    d: float = 3.0

    @property
    def agents(self) -> set:
        return {a for comp in self.components for a in comp["agents"]}

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "B": sorted(self.B),
            "paths": [p.to_dict() for p in self.paths],
            "pi_prime": list(self.pi_prime),
            "d": self.d,
        }


class _Values:
    """Cached ``V_a(y_a)`` and ``V_a(y_a + 1_j)`` for one ``y``."""

    def __init__(self, instance, y):
        self.instance = instance
        self.y = np.asarray(y, dtype=float)
        self.base = [ml.eval_exact(o, self.y[a]) for a, o in enumerate(instance.oracles)]
        self._cache: dict = {}

    def plus(self, a: int, j) -> float:
        if j is None:
            return self.base[a]
        key = (a, j)
        if key not in self._cache:
            self._cache[key] = ml.eval_overlay(self.instance.oracles[a], self.y[a], [j])
        return self._cache[key]

    def log_nsw(self, matching: Sequence) -> float:
        n = self.instance.n
        vals = [self.plus(a, matching[a]) for a in range(n)]
        if min(vals) <= 0:
            return NEG_INF
        return math.fsum(math.log(v) for v in vals) / n


def _check_inputs(instance, tau: Matching, pi: Matching, d: float) -> None:
    if not d >= 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if len(tau) != instance.n or len(pi) != instance.n:
        raise ValueError("matchings must have one entry per agent")
    if any(t is None for t in tau):
        raise ValueError("tau must match every agent")
    H = tau.items
    stray = [j for j in pi if j is not None and j not in H]
    if stray:
        raise ValueError(f"pi uses items {stray} outside H")


def recombine(instance, tau: Matching, pi: Matching, y: np.ndarray, d: float = 3.0):
    """Build ``rho`` from ``tau`` and ``pi`` by switching alternating paths.

    Returns ``(rho, decomposition)``.  Agents in ``B`` (those whose ``pi`` item
    is worth less than ``V_a(y_a) / (d - 1)``) lose their ``pi`` edge.  Inside a
    component of ``pi xor tau`` with a ``B`` agent, each piece headed by an agent
    without a ``pi'`` edge is scored by ``phi`` and takes its ``tau`` edges iff
    ``phi <= d**k``; otherwise it takes its ``pi'`` edges and the head stays
    unmatched.  Components without ``B`` agents take ``pi`` wholesale.
    """
    _check_inputs(instance, tau, pi, d)
    n = instance.n
    vals = _Values(instance, y)
    single = [o.singleton_values() if instance.m else np.zeros(0) for o in instance.oracles]
    B = frozenset(a for a in range(n)
                  if (single[a][pi[a]] if pi[a] is not None else 0.0) < vals.base[a] / (d - 1))
    diff = [a for a in range(n) if pi[a] != tau[a]]
    diff_set = set(diff)
    pi_prime = tuple(None if (a in B and a in diff_set) else pi[a] for a in range(n))
    rho = list(tau)
    decomposition = AlternatingDecomposition(B=B, pi_prime=pi_prime, d=d)

    # components of pi xor tau: agents linked through shared items
    owner_tau = {tau[a]: a for a in range(n)}
    owner_pi = {pi[a]: a for a in diff if pi[a] is not None}
    seen: set = set()
    for start in diff:
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            a = stack.pop()
            comp.append(a)
            nbrs = [owner_pi.get(tau[a])]
            if pi[a] is not None:
                nbrs.append(owner_tau.get(pi[a]))
            for b in nbrs:
                if b is not None and b in diff_set and b not in seen:
                    seen.add(b)
                    stack.append(b)
        comp.sort()
        items = sorted({tau[a] for a in comp} | {pi[a] for a in comp if pi[a] is not None})
        edges = len(comp) + sum(pi[a] is not None for a in comp)
        has_B = any(a in B for a in comp)
        decomposition.components.append({
            "agents": comp, "items": items, "cycle": edges == len(comp) + len(items),
            "has_B": has_B,
        })
        if not has_B:
            for a in comp:
                rho[a] = pi[a]
            continue
        covered: set = set()
        heads = [a for a in comp if pi_prime[a] is None]
        pred = {pi_prime[a]: a for a in comp if pi_prime[a] is not None}
        for head in heads:
            agents, items_k = [head], [tau[head]]
            while True:
                nxt = pred.get(items_k[-1])
                if nxt is None or nxt in agents:
                    break
                agents.append(nxt)
                items_k.append(tau[nxt])
            covered.update(agents)
            log_phi = _log(vals.base[head]) - _log(vals.plus(head, items_k[0]))
            for j in range(1, len(agents)):
                log_phi += _log(vals.plus(agents[j], items_k[j - 1])) - _log(vals.plus(agents[j], items_k[j]))
            k = len(agents)
            tau_fav = log_phi <= k * math.log(d) + 1e-12
            if tau_fav:
                for a in agents:
                    rho[a] = tau[a]
            else:
                rho[head] = None
                for a in agents[1:]:
                    rho[a] = pi_prime[a]
            decomposition.paths.append(
                PathRecord(agents, items_k, log_phi, "tau-favorable" if tau_fav else "pi-favorable"))
        if covered != set(comp):
            raise InvariantViolation(f"alternating walk missed agents {sorted(set(comp) - covered)}")
    return Matching(tuple(rho)), decomposition


def recombination_identities(instance, pi: Matching, rho: Matching, y, decomposition: AlternatingDecomposition) -> dict:
    """Log-domain values behind the accounting identity and the ``pi'`` bound."""
    vals = _Values(instance, y)
    n = instance.n
    d = decomposition.d
    log_rho = vals.log_nsw(rho)
    log_pi = vals.log_nsw(pi)
    log_pi_prime = vals.log_nsw(decomposition.pi_prime)
    tau_phi = math.fsum(p.log_phi for p in decomposition.paths if p.kind == "tau-favorable")
    return {
        "log_nsw_rho": log_rho,
        "log_nsw_pi": log_pi,
        "log_nsw_pi_prime": log_pi_prime,
        "identity_lhs": log_rho - log_pi_prime if log_pi_prime > NEG_INF else None,
        "identity_rhs": -tau_phi / n,
        "pi_prime_bound_ok": log_pi == NEG_INF or log_pi_prime >= log_pi + math.log((d - 1) / d) - 1e-12,
    }


def verify_recombination(instance, tau: Matching, pi: Matching, rho: Matching, y, d: float = 3.0) -> dict:
    """Check ``NSW(y, rho) >= NSW(y, pi) / (d + 2)`` and the per-agent conditions.

    Condition (i): ``v_a(rho(a)) >= V_a(y_a) / d``.  Condition (ii): every
    ``j`` in ``G'`` has ``v_a(j) < V_a(y_a) / d``.  Report only.
    """
    vals = _Values(instance, y)
    n = instance.n
    H = tau.items
    G = [j for j in range(instance.m) if j not in H]
    single = [o.singleton_values() if instance.m else np.zeros(0) for o in instance.oracles]
    log_rho, log_pi = vals.log_nsw(rho), vals.log_nsw(pi)
    ratio_ok = log_pi == NEG_INF or log_rho >= log_pi - math.log(d + 2) - 1e-12
    cases, witnesses = [], {}
    for a in range(n):
        thr = vals.base[a] / d
        v_rho = float(single[a][rho[a]]) if rho[a] is not None else 0.0
        if v_rho >= thr * (1 - _REL):
            cases.append("i")
            continue
        worst = max((float(single[a][j]) for j in G), default=0.0)
        if worst < thr * (1 + _REL) or (thr == 0 and worst == 0):
            cases.append("ii")
        else:
            cases.append("violation")
            j = G[int(np.argmax([single[a][g] for g in G]))]
            witnesses[a] = {"item": j, "value": worst, "threshold": thr, "rho_value": v_rho}
    return {
        "nsw_ratio_ok": bool(ratio_ok),
        "log_nsw_rho": log_rho,
        "log_nsw_pi": log_pi,
        "per_agent_case": cases,
        "violations": witnesses,
        "ok": bool(ratio_ok) and not witnesses,
    }


def matching_extension_bound(instance, y_prime: np.ndarray, H, exact: ExactResult,
                             agents: Sequence[int] | None = None) -> dict:
    """Build ``pi`` from the integral optimum and test ``NSW(y', pi) (beta + 1) >= OPT``.

    ``pi(i)`` is agent ``i``'s most valuable item of its optimal H-share;
    unused H-items go to agents with an empty share in index order.  ``y*`` is
    the optimum restricted to ``agents x G'``.  The instance may carry extra
    zero-valued columns beyond those of ``exact``.
    """
    n = instance.n
    H = sorted(H)
    Hset = set(H)
    y_prime = np.asarray(y_prime, dtype=float)
    if agents is None:
        agents = [i for i in range(n) if y_prime[i].any()]
    G = [j for j in range(instance.m) if j not in Hset]
    y_star = optimum_fractional(instance, exact, agents, G)
    beta = ratio_certificate(instance, agents, y_prime, y_star)
    assignment = [None] * n
    shares = [sorted(b & Hset) for b in exact.bundles]
    for i in range(n):
        if shares[i]:
            sv = instance.oracles[i].singleton_values()
            assignment[i] = max(shares[i], key=lambda j: (sv[j], -j))
    used = {j for j in assignment if j is not None}
    leftover = [j for j in H if j not in used]
    for i in range(n):
        if assignment[i] is None and leftover:
            assignment[i] = leftover.pop(0)
    pi = Matching(tuple(assignment))
    vals = _Values(instance, y_prime)
    log_nsw_pi = vals.log_nsw(pi)
    opt = exact.log_nsw
    lhs = log_nsw_pi + math.log(beta + 1) if math.isfinite(beta) else float("inf")
    ok = opt == NEG_INF or lhs >= opt - 1e-9
    return {
        "beta": beta,
        "pi": list(pi),
        "log_nsw_pi": log_nsw_pi,
        "opt_log_nsw": opt,
        "lhs": lhs,
        "ok": bool(ok),
        "note": "pi instantiated from the brute-forced integral optimum",
    }

"""Problem instances and their JSON file format.

File layout::

    {
      "n": 2, "m": 3,
      "agents": [{"family": "additive", "params": {"weights": [1, 2, 0]}}, ...],
      "labels": {"agents": [...], "items": [...]},      # optional
      "metadata": {"generator": "...", "seed": 0, ...}  # optional
    }

Explicit tables are stored as arrays of length ``2**m`` indexed by subset
bitmask (bit ``j`` set means item ``j`` is in the set).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InstanceFormatError
from .valuations import build_oracle


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    m: int
    oracles: tuple
    labels: dict | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "oracles", tuple(self.oracles))
        if self.n < 1:
            raise InstanceFormatError("n: need at least one agent")
        if self.m < 0:
            raise InstanceFormatError("m: must be non-negative")
        if len(self.oracles) != self.n:
            raise InstanceFormatError(f"agents: expected {self.n} valuations, got {len(self.oracles)}")
        for i, o in enumerate(self.oracles):
            if o.ground_size != self.m:
                raise InstanceFormatError(f"agents[{i}]: ground size {o.ground_size} != m = {self.m}")

    @property
    def items(self) -> range:
        return range(self.m)

    @property
    def agents(self) -> range:
        return range(self.n)

    def with_oracles(self, oracles) -> "Instance":
        oracles = tuple(oracles)
        m = oracles[0].ground_size if oracles else self.m
        return Instance(self.n, m, oracles, self.labels, dict(self.metadata))

    def scaled(self, factors) -> "Instance":
        """Instance with agent ``i``'s valuation multiplied by ``factors[i]``."""
        return self.with_oracles(o.scaled(f) for o, f in zip(self.oracles, factors))

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "m": self.m,
            "agents": [o.to_dict() for o in self.oracles],
        }
        if self.labels is not None:
            out["labels"] = self.labels
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        if not isinstance(data, dict):
            raise InstanceFormatError("instance: expected a JSON object")
        for key in ("n", "m", "agents"):
            if key not in data:
                raise InstanceFormatError(f"{key}: missing required field")
        n, m, agents = data["n"], data["m"], data["agents"]
        if not isinstance(n, int) or not isinstance(m, int):
            raise InstanceFormatError("n, m: must be integers")
        if not isinstance(agents, list):
            raise InstanceFormatError("agents: expected a list")
        oracles = []
        for i, spec in enumerate(agents):
            try:
                oracles.append(build_oracle(spec, ground_size=m))
            except InstanceFormatError as exc:
                raise InstanceFormatError(f"agents[{i}]: {exc}") from exc
        return cls(n, m, tuple(oracles), data.get("labels"), dict(data.get("metadata") or {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        fams = sorted({o.family for o in self.oracles})
        return f"Instance(n={self.n}, m={self.m}, families={fams})"


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(instance.dumps())


def load_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Instance.from_dict(data)

"""Partitions of resources into abstract groups and their aggregate statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import ConfigError, resource_arrays


@dataclass(frozen=True)
class AbstractionSpec:
    groups: tuple[tuple[int, ...], ...]
    label: str = ""
    # resource index -> group index, built once at validation
    group_index: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups = tuple(tuple(int(m) for m in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        n = sum(len(g) for g in groups)
        index = np.full(n, -1, dtype=np.int64)
        for b, members in enumerate(groups):
            if not members:
                raise ConfigError(f"abstract group {b} is empty")
            for m in members:
                if not 0 <= m < n:
                    raise ConfigError(f"resource index {m} out of range [0, {n})")
                if index[m] >= 0:
                    raise ConfigError(f"duplicate member {m} in abstraction")
                index[m] = b
        index.setflags(write=False)
        object.__setattr__(self, "group_index", index)
        if not self.label:
            object.__setattr__(self, "label", "A-" + self.to_text())

    @property
    def num_resources(self) -> int:
        return len(self.group_index)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def is_contiguous(self) -> bool:
        flat = [m for g in self.groups for m in g]
        return flat == list(range(self.num_resources))

    def to_text(self) -> str:
        """Serialize back to the syntax accepted by the parsers."""
        if self.is_contiguous():
            return "+".join(str(len(g)) for g in self.groups)
        return ";".join(",".join(str(m) for m in g) for g in self.groups)

    def group_of(self, resource_index: int) -> int:
        return int(self.group_index[resource_index])


def _check_size(spec: AbstractionSpec, num_resources: int, text: str) -> AbstractionSpec:
    if spec.num_resources != num_resources:
        raise ConfigError(
            f"abstraction {text!r} covers {spec.num_resources} resources, expected {num_resources}"
        )
    return spec


def parse_contiguous_spec(text: str, num_resources: int) -> AbstractionSpec:
    """Parse ``"k1+k2+..."``: group j takes the next ``kj`` consecutive resources.

    >>> parse_contiguous_spec("4+2", 6).groups
    ((0, 1, 2, 3), (4, 5))
    """
    text = text.strip()
    if text.upper().startswith("A-"):
        text = text[2:]
    sizes = []
    for token in text.split("+"):
        token = token.strip()
        if not token.isdigit():
            raise ConfigError(f"malformed group size {token!r} in abstraction {text!r}")
        if int(token) == 0:
            raise ConfigError(f"zero-sized group {token!r} in abstraction {text!r}")
        sizes.append(int(token))
    if sum(sizes) != num_resources:
        raise ConfigError(
            f"abstraction {text!r}: parts sum to {sum(sizes)} != {num_resources} resources"
        )
    bounds = np.cumsum([0] + sizes)
    groups = [tuple(range(bounds[j], bounds[j + 1])) for j in range(len(sizes))]
    return AbstractionSpec(tuple(groups), label="A-" + text)


def parse_explicit_spec(text: str, num_resources: int) -> AbstractionSpec:
    """Parse ``"0,3,6;1,4,7;2,5,8"``: ';' separates groups, ',' separates members."""
    groups = []
    seen: set[int] = set()
    for chunk in text.strip().split(";"):
        members = []
        for token in chunk.split(","):
            token = token.strip()
            try:
                m = int(token)
            except ValueError:
                raise ConfigError(f"malformed resource index {token!r} in abstraction {text!r}") from None
            if not 0 <= m < num_resources:
                raise ConfigError(f"resource index {m} out of range [0, {num_resources})")
            if m in seen:
                raise ConfigError(f"duplicate member {m} in abstraction {text!r}")
            seen.add(m)
            members.append(m)
        groups.append(tuple(members))
    missing = sorted(set(range(num_resources)) - seen)
    if missing:
        raise ConfigError(f"abstraction {text!r} is missing resource index {missing[0]}")
    return _check_size(AbstractionSpec(tuple(groups), label="A-" + text.strip()), num_resources, text)


class GroupStats(NamedTuple):
    weight: float
    capacity: int
    attendance: int


def group_stats(spec: AbstractionSpec, group_index: int, resources: Sequence, attendance) -> GroupStats:
    members = list(spec.groups[group_index])
    weights, capacities = resource_arrays(resources)
    att = np.asarray(attendance)
    return GroupStats(
        weight=float(np.mean(weights[members])),
        capacity=int(capacities[members].sum()),
        attendance=int(att[members].sum()),
    )


def group_of(spec: AbstractionSpec, resource_index: int) -> int:
    return spec.group_of(resource_index)

"""Reuse buffer of discovered states and the start-state selection rules.

The archive behaves like the children of a single virtual root: every node is
a candidate start state, scored by

    score(s) = Q(s) + c * scale * P(s) * sqrt(1 + T) / (1 + n(s))

where ``Q`` is the best child reward seen from ``s`` (its own reward until it
has been expanded), ``P`` a linear rank prior, ``scale`` the reward range of
the archive, ``n`` the visit count (backed up to ancestors) and ``T`` the
total number of expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Construction


class ArchiveExhausted(RuntimeError):
    """Every node is excluded by lineage blocking."""


@dataclass
class ArchiveNode:
    id: int
    parent_id: Optional[int]
    reward: float
    best_descendant: float
    visits: int = 0
    is_seed: bool = False
    construction: Optional[Construction] = field(default=None, repr=False, compare=False)
    bound: float = math.nan

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "reward": self.reward,
            "best_descendant": self.best_descendant,
            "visits": self.visits,
            "is_seed": self.is_seed,
        }


class Archive:
    """The buffer of start states.

    Node ids are assigned by the archive in insertion order. Parent links of
    pruned nodes are kept in ``_parents`` so ancestry (for visit backup and
    lineage blocking) survives eviction of intermediate nodes.
    """

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.nodes: dict[int, ArchiveNode] = {}
        self.total_expansions = 0
        self._next_id = 0
        self._parents: dict[int, Optional[int]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def __getitem__(self, node_id: int) -> ArchiveNode:
        return self.nodes[node_id]

    def _new_node(self, parent_id, reward, construction, is_seed, bound) -> ArchiveNode:
        node = ArchiveNode(
            id=self._next_id,
            parent_id=parent_id,
            reward=float(reward),
            best_descendant=float(reward),
            is_seed=is_seed,
            construction=construction,
            bound=bound,
        )
        self.nodes[node.id] = node
        self._parents[node.id] = parent_id
        self._next_id += 1
        return node

    def add_seed(self, construction: Optional[Construction], reward: float, bound: float = math.nan) -> int:
        return self._new_node(None, reward, construction, True, bound).id

    @property
    def seeds(self) -> list[int]:
        return [i for i, n in self.nodes.items() if n.is_seed]

    # --- lineage -------------------------------------------------------------

    def ancestors(self, node_id: int) -> list[int]:
        """All ancestor ids, nearest first, including ones already pruned."""
        out = []
        p = self._parents.get(node_id)
        while p is not None:
            out.append(p)
            p = self._parents.get(p)
        return out

    def lineage(self, node_id: int) -> set[int]:
        """``node_id`` plus its ancestors and its descendants among live nodes."""
        out = {node_id, *self.ancestors(node_id)}
        for other in self.nodes:
            if node_id in self.ancestors(other):
                out.add(other)
        return out

    # --- scoring -------------------------------------------------------------

    def ranks(self) -> dict[int, int]:
        """Rank 0 is the highest reward; ties go to the older (smaller) id."""
        order = sorted(self.nodes.values(), key=lambda n: (-n.reward, n.id))
        return {n.id: r for r, n in enumerate(order)}

    def prior(self) -> dict[int, float]:
        size = len(self.nodes)
        ranks = self.ranks()
        norm = size * (size + 1) / 2.0  # sum over ranks 0..size-1 of (size - rank)
        return {i: (size - r) / norm for i, r in ranks.items()}

    def scores(self, c: float = 1.0) -> dict[int, float]:
        if not self.nodes:
            return {}
        rewards = [n.reward for n in self.nodes.values()]
        scale = max(rewards) - min(rewards)
        prior = self.prior()
        root = math.sqrt(1.0 + self.total_expansions)
        out = {}
        for i, node in self.nodes.items():
            q = node.best_descendant if node.visits > 0 else node.reward
            out[i] = q + c * scale * prior[i] * root / (1.0 + node.visits)
        return out

    def puct_score(self, node_id: int, c: float = 1.0) -> float:
        if node_id not in self.nodes:
            raise KeyError(node_id)
        return self.scores(c)[node_id]

    # --- updates ---------------------------------------------------------------

    def record_expansion(
        self,
        parent_id: int,
        children: Sequence[tuple[Optional[Construction], float]],
        bounds: Optional[Sequence[float]] = None,
        insertable: Optional[Sequence[bool]] = None,
        keep: int = 2,
        prune: bool = True,
    ) -> list[int]:
        """Apply the post-expansion updates and return the ids of inserted children.

        ``m(parent)`` is raised to the best child reward, visits are backed up
        to the parent and all its ancestors, ``T`` grows by one, the ``keep``
        best children (restricted to ``insertable`` ones when given) are added,
        and finally the lowest-reward non-seed nodes are evicted down to
        capacity. With ``prune=False`` eviction is left to a later
        :meth:`prune` call, so several expansions of one batch all see their
        parents.
        """
        if parent_id not in self.nodes:
            raise KeyError(f"unknown parent id {parent_id}")
        if not children:
            raise ValueError("children must be non-empty")
        parent = self.nodes[parent_id]
        y = max(float(r) for _, r in children)
        parent.best_descendant = max(parent.best_descendant, y)
        parent.visits += 1
        for a in self.ancestors(parent_id):
            if a in self.nodes:
                self.nodes[a].visits += 1
        self.total_expansions += 1

        idx = [k for k in range(len(children)) if insertable is None or insertable[k]]
        # Stable sort keeps the earlier rollout on reward ties.
        idx.sort(key=lambda k: -float(children[k][1]))
        inserted = []
        for k in idx[:keep]:
            c, r = children[k]
            bound = math.nan if bounds is None else float(bounds[k])
            inserted.append(self._new_node(parent_id, r, c, False, bound).id)
        if prune:
            self.prune()
        return [i for i in inserted if i in self.nodes]

    def prune(self) -> None:
        non_seed = [n for n in self.nodes.values() if not n.is_seed]
        excess = len(non_seed) - self.capacity
        if excess <= 0:
            return
        # Lowest reward first; among equal rewards the newest goes first.
        non_seed.sort(key=lambda n: (n.reward, -n.id))
        for n in non_seed[:excess]:
            del self.nodes[n.id]

    # --- export ----------------------------------------------------------------

    def snapshot(self) -> list[dict]:
        return [self.nodes[i].to_dict() for i in sorted(self.nodes)]


# --- selection rules ---------------------------------------------------------


def _argmax(scores: dict[int, float], candidates: Iterable[int]) -> Optional[int]:
    best, best_score = None, -math.inf
    for i in sorted(candidates):
        if scores[i] > best_score:
            best, best_score = i, scores[i]
    return best


def puct_select(archive: Archive, blocked: Iterable[int] = (), c: float = 1.0) -> int:
    """Highest-scoring node whose lineage is disjoint from every blocked node.

    Raises :class:`ArchiveExhausted` when nothing is eligible.
    """
    blocked = set(blocked)
    excluded = set()
    for b in blocked:
        excluded |= archive.lineage(b)
    candidates = [i for i in archive.nodes if i not in excluded]
    if not candidates:
        raise ArchiveExhausted("every archive node shares a lineage with a blocked node")
    return _argmax(archive.scores(c), candidates)


def puct_select_batch(archive: Archive, k: int, c: float = 1.0) -> tuple[list[int], bool]:
    """Select ``k`` start states up front, blocking each pick's lineage for the rest.

    When lineage blocking leaves nothing, blocking is relaxed to the picked
    nodes themselves, then dropped. Returns the ids and whether any relaxation
    happened.
    """
    picked: list[int] = []
    fallback = False
    scores = archive.scores(c)
    for _ in range(k):
        try:
            picked.append(puct_select(archive, picked, c))
            continue
        except ArchiveExhausted:
            fallback = True
        direct = [i for i in archive.nodes if i not in set(picked)]
        if direct:
            picked.append(_argmax(scores, direct))
        else:
            picked.append(_argmax(scores, archive.nodes))
    return picked, fallback


def epsilon_greedy_select(archive: Archive, epsilon: float, rng: np.random.Generator) -> int:
    if not archive.nodes:
        raise ValueError("archive is empty")
    ids = sorted(archive.nodes)
    if rng.random() < epsilon:
        return ids[int(rng.integers(len(ids)))]
    return min(ids, key=lambda i: (-archive.nodes[i].reward, i))


def no_reuse_select(archive: Archive, blocked: Iterable[int] = ()) -> int:
    seeds = archive.seeds
    if not seeds:
        raise ValueError("archive has no seed")
    return min(seeds)

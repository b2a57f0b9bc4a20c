"""Incremental decision tree over the observation space.

Every node owns a region (a conjunction of halfspaces), a single-component
density estimator trained on the samples falling in that region, and a
sequential 2-means whose centroids decide where the node is cut.  At rounds
``ceil(beta**k)`` the node with the largest ``centroid distance / 2**level``
is split by the perpendicular bisector of its two centroids.  A node can be
split several times; every split hangs a new child pair below it.

Two switches in :class:`TreeConfig` change the growth rule.
``split_leaves_only`` restricts the candidates to nodes without children, so
a node that keeps a wide centroid gap cannot absorb every split.
``seed_child_centroids`` starts both centroids of a new child at the
parent's centroid on that side instead of at the origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exp_family import GaussianFamily, GaussianMember, SufficientStatsAccumulator

NodeId = tuple[int, int]

#: centroids closer than this cannot define a hyperplane
MIN_CENTROID_GAP = 1e-12


@dataclass(frozen=True)
class Hyperplane:
    """Plane ``<x, normal> = offset`` with a unit normal."""

    normal: NDArray[np.float64]
    offset: float

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=float)
        if not math.isclose(float(np.linalg.norm(n)), 1.0, abs_tol=1e-9):
            raise ValueError("hyperplane normal must have unit length")
        object.__setattr__(self, "normal", n)

    @classmethod
    def bisector(cls, left: ArrayLike, right: ArrayLike) -> "Hyperplane":
        """Perpendicular bisector of the segment from ``right`` to ``left``.

        The normal points towards ``left`` so the left centroid lies on the
        non-negative side.
        """
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        diff = left - right
        gap = float(np.linalg.norm(diff))
        if gap <= MIN_CENTROID_GAP:
            raise ValueError("coincident centroids do not define a hyperplane")
        a = diff / gap
        return cls(a, float(a @ (0.5 * (left + right))))

    def margin(self, x: ArrayLike):
        return np.asarray(x, dtype=float) @ self.normal - self.offset

    def side(self, x: ArrayLike):
        """+1 on the left (``margin >= 0``) side, -1 on the right."""
        return np.where(self.margin(x) >= 0.0, 1, -1)


@dataclass
class TwoMeansState:
    """Sequential 2-means with the sums/counts initialised to 0 and 1."""

    sum_L: NDArray[np.float64]
    sum_R: NDArray[np.float64]
    count_L: int = 1
    count_R: int = 1

    @classmethod
    def fresh(cls, d: int) -> "TwoMeansState":
        return cls(np.zeros(d), np.zeros(d), 1, 1)

    @property
    def centroid_L(self) -> NDArray[np.float64]:
        return self.sum_L / self.count_L

    @property
    def centroid_R(self) -> NDArray[np.float64]:
        return self.sum_R / self.count_R

    def gap(self) -> float:
        return float(np.linalg.norm(self.centroid_L - self.centroid_R))

    def assign(self, x: NDArray[np.float64]) -> str:
        """Add ``x`` to the nearer centroid; ties go left."""
        dl = np.linalg.norm(self.centroid_L - x)
        dr = np.linalg.norm(self.centroid_R - x)
        if dl <= dr:
            self.sum_L = self.sum_L + x
            self.count_L += 1
            return "L"
        self.sum_R = self.sum_R + x
        self.count_R += 1
        return "R"


@dataclass
class TreeConfig:
    """Growth parameters.

    beta is the base of the split schedule, xi the share of weight a node
    keeps when it is split.
    """

    beta: float = 2.0
    xi: float = 0.8
    reset_two_means_on_split: bool = False
    split_leaves_only: bool = False
    seed_child_centroids: bool = False

    def __post_init__(self) -> None:
        if not self.beta > 1.0:
            raise ValueError("beta must exceed 1")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")


@dataclass
class TreeNode:
    id: NodeId
    constraints: list[tuple[Hyperplane, int]]
    estimator: SufficientStatsAccumulator
    two_means: TwoMeansState
    weight: float
    children: list[tuple[NodeId, NodeId]] = field(default_factory=list)
    member: GaussianMember | None = field(default=None, repr=False)

    @property
    def level(self) -> int:
        return len(self.constraints)

    def contains(self, x: ArrayLike) -> bool:
        return all(int(plane.side(x)) == side for plane, side in self.constraints)


def is_split_round(t: int, beta: float) -> bool:
    """True when ``t == ceil(beta**k)`` for some integer ``k >= 1``."""
    k = 1
    while True:
        r = math.ceil(beta ** k)
        if r == t:
            return True
        if r > t:
            return False
        k += 1


class IncrementalTree:
    """Binary tree of nested regions grown one split per scheduled round.

    Nodes are kept in creation order; that order is also the ordering of the
    mixture weight vector.
    """

    def __init__(self, d: int, config: TreeConfig | None = None,
                 family: GaussianFamily | None = None):
        self.d = d
        self.config = config or TreeConfig()
        self.family = family or GaussianFamily(d)
        root = self._new_node((0, 1), [], 1.0)
        self.nodes: dict[NodeId, TreeNode] = {root.id: root}
        self.order: list[NodeId] = [root.id]
        self._level_counts: dict[int, int] = {0: 1}

    def _new_node(self, nid, constraints, weight) -> TreeNode:
        return TreeNode(nid, constraints, self.family.accumulator(),
                        TwoMeansState.fresh(self.d), weight)

    @property
    def root(self) -> TreeNode:
        return self.nodes[(0, 1)]

    def __len__(self) -> int:
        return len(self.order)

    def _check(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"sample of shape {x.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"non-finite sample: {x!r}")
        return x

    def route(self, x: ArrayLike) -> list[NodeId]:
        """Ids of every node whose region contains ``x``, parents first."""
        x = self._check(x)
        out = []
        stack = [self.root.id]
        while stack:
            nid = stack.pop()
            out.append(nid)
            node = self.nodes[nid]
            for left, right in reversed(node.children):
                plane = self.nodes[left].constraints[-1][0]
                stack.append(left if plane.margin(x) >= 0.0 else right)
        return out

    def observe(self, x: ArrayLike) -> list[NodeId]:
        """Train every node containing ``x``; returns the routed ids."""
        x = self._check(x)
        ids = self.route(x)
        s = self.family.sufficient_stats(x)
        for nid in ids:
            node = self.nodes[nid]
            node.estimator.accumulate(s)
            node.two_means.assign(x)
            node.member = None
        return ids

    def select_split_node(self) -> NodeId | None:
        """Node maximising centroid gap over ``2**level``, or None if no node
        has two distinct centroids.  Ties go to the lower level, then to the
        earlier node."""
        best, best_key = None, None
        for nid in self.order:
            node = self.nodes[nid]
            if node.children and self.config.split_leaves_only:
                continue
            gap = node.two_means.gap()
            if gap <= MIN_CENTROID_GAP:
                continue
            key = (-gap / 2.0 ** node.level, node.level, nid[1])
            if best_key is None or key < best_key:
                best, best_key = nid, key
        return best

    def split(self, nid: NodeId) -> tuple[NodeId, NodeId]:
        node = self.nodes[nid]
        tm = node.two_means
        plane = Hyperplane.bisector(tm.centroid_L, tm.centroid_R)
        level = node.level + 1
        n_at_level = self._level_counts.get(level, 0)
        ids = ((level, n_at_level + 1), (level, n_at_level + 2))
        self._level_counts[level] = n_at_level + 2

        kept = self.config.xi * node.weight
        child_w = 0.5 * (node.weight - kept)
        node.weight = kept
        seeds = (tm.centroid_L, tm.centroid_R)
        for cid, side, seed in zip(ids, (1, -1), seeds):
            child = self._new_node(cid, node.constraints + [(plane, side)], child_w)
            if self.config.seed_child_centroids:
                child.two_means = TwoMeansState(seed.copy(), seed.copy(), 1, 1)
            self.nodes[cid] = child
            self.order.append(cid)
        node.children.append(ids)
        if self.config.reset_two_means_on_split:
            node.two_means = TwoMeansState.fresh(self.d)
        return ids

    def maybe_grow(self, t: int) -> tuple[NodeId, NodeId] | None:
        if t < 1:
            raise ValueError("round index starts at 1")
        if not is_split_round(t, self.config.beta):
            return None
        nid = self.select_split_node()
        if nid is None:
            return None
        return self.split(nid)

    # densities and weights, in node order

    def weights(self) -> NDArray[np.float64]:
        return np.array([self.nodes[n].weight for n in self.order])

    def set_weights(self, w: ArrayLike) -> None:
        for nid, wi in zip(self.order, np.asarray(w, dtype=float)):
            self.nodes[nid].weight = float(wi)

    def member(self, nid: NodeId) -> GaussianMember:
        node = self.nodes[nid]
        if node.member is None:
            node.member = self.family.fit(node.estimator)
        return node.member

    def node_log_densities(self, x: ArrayLike) -> NDArray[np.float64]:
        """Log-density of every node's Gaussian at ``x`` over the whole space.

        ``x`` may be a batch of shape ``(n, d)``; the result is then
        ``(n_nodes, n)``.
        """
        return np.array([self.member(nid).log_density(x) for nid in self.order])

    # snapshot

    def to_dict(self) -> dict:
        def record(nid: NodeId) -> dict:
            node = self.nodes[nid]
            return {
                "id": list(nid),
                "level": node.level,
                "constraints": [
                    {"normal": plane.normal.tolist(), "offset": plane.offset, "side": side}
                    for plane, side in node.constraints
                ],
                "weight": node.weight,
                "estimator": {"count": node.estimator.count,
                              "running_mean": node.estimator.running_mean.tolist()},
                "two_means": {"sum_L": node.two_means.sum_L.tolist(),
                              "sum_R": node.two_means.sum_R.tolist(),
                              "count_L": node.two_means.count_L,
                              "count_R": node.two_means.count_R},
                "children": [[record(a), record(b)] for a, b in node.children],
            }

        return {
            "d": self.d,
            "config": asdict(self.config),
            "order": [list(n) for n in self.order],
            "root": record(self.root.id),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IncrementalTree":
        tree = cls(data["d"], TreeConfig(**data["config"]))
        tree.nodes.clear()

        def load(rec: dict) -> None:
            nid = tuple(rec["id"])
            cons = [(Hyperplane(np.array(c["normal"]), c["offset"]), c["side"])
                    for c in rec["constraints"]]
            est = SufficientStatsAccumulator(tree.family.stat_dim,
                                             np.array(rec["estimator"]["running_mean"]),
                                             rec["estimator"]["count"])
            tm = rec["two_means"]
            node = TreeNode(nid, cons, est,
                            TwoMeansState(np.array(tm["sum_L"]), np.array(tm["sum_R"]),
                                          tm["count_L"], tm["count_R"]),
                            rec["weight"])
            tree.nodes[nid] = node
            for a, b in rec["children"]:
                node.children.append((tuple(a["id"]), tuple(b["id"])))
                load(a)
                load(b)

        load(data["root"])
        tree.order = [tuple(n) for n in data["order"]]
        tree._level_counts = {}
        for level, _ in tree.order:
            tree._level_counts[level] = tree._level_counts.get(level, 0) + 1
        return tree

    def save(self, path: str | Path) -> None:
        # json writes float repr, which round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "IncrementalTree":
        return cls.from_dict(json.loads(Path(path).read_text()))

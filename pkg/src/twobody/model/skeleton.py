"""Skeleton description and the kinematic-tree adjacency mask."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from twobody.errors import ConfigError

SHIPPED = ("expi18", "toy3", "body9")


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint names, parent/child edges and root of one body.

    With ``bodies == 2`` the graph has ``2J`` nodes and node ``k`` of the
    second body is stored at index ``J + k``.
    """

    joint_names: tuple[str, ...]
    tree_edges: tuple[tuple[int, int], ...]
    root: int
    bodies: int = 2

    def __post_init__(self):
        J = len(self.joint_names)
        if J == 0:
            raise ConfigError("skeleton has no joints")
        if self.bodies not in (1, 2):
            raise ConfigError(f"bodies must be 1 or 2, got {self.bodies}")
        if not 0 <= self.root < J:
            raise ConfigError(f"root {self.root} out of range for {J} joints")
        if len(self.tree_edges) != J - 1:
            raise ConfigError(f"a tree over {J} joints needs {J - 1} edges, got {len(self.tree_edges)}")
        parent = list(range(J))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for u, v in self.tree_edges:
            if not (0 <= u < J and 0 <= v < J) or u == v:
                raise ConfigError(f"bad edge ({u}, {v}) for {J} joints")
            ru, rv = find(u), find(v)
            if ru == rv:
                raise ConfigError(f"edge ({u}, {v}) closes a cycle")
            parent[ru] = rv

    @property
    def J(self) -> int:
        return len(self.joint_names)

    @property
    def nodes(self) -> int:
        return self.J * self.bodies

    def with_bodies(self, bodies: int) -> "SkeletonSpec":
        return SkeletonSpec(self.joint_names, self.tree_edges, self.root, bodies)

    def to_dict(self) -> dict:
        return {"joints": list(self.joint_names), "edges": [list(e) for e in self.tree_edges], "root": self.root}


def skeleton_from_dict(doc: dict, bodies: int = 2) -> SkeletonSpec:
    try:
        return SkeletonSpec(
            tuple(str(n) for n in doc["joints"]),
            tuple((int(u), int(v)) for u, v in doc["edges"]),
            int(doc["root"]),
            bodies,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed skeleton document: {exc}") from exc


def load_skeleton(path_or_name: str | Path, bodies: int = 2) -> SkeletonSpec:
    """Read a skeleton JSON file, or one of the shipped ones by name."""
    from twobody.resources import shipped

    name = str(path_or_name)
    path = Path(name)
    if name in SHIPPED or not path.exists():
        path = shipped(name) or path
    if not path.exists():
        raise ConfigError(f"skeleton file not found: {path}")
    text = path.read_text()
    return skeleton_from_dict(json.loads(text), bodies)


def chain_skeleton(J: int, bodies: int = 2) -> SkeletonSpec:
    """A simple chain ``0-1-...-(J-1)`` rooted at joint 0."""
    return SkeletonSpec(tuple(f"j{i}" for i in range(J)), tuple((i, i + 1) for i in range(J - 1)), 0, bodies)


def default_skeleton(J: int, bodies: int = 2) -> SkeletonSpec:
    for name in SHIPPED:
        spec = load_skeleton(name, bodies)
        if spec.J == J:
            return spec
    return chain_skeleton(J, bodies)


def kinematic_mask(spec: SkeletonSpec) -> np.ndarray:
    """Binary ``[nodes, nodes]`` mask: self loops plus symmetrized tree edges
    inside each body, nothing across bodies."""
    J, n = spec.J, spec.nodes
    mask = np.eye(n)
    for b in range(spec.bodies):
        for u, v in spec.tree_edges:
            mask[b * J + u, b * J + v] = 1.0
            mask[b * J + v, b * J + u] = 1.0
    return mask


def rest_pose(spec: SkeletonSpec, bone_mm: float = 250.0) -> np.ndarray:
    """Deterministic ``[J, 3]`` rest pose in millimeters, root 1 m above ground.

    Children of a joint fan out evenly in the x-z plane, tilted along y by
    depth so no two joints coincide.
    """
    J = spec.J
    children: dict[int, list[int]] = {i: [] for i in range(J)}
    for u, v in spec.tree_edges:
        children[u].append(v)
        children[v].append(u)
    pose = np.zeros((J, 3))
    pose[spec.root] = (0.0, 0.0, 1000.0)
    seen = {spec.root}
    frontier = [(spec.root, 0)]
    while frontier:
        node, depth = frontier.pop(0)
        kids = sorted(c for c in children[node] if c not in seen)
        for k, child in enumerate(kids):
            angle = np.pi * (k + 1) / (len(kids) + 1) + 0.3 * depth
            direction = np.array([np.cos(angle), 0.15 * (depth + 1), np.sin(angle)])
            pose[child] = pose[node] + bone_mm * direction / np.linalg.norm(direction)
            seen.add(child)
            frontier.append((child, depth + 1))
    return pose

"""Termination detectors.

The structural predicates look only at the active-edge graph. Each one has a
degree-histogram precondition that is O(1) to test and is implied by the
full predicate; the connectivity part runs only when the precondition holds
and the edge set changed since the last full check.
"""

from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING

from .protocols import ProtocolSpec

if TYPE_CHECKING:
    from .engine import Configuration

__all__ = [
    "DetectorKind",
    "ConfigurationError",
    "is_spanning_line",
    "is_spanning_star",
    "is_cycle_cover",
    "is_spanning_ring",
    "is_counting_halted",
    "connected",
    "make_detector",
    "resolve_detector",
    "DEFAULT_DETECTORS",
]


class DetectorKind(str, Enum):
    SPANNING_LINE = "spanning-line"
    SPANNING_STAR = "spanning-star"
    CYCLE_COVER = "cycle-cover"
    SPANNING_RING = "spanning-ring"
    COUNTING_HALT = "counting-halt"
    NONE = "none"


class ConfigurationError(ValueError):
    """Detector and protocol do not fit together."""


DEFAULT_DETECTORS = {
    "fast-global-line": DetectorKind.SPANNING_LINE,
    "faster-global-line": DetectorKind.SPANNING_LINE,
    "global-star": DetectorKind.SPANNING_STAR,
    "cycle-cover": DetectorKind.CYCLE_COVER,
    "global-ring": DetectorKind.SPANNING_RING,
    "counting-upper-bound": DetectorKind.COUNTING_HALT,
}


def connected(n: int, nbrs) -> bool:
    """Union-find over the adjacency lists."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for u in range(n):
        for v in nbrs[u]:
            if u < v:
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
                    components -= 1
    return components == 1


# preconditions: histogram-only tests implied by the full predicates


def _line_pre(cfg: Configuration) -> bool:
    n, dc = cfg.n, cfg.degree_count
    if n == 2:
        return dc[1] == 2
    return dc[1] == 2 and dc[2] == n - 2


def _star_pre(cfg: Configuration) -> bool:
    n, dc = cfg.n, cfg.degree_count
    if n == 2:
        return dc[1] == 2
    return dc[1] == n - 1 and dc[n - 1] == 1


def _cycle_cover_pre(cfg: Configuration) -> bool:
    n, dc = cfg.n, cfg.degree_count
    if n == 2:
        # a single active edge is the two-node leftover component
        return dc[1] == 2
    d2 = dc[2]
    return d2 == n or (d2 == n - 1 and dc[0] == 1) or (d2 == n - 2 and dc[1] == 2)


def _ring_pre(cfg: Configuration) -> bool:
    return cfg.n >= 3 and cfg.degree_count[2] == cfg.n


def is_spanning_line(config: Configuration) -> bool:
    return (
        _line_pre(config)
        and config.num_edges == config.n - 1
        and connected(config.n, config.nbrs)
    )


def is_spanning_star(config: Configuration) -> bool:
    # n-1 leaves all attached to the single node of degree n-1: no extra test
    return _star_pre(config)


def is_cycle_cover(config: Configuration) -> bool:
    if not _cycle_cover_pre(config):
        return False
    n, dc = config.n, config.degree_count
    if n > 2 and dc[1] == 2:
        ends = [v for v in range(n) if config.degree[v] == 1]
        return config.has_edge(ends[0], ends[1])
    return True


def is_spanning_ring(config: Configuration) -> bool:
    if config.n < 3:
        raise ConfigurationError("a ring needs n >= 3")
    return _ring_pre(config) and connected(config.n, config.nbrs)


def is_counting_halted(config: Configuration) -> bool:
    return config.leader is not None and config.symbol(config.leader) == "halt"


_PREDICATES = {
    DetectorKind.SPANNING_LINE: (_line_pre, is_spanning_line),
    DetectorKind.SPANNING_STAR: (_star_pre, is_spanning_star),
    DetectorKind.CYCLE_COVER: (_cycle_cover_pre, is_cycle_cover),
    DetectorKind.SPANNING_RING: (_ring_pre, is_spanning_ring),
}


class Detector:
    """Callable convergence test bound to one configuration.

    ``structural`` detectors depend on the edge set only, so the run loop may
    skip them after interactions that left all edges unchanged.
    """

    def __init__(self, kind: DetectorKind, config: Configuration):
        self.kind = kind
        self.config = config
        self.structural = kind in _PREDICATES
        self._checked_version = -1
        self._last = False
        if self.structural:
            self._pre, self._full = _PREDICATES[kind]

    def check(self) -> bool:
        cfg = self.config
        if self.kind is DetectorKind.NONE:
            return False
        if self.kind is DetectorKind.COUNTING_HALT:
            return is_counting_halted(cfg)
        if not self._pre(cfg):
            return False
        if cfg.edge_version != self._checked_version:
            self._checked_version = cfg.edge_version
            self._last = self._full(cfg)
        return self._last


def resolve_detector(protocol: ProtocolSpec, detector) -> DetectorKind:
    """Pick the detector for a protocol and reject incompatible combinations."""
    if detector is None:
        kind = DEFAULT_DETECTORS.get(protocol.name, DetectorKind.NONE)
    else:
        kind = DetectorKind(detector)
    if protocol.is_counting and kind not in (DetectorKind.COUNTING_HALT, DetectorKind.NONE):
        raise ConfigurationError(
            f"detector {kind.value!r} does not apply to the counting protocol"
        )
    if not protocol.is_counting and kind is DetectorKind.COUNTING_HALT:
        raise ConfigurationError(
            f"counting-halt detector needs the counting protocol, got {protocol.name!r}"
        )
    return kind


def make_detector(kind: DetectorKind, config: Configuration) -> Detector:
    if kind is DetectorKind.SPANNING_RING and config.n < 3:
        raise ConfigurationError("the spanning-ring detector needs n >= 3")
    return Detector(kind, config)

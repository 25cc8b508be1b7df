"""Counter-based deterministic random streams.

Every random decision in the simulator is a pure function of
(seed, domain, node, counter), so results never depend on execution
interleaving, dict ordering, or platform RNG state.  The mixer is the
splitmix64 finalizer, applied to a wrapping combination of the key parts.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_K0 = 0x9E3779B97F4A7C15
_K1 = 0xBF58476D1CE4E5B9
_K2 = 0x94D049BB133111EB
_K3 = 0xC2B2AE3D27D4EB4F

# stream domains; keep values stable, they define the reproducible output
GRAPH = 0x01
NODE = 0x02

# per-node stream purpose tags
TAG_COLOR = 0
TAG_DRA = 1
TAG_HYPER = 2
TAG_SAMPLE = 3
TAG_PICK = 4
TAG_SOLVE = 5
TAG_PARENT = 6


def _mix(x: int) -> int:
    x &= _MASK
    x = (x ^ (x >> 30)) * _K1 & _MASK
    x = (x ^ (x >> 27)) * _K2 & _MASK
    return x ^ (x >> 31)


def _fold(seed: int, domain: int, a: int, b: int) -> int:
    x = (seed * _K0 + domain * _K3 + a * _K1 + b * _K2) & _MASK
    return _mix(x)


def pair_uniform(seed: int, u: int, v: int) -> float:
    """Uniform in [0, 1) keyed by an unordered node pair."""
    a, b = (u, v) if u < v else (v, u)
    return (_fold(seed, GRAPH, a, b) >> 11) * 2.0**-53


def pair_uniform_row(seed: int, u: int, vs: np.ndarray) -> np.ndarray:
    """Vectorized ``pair_uniform`` for a fixed u against v > u."""
    with np.errstate(over="ignore"):
        x = (
            np.uint64(seed * _K0 & _MASK)
            + np.uint64(GRAPH * _K3 & _MASK)
            + np.uint64(u * _K1 & _MASK)
            + vs.astype(np.uint64) * np.uint64(_K2)
        )
        x ^= x >> np.uint64(30)
        x *= np.uint64(_K1)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_K2)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


def node_uniform_array(seed: int, tag: int, nodes: np.ndarray, counter: int = 0) -> np.ndarray:
    """Vectorized first draws of per-node streams (bit-equal to Stream)."""
    with np.errstate(over="ignore"):
        x = (
            np.uint64(seed * _K0 & _MASK)
            + np.uint64(NODE * _K3 & _MASK)
            + nodes.astype(np.uint64) * np.uint64(_K1)
            + np.uint64(((tag << 32) + counter) * _K2 & _MASK)
        )
        x ^= x >> np.uint64(30)
        x *= np.uint64(_K1)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_K2)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


class Stream:
    """A node's deterministic draw sequence for one purpose tag."""

    __slots__ = ("seed", "node", "tag", "counter")

    def __init__(self, seed: int, node: int, tag: int):
        self.seed = seed
        self.node = node
        self.tag = tag
        self.counter = 0

    def random(self) -> float:
        x = _fold(self.seed, NODE, self.node, (self.tag << 32) + self.counter)
        self.counter += 1
        return (x >> 11) * 2.0**-53

    def randrange(self, k: int) -> int:
        return int(self.random() * k)

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def sample(self, seq, k: int) -> list:
        """k distinct items, partial Fisher-Yates over a copy."""
        items = list(seq)
        n = len(items)
        k = min(k, n)
        for i in range(k):
            j = i + self.randrange(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

"""Dense float64 primitives: block partitions and seeded RNG streams.

A BlockPartition maps each weight coordinate to one of m blocks; block_sum and
broadcast_blocks move vectors between the n-dimensional weight space and the
m-dimensional block space. All arithmetic is float64: the trace recursions are
derivative chains and accumulate error too fast in float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

# Every generator in this artifact is PCG64 keyed through SeedSequence, so a
# (seed, *path) pair always reproduces the same stream and streams are
# splittable per run / per step.
RNG_ALGORITHM = "pcg64"


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Return the deterministic PCG64 generator keyed by (seed, *path)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, path)])))


def as_vector(values, n: int | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"expected length {n}, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class BlockPartition:
    """Per-coordinate block assignment (arbitrary map, not contiguous ranges)."""

    assignment: np.ndarray
    block_count: int
    sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        m = int(self.block_count)
        if a.ndim != 1 or a.size == 0:
            raise DimensionError("assignment must be a non-empty 1-d array")
        if m > a.size:
            raise DimensionError(f"block count {m} exceeds dimension {a.size}")
        if a.min() < 0 or a.max() >= m:
            raise DimensionError("block indices must lie in [0, block_count)")
        sizes = np.bincount(a, minlength=m)
        if (sizes == 0).any():
            raise DimensionError("every block must be non-empty")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self) -> int:
        return self.assignment.size

    @property
    def is_identity(self) -> bool:
        return self.block_count == self.dim

    @staticmethod
    def scalar(n: int) -> "BlockPartition":
        return BlockPartition(np.zeros(n, dtype=np.int64), 1)

    @staticmethod
    def weightwise(n: int) -> "BlockPartition":
        return BlockPartition(np.arange(n, dtype=np.int64), n)

    @staticmethod
    def contiguous(n: int, m: int) -> "BlockPartition":
        """m near-equal contiguous blocks (layer-wise style grouping)."""
        edges = np.linspace(0, n, m + 1).astype(np.int64)
        a = np.zeros(n, dtype=np.int64)
        for j in range(m):
            a[edges[j]:edges[j + 1]] = j
        return BlockPartition(a, m)


def block_sum(v: np.ndarray, p: BlockPartition) -> np.ndarray:
    """out[j] = sum of v over the coordinates assigned to block j."""
    v = as_vector(v, p.dim)
    if p.block_count == 1:
        return np.array([float(v.sum())])
    return np.bincount(p.assignment, weights=v, minlength=p.block_count)


def broadcast_blocks(u: np.ndarray, p: BlockPartition) -> np.ndarray:
    """out[i] = u[assignment[i]]."""
    u = as_vector(u, p.block_count)
    return u[p.assignment]

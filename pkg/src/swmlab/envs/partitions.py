"""Set partitions in restricted-growth-string order.

A partition of {0..n-1} is encoded as a tuple ``g`` where ``g[i]`` is the
block index of element i and blocks are numbered by first appearance
(``g[0] == 0`` and ``g[i] <= max(g[:i]) + 1``). Enumeration is
lexicographic over these strings, so the all-singletons partition
(0,1,...,n-1) is always last and the one-block partition (0,...,0) first.
"""

from __future__ import annotations

from functools import lru_cache

__all__ = ["enumerate_partitions", "bell_number", "partition_blocks"]


@lru_cache(maxsize=None)
def enumerate_partitions(n: int) -> tuple[tuple[int, ...], ...]:
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    out: list[tuple[int, ...]] = []

    def grow(prefix: list[int], top: int) -> None:
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for b in range(top + 2):
            prefix.append(b)
            grow(prefix, max(top, b))
            prefix.pop()

    grow([0], 0)
    return tuple(out)


def bell_number(n: int) -> int:
    return len(enumerate_partitions(n))


def partition_blocks(g: tuple[int, ...]) -> list[list[int]]:
    """Blocks as member lists, ordered by block index."""
    blocks: list[list[int]] = [[] for _ in range(max(g) + 1)]
    for i, b in enumerate(g):
        blocks[b].append(i)
    return blocks

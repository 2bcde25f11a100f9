"""Slab with conducting walls at ``x = +-a`` and periodic ``y``, ``z``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class SlabGeometry:
    """Uniform staggered grid on ``[-a, a]``.

    ``N`` counts nodes including both walls, so there are ``N - 1`` cells of
    width ``h = 2a/(N-1)``.  Normal components live at cell centres,
    wall-parallel derivatives at nodes.
    """

    a: float = np.pi
    Ly: float = 4 * np.pi
    Lz: float = 4 * np.pi
    N: int = 256

    def __post_init__(self):
        if not (self.a > 0 and self.Ly > 0 and self.Lz > 0):
            raise DomainError("a, Ly and Lz must be positive")
        if int(self.N) != self.N or self.N < 16:
            raise DomainError("grid needs N >= 16 nodes")

    @property
    def cells(self):
        return self.N - 1

    @property
    def h(self):
        return 2.0 * self.a / (self.N - 1)

    @cached_property
    def nodes(self):
        return np.linspace(-self.a, self.a, self.N)

    @cached_property
    def centers(self):
        return -self.a + (np.arange(self.cells) + 0.5) * self.h

    @cached_property
    def node_weights(self):
        w = np.full(self.N, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def wavenumbers(self, my: int, mz: int):
        return 2.0 * np.pi * my / self.Ly, 2.0 * np.pi * mz / self.Lz

    def refined(self, factor: int = 2):
        """Same slab with each cell split into ``factor`` cells."""
        return SlabGeometry(self.a, self.Ly, self.Lz, (self.N - 1) * factor + 1)

    def with_nodes(self, N: int):
        return SlabGeometry(self.a, self.Ly, self.Lz, N)

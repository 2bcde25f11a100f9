"""Resonant surfaces ``k.B(x) = 0`` and the kernel element they carry.

At a resonant surface the linear induction operator ``T = curl(v x B)``
fails to be surjective; the missing direction is spanned by a field ``b``
whose wall-parallel component jumps across the surface.  ``<B, b>`` is then
a Casimir of the linearized dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from ..errors import NoResonance, PlacementError
from .beltrami import BeltramiEquilibrium
from .spectral import ModeField, ModeSpace

SCAN_POINTS = 4096


def _resonance_function(eq, ky, kz):
    return lambda x: ky * eq.By(x) + kz * eq.Bz(x)


def find_resonant_surface(eq: BeltramiEquilibrium, ky: float, kz: float,
                          tol: float = 1e-12) -> np.ndarray:
    """All roots of ``k.B`` in ``(-a, a)``, refined by Brent's method."""
    if ky == 0 and kz == 0:
        raise NoResonance("k = 0 has no resonant surface")
    g = _resonance_function(eq, ky, kz)
    x = np.linspace(-eq.a, eq.a, SCAN_POINTS + 1)
    vals = g(x)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        raise NoResonance("k.B vanishes identically")
    roots = []
    for i in range(SCAN_POINTS):
        lo, hi = vals[i], vals[i + 1]
        if lo == 0.0:
            if 0 < i:
                roots.append(x[i])
            continue
        if lo * hi < 0:
            r = scipy.optimize.brentq(g, x[i], x[i + 1], xtol=1e-15 * eq.a, rtol=4 * np.finfo(float).eps)
            roots.append(r)
    roots = np.array([r for r in roots if abs(g(r)) <= tol * scale * 10 and abs(r) < eq.a])
    if roots.size == 0:
        raise NoResonance(f"k.B has no zero inside the slab for k = ({ky}, {kz})")
    return np.unique(roots)


@dataclass(frozen=True)
class KernelElement:
    """Unit kernel field ``b`` in solenoidal coordinates.

    ``step_coefficient`` is ``c_1`` of ``theta = c_0 + c_1 Y(x - x_dagger)``,
    the profile whose ``i k theta`` gives the wall-parallel jump.
    ``cell`` is the index of the cell whose centre is closest to the
    surface and ``offset`` its distance; the discrete pairing is an exact
    invariant only when the offset is zero.
    """

    field: ModeField
    x_dagger: float
    cell: int
    offset: float
    step_coefficient: float
    step_offset: float
    kernel_residual: float

    @property
    def space(self):
        return self.field.space

    @property
    def coeffs(self):
        return self.field.coeffs

    def step_profile(self):
        """Literal ``b_par = i|k| theta`` at the nodes."""
        sp = self.space
        x = sp.geometry.nodes
        theta = self.step_offset + self.step_coefficient * (x > self.x_dagger)
        return 1j * sp.k * theta


def build_kernel_element(space: ModeSpace, eq: BeltramiEquilibrium, x_dagger: float,
                         node_tol: float = 1e-9) -> KernelElement:
    """Solenoidal projection of the step field, normalized to unit norm.

    The literal step is placed between the two nodes bracketing ``x_dagger``;
    a surface on (or within ``node_tol * h`` of) a node is ambiguous and
    raises :class:`PlacementError`.
    """
    g = space.geometry
    h = g.h
    if not (-g.a < x_dagger < g.a):
        raise PlacementError(f"x_dagger={x_dagger} outside the slab")
    s = (x_dagger + g.a) / h
    j = int(np.floor(s))
    if min(s - j, j + 1 - s) < node_tol:
        raise PlacementError(f"x_dagger={x_dagger} sits on grid node {int(round(s))}")
    M = space.M
    e = np.zeros(M)
    e[j] = 1.0
    col = scipy.linalg.cho_solve(space._Wf_chol, e)
    c1 = 1.0 / np.sqrt(col[j])
    coeffs = np.concatenate([-c1 * col, np.zeros(M)]).astype(complex)
    # zero-mean offset for the literal step
    w = g.node_weights
    Y = (g.nodes > x_dagger).astype(float)
    c0 = -c1 * np.dot(w, Y) / w.sum()
    offset = x_dagger - g.centers[j]
    # weak-form residual |T^dagger b| relative to |T| ~ |k| max|B_par|
    bpar = eq.B_par(g.centers[j], space.ky, space.kz)
    bmax = max(np.max(np.abs(eq.B_par(g.centers, space.ky, space.kz))), 1e-300)
    residual = abs(bpar) / bmax
    return KernelElement(space.field(coeffs), float(x_dagger), j, float(offset),
                         float(c1), float(c0), float(residual))


def casimir_pairing(b: KernelElement, B) -> complex:
    """``C_b(B) = <B, b>``; fields of another Fourier mode pair to zero."""
    sp = getattr(B, "space", None)
    if sp is not None and not b.space.same_mode(sp):
        return 0.0 + 0.0j
    c = getattr(B, "coeffs", B)
    return b.space.inner(c, b.coeffs)

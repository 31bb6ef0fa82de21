"""Interaction maps, their decay-weighted norm, surface sets and boundaries."""

import numpy as np

from .geometry import canonical_sites
from .observables import HERMITICITY_TOL, LocalOperator, operator_norm


class Interaction:
    """Finite map from site subsets Z to self-adjoint local terms.

    Supports are canonicalized on ingestion, zero-matrix terms are dropped,
    and term norms are computed from the matrices (never user-asserted).
    """

    def __init__(self, terms=()):
        self._terms = {}
        self._norms = {}
        for op in terms:
            if not isinstance(op, LocalOperator):
                raise ValueError("interaction terms must be LocalOperator instances")
            if len(op.support) == 0:
                raise ValueError("interaction terms need nonempty support")
            if not op.is_self_adjoint(HERMITICITY_TOL):
                raise ValueError(f"interaction term on {op.support} is not self-adjoint")
            if np.all(op.matrix == 0):
                continue
            if op.support in self._terms:
                raise ValueError(f"duplicate interaction term on {op.support}")
            self._terms[op.support] = op
        self._supports = tuple(sorted(self._terms))

    def supports(self):
        return self._supports

    def terms(self):
        return [(z, self._terms[z]) for z in self._supports]

    def term(self, sites):
        return self._terms[canonical_sites(sites)]

    def term_norm(self, sites):
        z = canonical_sites(sites)
        if z not in self._norms:
            self._norms[z] = operator_norm(self._terms[z])
        return self._norms[z]

    def restrict(self, volume):
        """Keep only terms fully contained in the given site set."""
        vol = set(canonical_sites(volume))
        return Interaction([op for z, op in self.terms() if set(z) <= vol])

    def __len__(self):
        return len(self._terms)


def interaction_norm(phi, lattice, F):
    """Best constant bounding sum_{Z containing x,y} ||phi(Z)|| by F(d(x,y)).

    The supremum runs over all site pairs, including x = y.
    """
    if len(phi) == 0:
        return 0.0
    n = len(lattice)
    pair_sums = np.zeros((n, n))
    for z, _ in phi.terms():
        idx = [lattice.index(s) for s in z]
        pair_sums[np.ix_(idx, idx)] += phi.term_norm(z)
    return float(np.max(pair_sums / F(lattice.distances)))


def surface_sets(phi, volume, X):
    """Stored terms crossing the boundary of X inside the volume, sorted."""
    vol = canonical_sites(volume)
    X = canonical_sites(X)
    if not set(X) <= set(vol):
        raise ValueError(f"X {X} is not contained in the volume {vol}")
    xset = set(X)
    rest = set(vol) - xset
    out = []
    for z in phi.supports():
        zset = set(z)
        if zset <= set(vol) and zset & xset and zset & rest:
            out.append(z)
    return out


def phi_boundary(phi, volume, X):
    """Sites of X touched by a nonzero crossing term."""
    boundary = set()
    for z in surface_sets(phi, volume, X):
        boundary.update(set(z) & set(X))
    return canonical_sites(boundary)


def supports_overlap(X, Y):
    return 1 if set(X) & set(Y) else 0


def distance_factor_minimands(phi, lattice, F, X, Y):
    """The two boundary-weighted double sums whose minimum is D(X, Y).

    Boundaries are taken with respect to the full lattice.
    """
    X = lattice.require_sites(X)
    Y = lattice.require_sites(Y)
    if not X or not Y:
        raise ValueError("distance factor needs nonempty site sets")
    bx = phi_boundary(phi, lattice.sites, X)
    by = phi_boundary(phi, lattice.sites, Y)
    m1 = float(np.sum(F(lattice.submatrix(X, by)))) if by else 0.0
    m2 = float(np.sum(F(lattice.submatrix(bx, Y)))) if bx else 0.0
    return m1, m2


def distance_factor(phi, lattice, F, X, Y):
    """D(X, Y): the smaller of the two boundary-weighted sums of F."""
    m1, m2 = distance_factor_minimands(phi, lattice, F, X, Y)
    return min(m1, m2)

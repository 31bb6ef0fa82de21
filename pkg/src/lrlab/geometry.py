"""Finite site sets with a metric, and the decay profiles that weight interactions.

A lattice is a finite collection of sites together with an explicit distance
table.  Decay functions F are positive and nonincreasing; their uniform sum
norm ||F|| and convolution constant C are the geometric constants entering
every bound.
"""

import numpy as np

_METRIC_TOL = 1e-12
_MONOTONE_GRID = np.linspace(0.0, 64.0, 257)


def canonical_sites(sites):
    """Sorted, deduplicated tuple of site identifiers."""
    try:
        return tuple(sorted(set(sites)))
    except TypeError as exc:
        raise ValueError(f"site identifiers must be mutually sortable: {exc}") from None


class Lattice:
    """Finite set of sites with an explicit metric.

    Sites are stored in sorted order; this ordering is the global convention
    used by every tensor-product construction downstream.  The metric is kept
    as a dense distance table and validated (symmetry, zero diagonal,
    positivity off the diagonal, triangle inequality) on construction.
    """

    def __init__(self, sites, distances, edge_sites=()):
        given = list(sites)
        if len(given) == 0:
            raise ValueError("lattice must contain at least one site")
        if len(set(given)) != len(given):
            raise ValueError("lattice sites must be distinct")
        order = canonical_sites(given)
        perm = [given.index(s) for s in order]
        D = np.asarray(distances, dtype=float)
        if D.shape != (len(given), len(given)):
            raise ValueError(f"distance table must be {len(given)}x{len(given)}, got {D.shape}")
        D = D[np.ix_(perm, perm)]
        _validate_metric(D)
        self.sites = order
        self.distances = D
        self.distances.setflags(write=False)
        self.edge_sites = tuple(s for s in order if s in set(edge_sites))
        self._index = {s: i for i, s in enumerate(order)}

    def __len__(self):
        return len(self.sites)

    def index(self, site):
        try:
            return self._index[site]
        except KeyError:
            raise ValueError(f"site {site!r} is not in the lattice") from None

    def metric(self, x, y):
        return float(self.distances[self.index(x), self.index(y)])

    def require_sites(self, subset):
        """Canonicalize a site subset and check membership."""
        sub = canonical_sites(subset)
        for s in sub:
            self.index(s)
        return sub

    def submatrix(self, xs, ys):
        """Distance block d(x, y) for x in xs, y in ys."""
        ix = [self.index(s) for s in xs]
        iy = [self.index(s) for s in ys]
        return self.distances[np.ix_(ix, iy)]


def _validate_metric(D):
    n = D.shape[0]
    if not np.all(np.isfinite(D)):
        raise ValueError("distances must be finite")
    if np.max(np.abs(np.diag(D))) > _METRIC_TOL:
        raise ValueError("metric must vanish on the diagonal")
    if np.max(np.abs(D - D.T)) > _METRIC_TOL:
        raise ValueError("metric must be symmetric")
    off = D + np.eye(n)
    if np.min(off) <= 0.0:
        raise ValueError("distinct sites must be at positive distance")
    for k in range(n):
        if np.min(D[:, k, None] + D[None, k, :] - D) < -_METRIC_TOL:
            raise ValueError("triangle inequality violated")


def chain(n_sites):
    """Open chain on sites 0..n-1 with d(i, j) = |i - j|."""
    idx = np.arange(n_sites)
    D = np.abs(idx[:, None] - idx[None, :]).astype(float)
    edges = (0, n_sites - 1) if n_sites > 1 else ()
    return Lattice(list(range(n_sites)), D, edge_sites=edges)


def grid2d(rows, cols):
    """Rectangular grid on sites (r, c) with the Euclidean metric."""
    sites = [(r, c) for r in range(rows) for c in range(cols)]
    coords = np.array(sites, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    D = np.sqrt(np.sum(diff**2, axis=2))
    edges = [(r, c) for (r, c) in sites
             if r in (0, rows - 1) or c in (0, cols - 1)]
    return Lattice(sites, D, edge_sites=edges)


def explicit(sites, distances):
    """Lattice from a user-supplied distance table (row order = given site order)."""
    return Lattice(sites, distances)


def set_distance(lattice, X, Y):
    """d(X, Y) = min over x in X, y in Y of d(x, y)."""
    X = lattice.require_sites(X)
    Y = lattice.require_sites(Y)
    if not X or not Y:
        raise ValueError("set distance needs nonempty site sets")
    return float(np.min(lattice.submatrix(X, Y)))


class DecayFunction:
    """Positive, nonincreasing decay profile r -> F(r).

    `rate` marks an exponential weight already applied to `base`, i.e. this
    function is e^{-rate*r} * base(r).  Positivity and monotonicity are
    spot-checked on a sampled grid at construction.
    """

    def __init__(self, evaluate, rate=0.0, base=None):
        if rate < 0.0:
            raise ValueError("exponential rate must be nonnegative")
        self.evaluate = _vectorized(evaluate)
        self.rate = float(rate)
        self.base = base
        self._spot_check()

    def __call__(self, r):
        return self.evaluate(r)

    def _spot_check(self):
        vals = np.asarray(self.evaluate(_MONOTONE_GRID), dtype=float)
        if vals.shape != _MONOTONE_GRID.shape:
            raise ValueError("decay function must evaluate elementwise on arrays")
        if not np.all(np.isfinite(vals)) or np.min(vals) <= 0.0:
            raise ValueError("decay function must be finite and strictly positive")
        if np.any(np.diff(vals) > _METRIC_TOL * np.abs(vals[:-1])):
            raise ValueError("decay function must be nonincreasing")


def _vectorized(fn):
    try:
        out = fn(np.array([0.0, 1.0]))
        if np.shape(out) == (2,):
            return fn
    except Exception:
        pass
    return np.vectorize(fn, otypes=[float])


def power_law(p):
    """F(r) = (1 + r)^(-p)."""
    p = float(p)
    if p <= 0.0:
        raise ValueError("power-law exponent must be positive")
    return DecayFunction(lambda r: (1.0 + np.asarray(r, dtype=float)) ** (-p))


def exp_power(a, p):
    """F(r) = e^(-a r) (1 + r)^(-p), recorded as a weighted power law."""
    a = float(a)
    if a <= 0.0:
        raise ValueError("exponential rate must be positive")
    return apply_exponential_weight(power_law(p), a)


def f_norm(lattice, F):
    """sup over x of the sum over all y (including y = x) of F(d(x, y))."""
    vals = F(lattice.distances)
    return float(np.max(np.sum(vals, axis=1)))


def convolution_constant(lattice, F):
    """sup over (x, y) of sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y))."""
    vals = F(lattice.distances)
    return float(np.max((vals @ vals) / vals))


def apply_exponential_weight(F, a):
    """Weight F by e^(-a r); rates compose additively."""
    a = float(a)
    if a <= 0.0:
        raise ValueError("exponential weight must be positive")
    inner = F.evaluate
    base = F.base if F.base is not None else F
    return DecayFunction(lambda r: np.exp(-a * np.asarray(r, dtype=float)) * inner(r),
                         rate=F.rate + a, base=base)

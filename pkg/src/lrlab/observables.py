"""Finite-dimensional local operators: site models, tensor embedding, norms.

Every matrix lives over an ordered tensor factorization fixed by the global
site ordering (sorted site identifiers).  Operators are immutable after
construction; all operations here are pure.
"""

import os
import warnings

import numpy as np

from .errors import ResourceCapError
from .geometry import canonical_sites

HERMITICITY_TOL = 1e-12
DEFAULT_DIMENSION_CAP = 4096

SPIN = "spin"
TRUNCATED_OSCILLATOR = "truncated_oscillator"
EXPLICIT = "explicit"


def dimension_cap():
    """Dense-matrix dimension cap; override with the LRLAB_MAX_DIM env var."""
    raw = os.environ.get("LRLAB_MAX_DIM")
    if raw is None:
        return DEFAULT_DIMENSION_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"LRLAB_MAX_DIM must be an integer, got {raw!r}") from None
    if cap < 2:
        raise ValueError("LRLAB_MAX_DIM must be at least 2")
    return cap


def _as_matrix(matrix):
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    m.setflags(write=False)
    return m


def max_entry_asymmetry(matrix):
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


class SiteModel:
    """On-site Hilbert space truncation: local dimension plus self-adjoint term."""

    def __init__(self, kind, local_dim, onsite_hamiltonian):
        if local_dim < 2:
            raise ValueError("local dimension must be at least 2")
        h = _as_matrix(onsite_hamiltonian)
        if h.shape[0] != local_dim:
            raise ValueError(f"on-site term has dimension {h.shape[0]}, expected {local_dim}")
        if max_entry_asymmetry(h) > HERMITICITY_TOL:
            raise ValueError("on-site Hamiltonian must be self-adjoint")
        self.kind = kind
        self.local_dim = int(local_dim)
        self.onsite_hamiltonian = h


def spin_matrices(local_dim):
    """Standard spin-S operators (Sx, Sy, Sz) for local dimension 2S + 1."""
    m = local_dim
    sp = np.zeros((m, m), dtype=complex)
    for i in range(1, m):
        sp[i - 1, i] = np.sqrt(i * (m - i))
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    sz = np.diag([0.5 * (m - 1.0) - i for i in range(m)]).astype(complex)
    return sx, sy, sz


def spin_site(local_dim=2, field_x=0.0, field_z=0.0):
    """Spin site with on-site term field_x*Sx + field_z*Sz."""
    sx, _, sz = spin_matrices(local_dim)
    return SiteModel(SPIN, local_dim, field_x * sx + field_z * sz)


def explicit_site(matrix):
    m = _as_matrix(matrix)
    return SiteModel(EXPLICIT, m.shape[0], m)


def lowering_operator(n_levels):
    """Truncated ladder operator a with a|k> = sqrt(k)|k-1>."""
    a = np.zeros((n_levels, n_levels), dtype=complex)
    for k in range(1, n_levels):
        a[k - 1, k] = np.sqrt(k)
    return a


def position_operator(n_levels):
    a = lowering_operator(n_levels)
    return (a + a.conj().T) / np.sqrt(2.0)


def truncate_oscillator(n_levels, anharmonic_strength=0.0):
    """n-level oscillator N + 1/2 plus an anharmonic quartic in position.

    The quartic is built from truncated ladder operators and symmetrized
    (M + M*)/2; a warning is emitted if the symmetrization correction
    exceeds 1e-10, since truncation can break self-adjointness at the
    boundary of the retained levels.
    """
    if n_levels < 2:
        raise ValueError("oscillator truncation needs at least 2 levels")
    h = np.diag(np.arange(n_levels) + 0.5).astype(complex)
    if anharmonic_strength != 0.0:
        x4 = np.linalg.matrix_power(position_operator(n_levels), 4)
        correction = max_entry_asymmetry(anharmonic_strength * x4)
        if correction > 1e-10:
            warnings.warn(f"symmetrization correction {correction:.3e} exceeds 1e-10")
        x4 = 0.5 * (x4 + x4.conj().T)
        h = h + anharmonic_strength * x4
    return SiteModel(TRUNCATED_OSCILLATOR, n_levels, h)


class LocalOperator:
    """Complex matrix together with its (sorted) support and per-site dims."""

    def __init__(self, support, matrix, site_dims):
        support = tuple(support)
        if list(support) != sorted(set(support)):
            raise ValueError("support must be strictly increasing in the global site order")
        site_dims = tuple(int(d) for d in site_dims)
        if len(site_dims) != len(support):
            raise ValueError("one local dimension per support site is required")
        if any(d < 1 for d in site_dims):
            raise ValueError("local dimensions must be positive")
        m = _as_matrix(matrix)
        expected = int(np.prod(site_dims)) if site_dims else 1
        if m.shape[0] != expected:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match support dimensions "
                f"{site_dims} (product {expected})")
        self.support = support
        self.matrix = m
        self.site_dims = site_dims

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def is_self_adjoint(self, tol=HERMITICITY_TOL):
        return max_entry_asymmetry(self.matrix) <= tol


def identity_operator(volume, dims):
    volume = canonical_sites(volume)
    site_dims = tuple(int(dims[s]) for s in volume)
    n = int(np.prod(site_dims)) if site_dims else 1
    return LocalOperator(volume, np.eye(n, dtype=complex), site_dims)


def embed(op, volume, dims):
    """Embed op as op (tensor) identity on the larger volume.

    The result acts as `op` on its support and trivially elsewhere; rows and
    columns follow the global sorted-site ordering of `volume`.
    """
    volume = canonical_sites(volume)
    if not set(op.support) <= set(volume):
        raise ValueError(f"support {op.support} is not contained in the volume {volume}")
    for s, d in zip(op.support, op.site_dims):
        if int(dims[s]) != d:
            raise ValueError(f"operator dimension {d} at site {s!r} disagrees with volume dims")
    full_dims = [int(dims[s]) for s in volume]
    total = int(np.prod(full_dims))
    if total > dimension_cap():
        raise ResourceCapError(
            f"volume dimension {total} exceeds the cap {dimension_cap()} "
            "(set LRLAB_MAX_DIM to override)")
    if op.support == volume:
        return LocalOperator(volume, op.matrix, tuple(full_dims))
    rest = [s for s in volume if s not in set(op.support)]
    rest_dim = int(np.prod([int(dims[s]) for s in rest])) if rest else 1
    big = np.kron(op.matrix, np.eye(rest_dim, dtype=complex))
    order_now = list(op.support) + rest
    tdims = [int(dims[s]) for s in order_now]
    tensor = big.reshape(tdims + tdims)
    perm = [order_now.index(s) for s in volume]
    n_axes = len(volume)
    tensor = tensor.transpose(perm + [n_axes + p for p in perm])
    return LocalOperator(volume, np.ascontiguousarray(tensor.reshape(total, total)),
                         tuple(full_dims))


def operator_norm(op):
    """Largest singular value; largest |eigenvalue| for self-adjoint input."""
    m = op.matrix if isinstance(op, LocalOperator) else np.asarray(op, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("operator norm of a non-finite matrix")
    if m.size == 0:
        return 0.0
    if max_entry_asymmetry(m) == 0.0:
        return float(np.max(np.abs(np.linalg.eigvalsh(m)))) if m.shape[0] else 0.0
    return float(np.linalg.norm(m, 2))


def commutator(a, b, volume, dims):
    """[a, b] embedded into the given volume."""
    ae = embed(a, volume, dims)
    be = embed(b, volume, dims)
    m = ae.matrix @ be.matrix - be.matrix @ ae.matrix
    return LocalOperator(ae.support, m, ae.site_dims)


def adjoint(op):
    return LocalOperator(op.support, op.matrix.conj().T, op.site_dims)


# Named single-site observables used by the experiment configs.

def pauli_x():
    return np.array([[0, 1], [1, 0]], dtype=complex)


def pauli_y():
    return np.array([[0, -1j], [1j, 0]], dtype=complex)


def pauli_z():
    return np.array([[1, 0], [0, -1]], dtype=complex)


def shift_unitary(dim):
    """Cyclic shift |k> -> |k+1 mod dim>; unitary for any local dimension."""
    s = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        s[(k + 1) % dim, k] = 1.0
    return s


def clock_unitary(dim):
    return np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))

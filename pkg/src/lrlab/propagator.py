"""Operator evolution with time-dependent bounded generators.

The propagator for dV/dt = A(t)V is built from its iterated-integral series,
truncated at an order chosen from the analytic tail estimate
(M|dt|)^(n+1)/(n+1)! and evaluated by a composite quadrature that is refined
(grid halved) until successive results differ by at most half the requested
tolerance.  Long intervals are split into subintervals of length <= 1/(2M)
and composed through the cocycle property, which keeps the series order small
and the conditioning good.
"""

import math

import numpy as np

from .errors import PropagatorAccuracyError

_LOCAL_BOUND_SAMPLES = 64
_LOCAL_BOUND_SAFETY = 1.25
_MAX_SERIES_ORDER = 60
_MAX_QUADRATURE_NODES = 2**14
_SELF_ADJOINT_TOL = 1e-12


class GeneratorFamily:
    """Time-dependent square matrix t -> A(t), continuous on working intervals.

    `self_adjoint` declares that the family consists of self-adjoint matrices
    (an H(t) whose generator is -iH(t), or the A(t) of a Heisenberg-type
    source equation); it is spot-checked where required.
    """

    def __init__(self, evaluate, self_adjoint=False):
        self.evaluate = evaluate
        self.self_adjoint = bool(self_adjoint)

    def sample(self, times):
        """Stack A(t) over the given times; validates finiteness and shape."""
        mats = [np.asarray(self.evaluate(float(t)), dtype=complex) for t in times]
        dim = mats[0].shape
        if len(dim) != 2 or dim[0] != dim[1]:
            raise ValueError(f"generator must return square matrices, got shape {dim}")
        for t, m in zip(times, mats):
            if m.shape != dim:
                raise ValueError("generator dimension changed along the interval")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"generator is non-finite at t = {t}")
        return np.stack(mats)

    def local_bound(self, t0, t1, samples=_LOCAL_BOUND_SAMPLES):
        """Sampled sup of ||A(t)|| on [t0, t1], inflated by a safety factor."""
        ts = np.linspace(min(t0, t1), max(t0, t1), max(2, samples))
        mats = self.sample(ts)
        norms = [np.linalg.norm(m, 2) for m in mats]
        return _LOCAL_BOUND_SAFETY * float(max(norms))

    def validate(self, t0, t1):
        """Spot-check continuity (and self-adjointness when declared)."""
        lo, hi = min(t0, t1), max(t0, t1)
        span = hi - lo if hi > lo else 1.0
        probes = np.linspace(lo, hi, 5)
        mats = self.sample(probes)
        scale = max(1.0, max(np.linalg.norm(m, 2) for m in mats))
        for s in probes:
            sign = -1.0 if s == hi else 1.0
            coarse = _diff_norm(self.evaluate, s, sign * 1e-4 * span)
            fine = _diff_norm(self.evaluate, s, sign * 1e-6 * span)
            # continuous families scale roughly linearly in h; a flat plateau
            # signals a jump near s
            if coarse > 1e-6 * scale and fine > 0.5 * coarse:
                raise ValueError(f"generator looks discontinuous near t = {s}")
        if self.self_adjoint:
            defect = max(float(np.linalg.norm(m - m.conj().T, 2)) for m in mats)
            if defect > _SELF_ADJOINT_TOL:
                raise ValueError(f"generator family is not self-adjoint (defect {defect:.3e})")


def _diff_norm(evaluate, s, h):
    a = np.asarray(evaluate(s + h), dtype=complex)
    b = np.asarray(evaluate(s), dtype=complex)
    return float(np.linalg.norm(a - b, 2))


class Propagator:
    """Solution matrix on an interval plus the series bookkeeping behind it."""

    def __init__(self, value, interval, order_used, tail_bound):
        self.value = value
        self.interval = (float(interval[0]), float(interval[1]))
        self.order_used = int(order_used)
        self.tail_bound = float(tail_bound)


def _cumulative_integral(samples, h):
    """Cumulative integral of uniformly gridded samples, 4th-order composite.

    samples has shape (K+1, ...); returns the running integral from node 0,
    same shape.  Interval increments use the cubic through the four nearest
    nodes; falls back to the trapezoid rule when fewer than four nodes exist.
    """
    K = samples.shape[0] - 1
    out = np.zeros_like(samples)
    if K == 0:
        return out
    if K < 3:
        inc = 0.5 * h * (samples[:-1] + samples[1:])
    else:
        s = samples
        inc = (h / 24.0) * (-s[:-3] + 13.0 * s[1:-2] + 13.0 * s[2:-1] - s[3:])
        first = (h / 24.0) * (9.0 * s[0] + 19.0 * s[1] - 5.0 * s[2] + s[3])
        last = (h / 24.0) * (s[-4] - 5.0 * s[-3] + 19.0 * s[-2] + 9.0 * s[-1])
        inc = np.concatenate([first[None], inc, last[None]], axis=0)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def _series_on_grid(a_samples, v_start, h, order, side):
    """Partial sum of the iterated-integral series at every grid node.

    side 'left' solves dV = A V (terms  I_n = int A I_{n-1});
    side 'right' solves dW = -W A (terms I_n = -int I_{n-1} A).
    """
    nodes = a_samples.shape[0]
    term = np.broadcast_to(v_start, (nodes,) + v_start.shape).copy()
    total = term.copy()
    for _ in range(order):
        if side == "left":
            integrand = a_samples @ term
            term = _cumulative_integral(integrand, h)
        else:
            integrand = term @ a_samples
            term = -_cumulative_integral(integrand, h)
        total += term
    return total


def _choose_order(m_delta, start_norm, budget):
    """Smallest series order whose analytic tail is below the budget."""
    scale = max(start_norm, 1e-300)
    for n in range(1, _MAX_SERIES_ORDER + 1):
        tail = 1.5 * m_delta ** (n + 1) / math.factorial(n + 1) * scale
        if tail <= budget:
            return n, tail
    raise PropagatorAccuracyError(
        f"series order cap exceeded (M*dt = {m_delta:.3g}); interval splitting failed")


def _solve_interval(fam, a, b, v_start, order, budget, side):
    """One subinterval: refine the quadrature grid until converged."""
    nodes = 16
    prev = None
    while nodes <= _MAX_QUADRATURE_NODES:
        ts = np.linspace(a, b, nodes + 1)
        h = (b - a) / nodes
        samples = fam.sample(ts)
        value = _series_on_grid(samples, v_start, h, order, side)[-1]
        if prev is not None and float(np.linalg.norm(value - prev, 2)) <= budget:
            return value
        prev = value
        nodes *= 2
    raise PropagatorAccuracyError(
        f"quadrature did not converge below {budget:.3e} on [{a}, {b}]")


def _propagate(fam, t0, t, v0, tol, side, norm_preserving):
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    v0 = np.ascontiguousarray(np.asarray(v0, dtype=complex))
    if v0.ndim != 2 or v0.shape[0] != v0.shape[1]:
        raise ValueError("initial value must be a square matrix")
    if not np.all(np.isfinite(v0)):
        raise ValueError("initial value must be finite")
    if t == t0:
        return v0.copy(), 0, 0.0
    fam.validate(t0, t)
    span = abs(t - t0)
    M = fam.local_bound(t0, t)
    if M == 0.0:
        return v0.copy(), 0, 0.0
    n_steps = max(1, math.ceil(2.0 * M * span))
    boundaries = np.linspace(t0, t, n_steps + 1)
    delta = span / n_steps
    value = v0.copy()
    tail_total = 0.0
    max_order = 0
    for k in range(n_steps):
        remaining = span - (k + 1) * delta
        growth = 1.0 if norm_preserving else math.exp(min(M * remaining, 500.0))
        budget = tol / (2.0 * n_steps * growth)
        start_norm = float(np.linalg.norm(value, 2))
        order, tail = _choose_order(M * delta, start_norm, budget / 2.0)
        value = _solve_interval(fam, boundaries[k], boundaries[k + 1],
                                value, order, budget / 2.0, side)
        tail_total += tail * growth
        max_order = max(max_order, order)
    return value, max_order, tail_total


def dyson_solve(A, t0, t, V0, tol):
    """Solve dV/dt = A(t) V, V(t0) = V0, to the requested tolerance."""
    value, order, tail = _propagate(A, t0, t, V0, tol, "left", norm_preserving=False)
    return Propagator(value, (t0, t), order, tail)


def dyson_inverse(A, t0, t, V0_inverse, tol):
    """Solve dW/dt = -W A(t), W(t0) = V0^(-1); W is the inverse of dyson_solve."""
    w0 = np.asarray(V0_inverse, dtype=complex)
    if not np.all(np.isfinite(w0)):
        raise ValueError("initial inverse must be finite")
    if w0.ndim != 2 or w0.shape[0] != w0.shape[1] or np.linalg.cond(w0) > 1e14:
        raise ValueError("initial value is singular or not a square matrix")
    value, order, tail = _propagate(A, t0, t, w0, tol, "right", norm_preserving=False)
    return Propagator(value, (t0, t), order, tail)


def unitary_propagator(H, s, t, tol):
    """Two-parameter unitary U(t, s) generated by -iH(t).

    Requires a family declared (and spot-checked) self-adjoint.  The result
    satisfies ||U*U - 1|| <= 10 tol and U(t, s)* = U(s, t) to the same slack.
    """
    if not H.self_adjoint:
        raise ValueError("unitary propagation needs a self-adjoint generator family")
    H.validate(s, t)
    generator = GeneratorFamily(lambda u: -1j * np.asarray(H.evaluate(u), dtype=complex))
    probe = np.asarray(H.evaluate(float(s)), dtype=complex)
    eye = np.eye(probe.shape[0], dtype=complex)
    value, order, tail = _propagate(generator, s, t, eye, tol, "left", norm_preserving=True)
    defect = float(np.linalg.norm(value.conj().T @ value - eye, 2))
    if defect > 10.0 * tol:
        raise PropagatorAccuracyError(f"unitarity defect {defect:.3e} exceeds 10*tol")
    return Propagator(value, (s, t), order, tail)


def heisenberg_source_solve(A, B, f0, t0, t, tol):
    """Solve f' = i[A(t), f] + B(t), f(t0) = f0, via the conjugation formula.

    Returns U(t,t0) (f0 + int U(s,t0)* B(s) U(s,t0) ds) U(t,t0)*, where U is
    the unitary family generated by +iA(t); by unitarity the result obeys
    ||f(t)|| <= ||f0|| + int ||B(s)|| ds up to the requested tolerance.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if not A.self_adjoint:
        raise ValueError("the commutator generator must be a self-adjoint family")
    f0 = np.asarray(f0, dtype=complex)
    if t == t0:
        return f0.copy()
    A.validate(t0, t)
    B.validate(t0, t)
    generator = GeneratorFamily(lambda u: 1j * np.asarray(A.evaluate(u), dtype=complex))
    M = generator.local_bound(t0, t)
    dim = f0.shape[0]
    eye = np.eye(dim, dtype=complex)
    nodes = max(32, math.ceil(4.0 * M * abs(t - t0)), 4)
    prev = None
    while nodes <= 2**13:
        ts = np.linspace(t0, t, nodes + 1)
        h = (t - t0) / nodes
        u_nodes = np.empty((nodes + 1, dim, dim), dtype=complex)
        u_nodes[0] = eye
        step_tol = tol / (4.0 * (nodes + 1))
        for k in range(nodes):
            if M == 0.0:
                u_nodes[k + 1] = u_nodes[k]
                continue
            order, _ = _choose_order(M * abs(h), 1.0, step_tol / 2.0)
            u_nodes[k + 1] = _solve_interval(
                generator, ts[k], ts[k + 1], u_nodes[k], order, step_tol / 2.0, "left")
        b_nodes = B.sample(ts)
        u_dag = np.conj(np.swapaxes(u_nodes, 1, 2))
        integrand = u_dag @ b_nodes @ u_nodes
        integral = _cumulative_integral(integrand, h)[-1]
        if prev is not None and float(np.linalg.norm(integral - prev, 2)) <= tol / 2.0:
            break
        prev = integral
        nodes *= 2
    else:
        raise PropagatorAccuracyError("source-term quadrature did not converge")
    u_end = u_nodes[-1]
    return u_end @ (f0 + integral) @ u_end.conj().T

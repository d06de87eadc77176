"""Small dense numerical toolbox.

Adaptive Simpson quadrature, bracketed monotone root finding (Brent), partial
pivot LU solves, a Hessenberg/Francis-QR eigensolver for general real
matrices, Routh-Hurwitz tests for quadratics and cubics, and fixed-step RK4.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .trajectory import Status, Trajectory

EPS = np.finfo(float).eps
MARGINAL_TOL = 1e-7
MIN_DEPTH = 2  # forced refinements per initial quadrature panel
DIVERGENCE_CAP = 1e9


class QuadratureError(ArithmeticError):
    pass


class BracketError(ArithmeticError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


class ConvergenceError(ArithmeticError):
    pass


class IntegrationError(ArithmeticError):
    """Non-finite derivative during time stepping.

    ``t_last`` is the last time with a finite state and ``partial`` the
    trajectory recorded up to that point.
    """

    def __init__(self, msg, t_last, partial=None):
        super().__init__(msg)
        self.t_last = t_last
        self.partial = partial


# -- quadrature ---------------------------------------------------------------


def quad_adaptive(f: Callable[[float], float], lo: float, hi: float,
                  tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[lo, hi]``.

    The interval is first cut into 8 panels so narrow features are not missed
    by the very first Simpson estimate, and every panel is refined at least
    ``MIN_DEPTH`` times so a chance agreement of coarse estimates is not
    mistaken for convergence. A panel is accepted when the
    Richardson error estimate is below its share of ``tol`` (or at the
    rounding floor of the panel value).
    """
    lo, hi = float(lo), float(hi)
    if lo == hi:
        return 0.0
    if lo > hi:
        return -quad_adaptive(f, hi, lo, tol, max_depth)

    panels = 8
    edges = [float(e) for e in np.linspace(lo, hi, panels + 1)]
    total = 0.0
    stack = []
    for a, b in zip(edges[:-1], edges[1:]):
        fa, fb = f(a), f(b)
        c = 0.5 * (a + b)
        fc = f(c)
        whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb)
        stack.append((a, b, fa, fc, fb, whole, tol / panels, 0))
    while stack:
        a, b, fa, fc, fb, whole, eps, depth = stack.pop()
        c = 0.5 * (a + b)
        d, e = 0.5 * (a + c), 0.5 * (c + b)
        fd, fe = f(d), f(e)
        left = (c - a) / 6.0 * (fa + 4.0 * fd + fc)
        right = (b - c) / 6.0 * (fc + 4.0 * fe + fb)
        delta = left + right - whole
        if not math.isfinite(delta):
            raise QuadratureError(f"non-finite integrand near {c!r}")
        floor = 64.0 * EPS * (abs(left) + abs(right))
        converged = depth >= MIN_DEPTH and abs(delta) <= 15.0 * max(eps, floor)
        if converged or b - a <= 4.0 * EPS * max(abs(a), abs(b)):
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(f"no convergence on [{a}, {b}] after {max_depth} refinements")
        stack.append((a, c, fa, fd, fc, left, 0.5 * eps, depth + 1))
        stack.append((c, b, fc, fe, fb, right, 0.5 * eps, depth + 1))
    return total


def quad_gauss_panels(f: Callable, lo, hi, panel_width: float, order: int = 10) -> np.ndarray:
    """Composite Gauss-Legendre quadrature, vectorized over interval arrays.

    Every interval [lo_k, hi_k] is cut into the same number of equal panels,
    chosen so no panel is wider than ``panel_width``; ``f`` must accept
    arrays. Suited to smooth integrands whose feature scale is known.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    shape = lo.shape
    lo, hi = lo.ravel(), hi.ravel()
    span = hi - lo
    if span.size == 0:
        return np.zeros(shape)
    panels = max(1, int(math.ceil(float(np.max(np.abs(span))) / panel_width)))
    x, w = np.polynomial.legendre.leggauss(order)
    # panel k of interval i covers lo_i + span_i * [k, k+1] / panels
    u = (np.arange(panels)[:, None] + 0.5 * (x[None, :] + 1.0)).ravel() / panels
    nodes = lo[:, None] + span[:, None] * u[None, :]
    vals = np.asarray(f(nodes), dtype=float)
    weights = np.tile(w, panels) * 0.5 / panels
    return (vals @ weights * span).reshape(shape)


# -- root finding -------------------------------------------------------------


def _brent(g, a, b, ga, gb, ftol, max_iter=300):
    """Brent's method on g with g(a), g(b) of opposite sign."""
    if abs(ga) < abs(gb):
        a, b, ga, gb = b, a, gb, ga
    c, gc = a, ga
    d = e = b - a
    for _ in range(max_iter):
        if abs(gb) <= ftol:
            return b
        if ga * gb > 0:
            a, ga = c, gc
            d = e = b - a
        if abs(ga) < abs(gb):
            c, gc = b, gb
            b, gb = a, ga
            a, ga = c, gc
        xtol = 2.0 * EPS * abs(b)
        m = 0.5 * (a - b)
        if abs(m) <= xtol or gb == 0.0:
            return b
        if abs(e) >= xtol and abs(gc) > abs(gb):
            s = gb / gc
            if c == a:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q_ = gc / ga
                r = gb / ga
                p = s * (2.0 * m * q_ * (q_ - r) - (b - c) * (r - 1.0))
                q = (q_ - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(xtol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        c, gc = b, gb
        b = b + (d if abs(d) > xtol else math.copysign(xtol, m))
        gb = g(b)
    return b


def solve_monotone(F: Callable[[float], float], target: float, bracket_seed,
                   max_doublings: int = 200) -> float:
    """Solve ``F(x) = target`` for strictly increasing continuous ``F``.

    ``bracket_seed`` is a point or a ``(lo, hi)`` pair; the bracket is grown
    geometrically until it straddles the target, then refined by Brent.
    """
    target = float(target)
    if np.ndim(bracket_seed) == 0:
        lo = hi = float(bracket_seed)
    else:
        lo, hi = (float(s) for s in bracket_seed)
        if lo > hi:
            lo, hi = hi, lo
    ftol = 1e-10 * (1.0 + abs(target))

    def g(x):
        return F(x) - target

    glo, ghi = g(lo), g(hi)
    step = max(1.0, hi - lo, 1e-3 * max(abs(lo), abs(hi)))
    n = 0
    while glo > 0.0:
        if n >= max_doublings:
            raise BracketError("could not bracket target from below; is F increasing?")
        hi, ghi = lo, glo
        lo -= step
        step *= 2.0
        glo = g(lo)
        n += 1
    n = 0
    while ghi < 0.0:
        if n >= max_doublings:
            raise BracketError("could not bracket target from above; is F increasing?")
        lo, glo = hi, ghi
        hi += step
        step *= 2.0
        ghi = g(hi)
        n += 1
    if abs(glo) <= ftol:
        return lo
    if abs(ghi) <= ftol:
        return hi
    return _brent(g, lo, hi, glo, ghi, ftol)


# -- dense linear algebra -----------------------------------------------------


def solve_linear(A, b) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape != (n, n):
        raise ValueError("A must be square")
    if b.shape[0] != n:
        raise ValueError("dimension mismatch between A and b")
    norm = np.max(np.sum(np.abs(A), axis=1)) if n else 0.0
    if n and norm == 0.0:
        raise SingularMatrixError("zero matrix")
    M = np.concatenate([A, b.reshape(n, -1)], axis=1)
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[p, k]) < 1e-12 * norm:
            raise SingularMatrixError(f"matrix is singular to working precision (column {k})")
        if p != k:
            M[[k, p]] = M[[p, k]]
        M[k + 1:, k:] -= np.outer(M[k + 1:, k] / M[k, k], M[k, k:])
    x = np.zeros((n, M.shape[1] - n))
    for k in range(n - 1, -1, -1):
        x[k] = (M[k, n:] - M[k, k + 1:n] @ x[k + 1:]) / M[k, k]
    return x.reshape(b.shape)


def _balance(A):
    """Diagonal similarity by powers of two so rows and columns have similar norms."""
    A = A.copy()
    n = A.shape[0]
    radix, sqrdx = 2.0, 4.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i])
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                A[i, :] /= f
                A[:, i] *= f
    return A


def _hessenberg(A):
    """Householder reduction to upper Hessenberg form (similarity)."""
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H[k + 1:, :] -= 2.0 * np.outer(v, v @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _hqr(H, max_iter):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Works with 1-based indices on a padded copy to keep the classic loop
    structure readable.
    """
    n = H.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = H
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = np.sum(np.abs(H))
    nn = n
    t = 0.0
    total = 0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                raise ConvergenceError("QR iteration did not converge")
            if its and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                # row transformation on columns k..nn
                if k != nn - 1:
                    pr = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1] + r * a[k + 2, k:nn + 1]
                    a[k + 2, k:nn + 1] -= pr * z
                else:
                    pr = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1]
                a[k + 1, k:nn + 1] -= pr * y
                a[k, k:nn + 1] -= pr * x
                # column transformation on rows l..min(nn, k+3)
                top = min(nn, k + 3) + 1
                if k != nn - 1:
                    pc = x * a[l:top, k] + y * a[l:top, k + 1] + z * a[l:top, k + 2]
                    a[l:top, k + 2] -= pc * r
                else:
                    pc = x * a[l:top, k] + y * a[l:top, k + 1]
                a[l:top, k + 1] -= pc * q
                a[l:top, k] -= pc
            if l >= nn - 1:
                break
    return wr[1:] + 1j * wi[1:]


def eigenvalues_general(A) -> np.ndarray:
    """All eigenvalues of a real square matrix, sorted by (real, imag).

    Balancing, Householder reduction to Hessenberg form, then Francis
    double-shift QR with deflation of 1x1 and 2x2 blocks.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if n == 1:
        return np.array([complex(A[0, 0])])
    H = _hessenberg(_balance(A))
    ev = _hqr(H, max_iter=100 * n)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def solve_shifted_laplacian(L, b: float, r) -> np.ndarray:
    """Solve ``(b I + L) z = r`` for a Laplacian ``L`` (rows summing to zero).

    For small ``b`` the matrix is ill-conditioned only along the ones vector,
    where the answer is exactly ``mean(r) / b``; that component is split off
    and the remainder solved on the well-conditioned complement.
    """
    L = np.asarray(L, dtype=float)
    r = np.asarray(r, dtype=float)
    if not b > 0:
        raise ValueError("shift b must be positive")
    n = len(r)
    r_mean = float(np.mean(r))
    # adding s 11^T leaves the solution on the complement unchanged but
    # lifts the small eigenvalue b to b + s n
    s = max(float(np.max(np.abs(np.diag(L)))), 1.0) / n
    w = solve_linear(b * np.eye(n) + L + s * np.ones((n, n)), r - r_mean)
    return r_mean / b + (w - np.mean(w))


# -- Routh-Hurwitz ------------------------------------------------------------


class StabilityKind(str, enum.Enum):
    HURWITZ = "Hurwitz"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"

    @property
    def rank(self) -> int:
        return {"Hurwitz": 0, "Marginal": 1, "Unstable": 2}[self.value]


@dataclass(frozen=True)
class StabilityClass:
    kind: StabilityKind
    margin: float  # largest real part of the roots / eigenvalues

    def __str__(self):
        return self.kind.value

    @classmethod
    def from_margin(cls, margin: float, tol: float = MARGINAL_TOL) -> StabilityClass:
        if margin < -tol:
            return cls(StabilityKind.HURWITZ, margin)
        if margin > tol:
            return cls(StabilityKind.UNSTABLE, margin)
        return cls(StabilityKind.MARGINAL, margin)

    @classmethod
    def worst(cls, classes: Sequence[StabilityClass]) -> StabilityClass:
        return max(classes, key=lambda c: (c.kind.rank, c.margin))


@dataclass(frozen=True)
class Polynomial2:
    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        if self.a2 == 0:
            raise ValueError("leading coefficient must be nonzero")

    def normalized(self) -> tuple[float, float]:
        return self.a1 / self.a2, self.a0 / self.a2

    def roots(self) -> np.ndarray:
        b, c = self.normalized()
        disc = b * b - 4.0 * c
        if disc >= 0:
            r = math.sqrt(disc)
            q = -0.5 * (b + math.copysign(r, b))
            r1 = q
            r2 = c / q if q != 0 else 0.0
            return np.array([r1, r2], dtype=complex)
        r = math.sqrt(-disc)
        return np.array([complex(-0.5 * b, -0.5 * r), complex(-0.5 * b, 0.5 * r)])


@dataclass(frozen=True)
class Polynomial3:
    a3: float
    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        if self.a3 == 0:
            raise ValueError("leading coefficient must be nonzero")

    def normalized(self) -> tuple[float, float, float]:
        return self.a2 / self.a3, self.a1 / self.a3, self.a0 / self.a3

    def roots(self) -> np.ndarray:
        b, c, d = self.normalized()
        companion = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-d, -c, -b]])
        return eigenvalues_general(companion)


def _margin(roots) -> float:
    return float(np.max(np.real(roots)))


def routh_hurwitz_2(p: Polynomial2, tol: float = MARGINAL_TOL) -> StabilityClass:
    """Classify ``a2 s^2 + a1 s + a0`` by its coefficients.

    Hurwitz iff both normalized coefficients exceed ``tol``; Marginal when all
    are >= -tol but one sits within ``tol`` of zero; Unstable otherwise.
    """
    a1, a0 = p.normalized()
    margin = _margin(p.roots())
    if a1 > tol and a0 > tol:
        return StabilityClass(StabilityKind.HURWITZ, margin)
    if a1 >= -tol and a0 >= -tol:
        return StabilityClass(StabilityKind.MARGINAL, margin)
    return StabilityClass(StabilityKind.UNSTABLE, margin)


def routh_hurwitz_3(p: Polynomial3, tol: float = MARGINAL_TOL) -> StabilityClass:
    """Classify ``a3 s^3 + a2 s^2 + a1 s + a0`` via the Routh minor ``a2 a1 - a0``.

    With the polynomial normalized to a monic one: Hurwitz iff all
    coefficients and the minor exceed ``tol``; Marginal if none is below
    ``-tol`` (so a root sits on the imaginary axis); Unstable otherwise.
    """
    a2, a1, a0 = p.normalized()
    minor = a2 * a1 - a0
    margin = _margin(p.roots())
    vals = (a2, a1, a0, minor)
    if all(v > tol for v in vals):
        return StabilityClass(StabilityKind.HURWITZ, margin)
    if all(v >= -tol for v in vals):
        return StabilityClass(StabilityKind.MARGINAL, margin)
    return StabilityClass(StabilityKind.UNSTABLE, margin)


# -- time stepping ------------------------------------------------------------


def rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(rhs: Callable, x0, t_end: float, h: float,
                  samplers: dict[str, Callable] | None = None,
                  record_every: int = 100, divergence_cap: float = DIVERGENCE_CAP,
                  t0: float = 0.0) -> Trajectory:
    """Classic fixed-step RK4 for ``y' = rhs(t, y)``.

    The state is recorded at ``t0`` and then every ``record_every`` steps (plus
    the final step). ``samplers`` maps channel names to functions of
    ``(t, y)`` evaluated at the sample times. Integration stops with status
    DIVERGED once ``||y||_inf`` exceeds ``divergence_cap``.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    y = np.array(x0, dtype=float).ravel()
    n_steps = int(round((t_end - t0) / h))
    times, states = [t0], [y.copy()]
    status, status_time = Status.RUNNING, None
    t = t0
    for k in range(1, n_steps + 1):
        y_new = rk4_step(rhs, t, y, h)
        if not np.all(np.isfinite(y_new)):
            partial = _finish(times, states, samplers, Status.FAILED, t)
            raise IntegrationError(f"non-finite state after t={t!r}", t, partial)
        y = y_new
        t = t0 + k * h
        if np.max(np.abs(y)) > divergence_cap:
            times.append(t)
            states.append(y.copy())
            status, status_time = Status.DIVERGED, t
            break
        if k % record_every == 0 or k == n_steps:
            times.append(t)
            states.append(y.copy())
    return _finish(times, states, samplers, status, status_time)


def _finish(times, states, samplers, status, status_time):
    tr = Trajectory(np.array(times), np.array(states), status=status, status_time=status_time)
    for name, fn in (samplers or {}).items():
        tr.channels[name] = np.array([fn(t, y) for t, y in zip(tr.times, tr.states)])
    return tr


def rk4_affine_map(A, c, h) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of ``y' = A y + c`` written as ``y -> P y + q``.

    For a constant-coefficient linear system the four RK4 stages collapse to
    ``P = I + Z + Z^2/2 + Z^3/6 + Z^4/24`` with ``Z = hA`` and
    ``q = h (I + Z/2 + Z^2/6 + Z^3/24) c``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    I = np.eye(n)
    Z = h * A
    phi = I + Z @ (I / 2.0 + Z @ (I / 6.0 + Z / 24.0))
    P = I + Z @ phi
    q = h * (phi @ np.asarray(c, dtype=float))
    return P, q


def affine_power(P, q, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The affine map ``y -> P y + q`` composed with itself ``k`` times."""
    n = P.shape[0]
    RP, Rq = np.eye(n), np.zeros(n)
    BP, Bq = P.copy(), q.copy()
    while k > 0:
        if k & 1:
            RP, Rq = BP @ RP, BP @ Rq + Bq
        k >>= 1
        if k:
            BP, Bq = BP @ BP, BP @ Bq + Bq
    return RP, Rq


def integrate_affine(A, c, x0, h: float, n_steps: int, record_every: int = 100,
                     divergence_cap: float = DIVERGENCE_CAP, t0: float = 0.0) -> Trajectory:
    """RK4 on ``y' = A y + c`` using the exact one-step propagator.

    Produces the same iterates as :func:`integrate_ode` (up to rounding) but
    jumps ``record_every`` steps at a time by repeated squaring, so very long
    horizons are cheap. Divergence is checked at sample times only.
    """
    P, q = rk4_affine_map(A, c, h)
    Pr, qr = affine_power(P, q, record_every)
    y = np.array(x0, dtype=float)
    times, states = [t0], [y.copy()]
    status, status_time = Status.RUNNING, None
    k = 0
    while k < n_steps:
        j = min(record_every, n_steps - k)
        if j == record_every:
            y = Pr @ y + qr
        else:
            Pj, qj = affine_power(P, q, j)
            y = Pj @ y + qj
        k += j
        t = t0 + k * h
        times.append(t)
        states.append(y.copy())
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", times[-2])
        if np.max(np.abs(y)) > divergence_cap:
            status, status_time = Status.DIVERGED, t
            break
    return Trajectory(np.array(times), np.array(states), status=status, status_time=status_time)

"""Scalar function families used as gains, dampings and interactions.

Every family evaluates vectorised over numpy arrays and provides

* ``integral(lo, hi)``              -- the integral of f,
* ``reciprocal_integral(lo, hi)``   -- the integral of 1/f,
* ``reciprocal_moment(lo, hi, c)``  -- the integral of (y - c)/f,

in closed form where one exists and by adaptive quadrature otherwise
(see ``closed_form``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .numerics import quad_adaptive, quad_gauss_panels

_SQRT_PI = math.sqrt(math.pi)
_erf = np.frompyfunc(math.erf, 1, 1)


def erf(y):
    out = _erf(np.asarray(y, dtype=float))
    return out.astype(float) if isinstance(out, np.ndarray) else float(out)


# kernel family codes (must match _kernels.pyx)
FN_CONSTANT, FN_LINEAR, FN_EXPSGN, FN_RAS, FN_BUMP, FN_PWL = range(6)


def _vectorize(fn):
    """Apply a scalar (lo, hi, ...) routine elementwise over broadcast inputs."""

    def wrapped(*args):
        arrs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        if arrs[0].ndim == 0:
            return float(fn(*[float(a) for a in arrs]))
        out = np.empty(arrs[0].shape)
        for idx in np.ndindex(out.shape):
            out[idx] = fn(*[float(a[idx]) for a in arrs])
        return out

    return wrapped


class ScalarFn:
    """Base class. Subclasses are frozen dataclasses holding the parameters."""

    family: ClassVar[str] = ""
    closed_form: ClassVar[dict] = {"integral": False, "reciprocal": False}
    quad_tol: ClassVar[float] = 1e-12

    def __call__(self, y):
        raise NotImplementedError

    # defaults fall back to quadrature

    def integral(self, lo, hi):
        return _vectorize(lambda a, b: quad_adaptive(self._scalar, a, b, self.quad_tol))(lo, hi)

    def reciprocal_integral(self, lo, hi):
        return _vectorize(lambda a, b: quad_adaptive(lambda y: 1.0 / self._scalar(y), a, b,
                                                     self.quad_tol))(lo, hi)

    def reciprocal_moment(self, lo, hi, center):
        return _vectorize(lambda a, b, c: quad_adaptive(lambda y: (y - c) / self._scalar(y), a, b,
                                                        self.quad_tol))(lo, hi, center)

    def antiderivative(self, lo, hi):
        return self.integral(lo, hi)

    def _scalar(self, y: float) -> float:
        return float(self(y))

    def bounds(self) -> tuple[float, float]:
        """Global (inf, sup) of f over the real line."""
        raise NotImplementedError

    @property
    def is_odd(self) -> bool:
        return False

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}

    def kernel_code(self) -> int:
        raise NotImplementedError

    def kernel_params(self, knots_x: list, knots_y: list) -> tuple:
        """Four floats for the compiled kernel; PWL appends to the knot pools."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(ScalarFn):
    c: float
    family: ClassVar[str] = "Constant"
    closed_form: ClassVar[dict] = {"integral": True, "reciprocal": True}

    def __call__(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.c) if np.ndim(y) else float(self.c)

    def integral(self, lo, hi):
        return self.c * (np.asarray(hi, dtype=float) - lo)

    def reciprocal_integral(self, lo, hi):
        return (np.asarray(hi, dtype=float) - lo) / self.c

    def reciprocal_moment(self, lo, hi, center):
        hi = np.asarray(hi, dtype=float)
        return ((hi - center) ** 2 - (np.asarray(lo, dtype=float) - center) ** 2) / (2.0 * self.c)

    def bounds(self):
        return (self.c, self.c)

    def params(self):
        return {"c": self.c}

    def kernel_code(self):
        return FN_CONSTANT

    def kernel_params(self, kx, ky):
        return (self.c, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Linear(ScalarFn):
    """f(y) = k y."""

    k: float
    family: ClassVar[str] = "Linear"
    closed_form: ClassVar[dict] = {"integral": True, "reciprocal": False}

    def __call__(self, y):
        return self.k * np.asarray(y, dtype=float) if np.ndim(y) else self.k * float(y)

    def integral(self, lo, hi):
        return 0.5 * self.k * (np.asarray(hi, dtype=float) ** 2 - np.asarray(lo, dtype=float) ** 2)

    def reciprocal_integral(self, lo, hi):
        raise ValueError("Linear has a zero; its reciprocal is not integrable")

    reciprocal_moment = reciprocal_integral  # type: ignore[assignment]

    def bounds(self):
        if self.k == 0:
            return (0.0, 0.0)
        return (-math.inf, math.inf)

    @property
    def is_odd(self):
        return True

    def params(self):
        return {"k": self.k}

    def kernel_code(self):
        return FN_LINEAR

    def kernel_params(self, kx, ky):
        return (self.k, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ExpSgn(ScalarFn):
    """f(y) = k (exp|y| - 1) sgn(y)."""

    k: float
    family: ClassVar[str] = "ExpSgn"
    closed_form: ClassVar[dict] = {"integral": True, "reciprocal": False}

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = self.k * np.sign(y) * np.expm1(np.abs(y))
        return out if out.ndim else float(out)

    def _primitive(self, y):
        a = np.abs(np.asarray(y, dtype=float))
        return self.k * (np.expm1(a) - a)

    def integral(self, lo, hi):
        out = self._primitive(hi) - self._primitive(lo)
        return out if np.ndim(out) else float(out)

    def reciprocal_integral(self, lo, hi):
        raise ValueError("ExpSgn has a zero; its reciprocal is not integrable")

    reciprocal_moment = reciprocal_integral  # type: ignore[assignment]

    def bounds(self):
        return (-math.inf, math.inf) if self.k else (0.0, 0.0)

    @property
    def is_odd(self):
        return True

    def params(self):
        return {"k": self.k}

    def kernel_code(self):
        return FN_EXPSGN

    def kernel_params(self, kx, ky):
        return (self.k, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ReciprocalAbsShift(ScalarFn):
    """f(y) = 1 / (|y| + c)."""

    c: float
    family: ClassVar[str] = "ReciprocalAbsShift"
    closed_form: ClassVar[dict] = {"integral": True, "reciprocal": True}

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("ReciprocalAbsShift needs c > 0")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = 1.0 / (np.abs(y) + self.c)
        return out if out.ndim else float(out)

    def integral(self, lo, hi):
        def prim(y):
            y = np.asarray(y, dtype=float)
            return np.sign(y) * np.log1p(np.abs(y) / self.c)

        out = prim(hi) - prim(lo)
        return out if np.ndim(out) else float(out)

    def _recip_prim(self, y):
        # integral of |s| + c from 0 to y
        y = np.asarray(y, dtype=float)
        return 0.5 * y * np.abs(y) + self.c * y

    def reciprocal_integral(self, lo, hi):
        out = self._recip_prim(hi) - self._recip_prim(lo)
        return out if np.ndim(out) else float(out)

    def reciprocal_moment(self, lo, hi, center):
        m = np.asarray(center, dtype=float)

        def prim(y):
            y = np.asarray(y, dtype=float)
            ay = np.abs(y)
            return ay ** 3 / 3.0 + 0.5 * self.c * y * y - 0.5 * m * y * ay - m * self.c * y

        out = prim(hi) - prim(lo)
        return out if np.ndim(out) else float(out)

    def bounds(self):
        return (0.0, 1.0 / self.c)

    def params(self):
        return {"c": self.c}

    def kernel_code(self):
        return FN_RAS

    def kernel_params(self, kx, ky):
        return (self.c, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BumpReciprocal(ScalarFn):
    """f(y) = 1 / (base + amp * exp(-((y - center)/width)^2)).

    Models a gain whose reciprocal (a heat capacity, say) has a smooth peak.
    The integral of f itself has no elementary form and uses quadrature.
    """

    base: float
    amp: float
    center: float
    width: float
    family: ClassVar[str] = "BumpReciprocal"
    closed_form: ClassVar[dict] = {"integral": False, "reciprocal": True}

    def __post_init__(self):
        if not (self.base > 0 and self.amp >= 0 and self.width > 0):
            raise ValueError("BumpReciprocal needs base > 0, amp >= 0, width > 0")

    def capacity(self, y):
        y = np.asarray(y, dtype=float)
        return self.base + self.amp * np.exp(-(((y - self.center) / self.width) ** 2))

    def __call__(self, y):
        out = 1.0 / self.capacity(y)
        return out if np.ndim(out) else float(out)

    def integral(self, lo, hi):
        # smooth on the scale of the width: fixed Gauss-Legendre panels of width/4
        out = quad_gauss_panels(self.__call__, lo, hi, 0.25 * self.width)
        return out if np.ndim(out) else float(out)

    def _bump_integral(self, lo, hi):
        w, mu = self.width, self.center
        return 0.5 * w * _SQRT_PI * (erf((np.asarray(hi, dtype=float) - mu) / w)
                                     - erf((np.asarray(lo, dtype=float) - mu) / w))

    def reciprocal_integral(self, lo, hi):
        hi = np.asarray(hi, dtype=float)
        out = self.base * (hi - lo) + self.amp * self._bump_integral(lo, hi)
        return out if np.ndim(out) else float(out)

    def reciprocal_moment(self, lo, hi, center):
        # integral of (y - m)(base + amp g(y)) split as integrals from m
        m = np.asarray(center, dtype=float)
        w, mu = self.width, self.center

        def from_m(y):
            y = np.asarray(y, dtype=float)
            g = np.exp(-(((y - mu) / w) ** 2))
            gm = np.exp(-(((m - mu) / w) ** 2))
            bump = -0.5 * w * w * (g - gm) + (mu - m) * self._bump_integral(m, y)
            return 0.5 * self.base * (y - m) ** 2 + self.amp * bump

        out = from_m(hi) - from_m(lo)
        return out if np.ndim(out) else float(out)

    def bounds(self):
        return (1.0 / (self.base + self.amp), 1.0 / self.base)

    def params(self):
        return {"base": self.base, "amp": self.amp, "center": self.center, "width": self.width}

    def kernel_code(self):
        return FN_BUMP

    def kernel_params(self, kx, ky):
        return (self.base, self.amp, self.center, self.width)


def _log1p_ratio(r):
    """log1p(r)/r with the r -> 0 limit."""
    if abs(r) < 1e-4:
        return 1.0 - r / 2.0 + r * r / 3.0 - r ** 3 / 4.0
    return math.log1p(r) / r


def _moment_ratio(r):
    """(1 - log1p(r)/r)/r with the r -> 0 limit."""
    if abs(r) < 1e-3:
        return 0.5 - r / 3.0 + r * r / 4.0 - r ** 3 / 5.0 + r ** 4 / 6.0
    return (1.0 - math.log1p(r) / r) / r


@dataclass(frozen=True)
class PiecewiseLinear(ScalarFn):
    """Linear interpolation through knots, constant beyond the end knots.

    With ``odd=True`` the given knots (on y >= 0 or y > 0) are mirrored
    through the origin and (0, 0) is inserted, so the function is odd by
    construction.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    odd: bool = False
    family: ClassVar[str] = "PiecewiseLinear"
    closed_form: ClassVar[dict] = {"integral": True, "reciprocal": True}

    def __init__(self, xs, ys, odd: bool = False):
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if len(xs) != len(ys) or len(xs) < 1:
            raise ValueError("need matching, non-empty knot lists")
        if odd:
            if any(v < 0 for v in xs):
                raise ValueError("odd PiecewiseLinear takes knots on y >= 0 only")
            pairs = [(x, y) for x, y in zip(xs, ys) if x > 0]
            if any(x == 0 and y != 0 for x, y in zip(xs, ys)):
                raise ValueError("an odd function must vanish at 0")
            pairs.sort()
            xs = [-x for x, _ in reversed(pairs)] + [0.0] + [x for x, _ in pairs]
            ys = [-y for _, y in reversed(pairs)] + [0.0] + [y for _, y in pairs]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knot abscissae must be strictly increasing")
        object.__setattr__(self, "xs", tuple(xs))
        object.__setattr__(self, "ys", tuple(ys))
        object.__setattr__(self, "odd", bool(odd))

    @property
    def is_odd(self):
        return self.odd

    def __call__(self, y):
        out = np.interp(np.asarray(y, dtype=float), self.xs, self.ys)
        return out if np.ndim(out) else float(out)

    def _cumulative(self):
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        seg = 0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def _primitive(self, y):
        """Integral of f from xs[0] to y."""
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        cum = self._cumulative()
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape)
        flat_y, flat_o = y.ravel(), out.ravel()
        for idx, v in enumerate(flat_y):
            if v <= xs[0]:
                flat_o[idx] = ys[0] * (v - xs[0])
            elif v >= xs[-1]:
                flat_o[idx] = cum[-1] + ys[-1] * (v - xs[-1])
            else:
                k = int(np.searchsorted(xs, v, side="right")) - 1
                fv = ys[k] + (ys[k + 1] - ys[k]) * (v - xs[k]) / (xs[k + 1] - xs[k])
                flat_o[idx] = cum[k] + 0.5 * (ys[k] + fv) * (v - xs[k])
        return out.reshape(y.shape)

    def integral(self, lo, hi):
        out = self._primitive(hi) - self._primitive(lo)
        return out if np.ndim(out) else float(out)

    def _pieces(self, lo, hi):
        """Split [lo, hi] (lo <= hi) into pieces where f is affine: (a, b, f(a), slope)."""
        xs = self.xs
        cuts = [lo] + [x for x in xs if lo < x < hi] + [hi]
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            fa, fb = float(self(a)), float(self(b))
            out.append((a, b, fa, (fb - fa) / (b - a)))
        return out

    def _recip_scalar(self, lo, hi, center, moment):
        sign = 1.0
        if lo > hi:
            lo, hi, sign = hi, lo, -1.0
        total = 0.0
        for a, b, fa, slope in self._pieces(lo, hi):
            if fa <= 0 or fa + slope * (b - a) <= 0:
                raise ValueError("reciprocal of a non-positive PiecewiseLinear")
            d = b - a
            r = slope * d / fa
            i0 = d / fa * _log1p_ratio(r)  # integral of 1/f over the piece
            if not moment:
                total += i0
            else:
                i1 = d * d / fa * _moment_ratio(r)  # integral of (y - a)/f
                total += i1 + (a - center) * i0
        return sign * total

    def reciprocal_integral(self, lo, hi):
        return _vectorize(lambda a, b: self._recip_scalar(a, b, 0.0, False))(lo, hi)

    def reciprocal_moment(self, lo, hi, center):
        return _vectorize(lambda a, b, c: self._recip_scalar(a, b, c, True))(lo, hi, center)

    def bounds(self):
        return (min(self.ys), max(self.ys))

    def params(self):
        d = {"xs": list(self.xs), "ys": list(self.ys)}
        if self.odd:
            n0 = self.xs.index(0.0)
            d = {"xs": list(self.xs[n0 + 1:]), "ys": list(self.ys[n0 + 1:]), "odd": True}
        return d

    def kernel_code(self):
        return FN_PWL

    def kernel_params(self, kx, ky):
        offset = len(kx)
        kx.extend(self.xs)
        ky.extend(self.ys)
        return (float(offset), float(len(self.xs)), 0.0, 0.0)


FAMILIES: dict[str, type] = {
    cls.family: cls
    for cls in (Constant, Linear, ExpSgn, ReciprocalAbsShift, BumpReciprocal, PiecewiseLinear)
}


def from_dict(d: dict) -> ScalarFn:
    """Build a function from a ``{"family": ..., "params": {...}}`` record."""
    try:
        cls = FAMILIES[d["family"]]
    except KeyError:
        raise ValueError(f"unknown function family {d.get('family')!r}") from None
    params = d.get("params", {})
    if isinstance(params, (list, tuple)):
        return cls(*params)
    return cls(**params)


# -- assumption checks --------------------------------------------------------


@dataclass(frozen=True)
class GainReport:
    gamma_lower: float
    gamma_upper: float
    ok: bool


@dataclass(frozen=True)
class InteractionReport:
    odd_ok: bool
    sign_ok: bool
    lipschitz_estimate: float

    @property
    def ok(self) -> bool:
        return self.odd_ok and self.sign_ok


def validate_gain(f: ScalarFn, range: tuple[float, float] = (-10.0, 10.0),
                  samples: int = 2001) -> GainReport:
    """Sample f on a uniform grid; ok iff every sample is positive and finite."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    y = np.linspace(range[0], range[1], samples)
    vals = np.asarray(f(y), dtype=float)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    ok = bool(lo > 0.0 and np.all(np.isfinite(vals)))
    return GainReport(lo, hi, ok)


def validate_interaction(f: ScalarFn, range: tuple[float, float] = (-10.0, 10.0),
                         samples: int = 2001) -> InteractionReport:
    """Check oddness and sign preservation on a grid symmetric about 0."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    r = max(abs(range[0]), abs(range[1]))
    y = np.linspace(-r, r, samples)
    fy = np.asarray(f(y), dtype=float)
    fm = np.asarray(f(-y), dtype=float)
    odd_ok = bool(np.all(np.abs(fy + fm) <= 1e-9 * (1.0 + np.abs(fy))))
    nz = y != 0.0
    sign_ok = bool(np.all(y[nz] * fy[nz] > 0.0))
    slopes = np.abs(np.diff(fy) / np.diff(y))
    return InteractionReport(odd_ok, sign_ok, float(np.max(slopes)))

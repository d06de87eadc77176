"""Closed-loop matrices, consensus-mode deflation and stability verdicts.

Two independent routes are computed for the homogeneous PI protocols:

* an analytic one, applying Routh-Hurwitz to the characteristic polynomial
  of every Laplacian mode, and
* a numeric one, taking the eigenvalues of the closed-loop matrix after the
  consensus directions that carry structural zero eigenvalues are removed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, disagreement_basis, is_connected, laplacian, symmetric_eigenvalues
from .numerics import (
    MARGINAL_TOL,
    Polynomial2,
    Polynomial3,
    StabilityClass,
    StabilityKind,
    eigenvalues_general,
    routh_hurwitz_2,
    routh_hurwitz_3,
)


@dataclass
class StabilityReport:
    classification: StabilityClass
    spectrum: np.ndarray
    per_mode: list = field(default_factory=list)  # [(lambda_i, StabilityClass)]
    boundary: float | None = None
    spectral_classification: StabilityClass | None = None

    @property
    def margin(self) -> float:
        return self.classification.margin

    @property
    def kind(self) -> StabilityKind:
        return self.classification.kind

    @property
    def routes_agree(self) -> bool:
        if self.spectral_classification is None:
            return True
        return self.spectral_classification.kind == self.classification.kind

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.kind.value,
            "boundary": self.boundary,
            "margin": self.classification.margin,
            "per_mode": [
                {"lambda": float(lam), "classification": c.kind.value, "margin": c.margin}
                for lam, c in self.per_mode
            ],
            "spectrum": [{"re": float(z.real), "im": float(z.imag)} for z in self.spectrum],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# -- assembly -------------------------------------------------------------------


def _lap(graph: Graph) -> np.ndarray:
    return laplacian(graph, weighted=True)


def assemble_pi_single(graph: Graph, a: float, b: float, delta: float = 0.0) -> np.ndarray:
    """[[0, I], [-a L, -b L - delta I]] acting on (z, x)."""
    n = graph.n
    L = _lap(graph)
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[Z, I], [-a * L, -b * L - delta * I]])


def assemble_pi_double(graph: Graph, a: float, b: float, gamma: float,
                       delta: float = 0.0) -> np.ndarray:
    """[[0, I, 0], [0, 0, I], [-a L, -b L - delta I, -gamma I]] acting on (z, x, v)."""
    n = graph.n
    L = _lap(graph)
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[Z, I, Z], [Z, Z, I], [-a * L, -b * L - delta * I, -gamma * I]])


def assemble_power_centralized(net, a: float, b: float) -> np.ndarray:
    """Full (2n+1) matrix on (omega_hat, delta, omega); affine terms omitted."""
    n = net.n
    M = np.diag(1.0 / net.m)
    L = net.laplacian()
    A = np.zeros((2 * n + 1, 2 * n + 1))
    A[0, n + 1:] = -b / n
    A[1:n + 1, n + 1:] = np.eye(n)
    A[n + 1:, 0] = a / net.m
    A[n + 1:, 1:n + 1] = -M @ L
    A[n + 1:, n + 1:] = -M @ np.diag(net.d) - a * M
    return A


def assemble_power_decentralized(net, a: float, b: float) -> np.ndarray:
    """[[0, I], [-M L_k - b M, -M D - a M]] on (z, omega) with z the phase offset."""
    n = net.n
    M = np.diag(1.0 / net.m)
    L = net.laplacian()
    return np.block([[np.zeros((n, n)), np.eye(n)],
                     [-M @ L - b * M, -M @ np.diag(net.d) - a * M]])


# -- deflation ------------------------------------------------------------------


def _deflation_basis(kind: str, n: int, delta: float = 0.0) -> np.ndarray:
    """Orthonormal T whose range drops the A-invariant consensus directions."""
    S = disagreement_basis(n) if n >= 2 else np.zeros((n, 0))
    I = np.eye(n)
    if kind == "pi_single":
        blocks = [S, S] if delta == 0 else [S, I]
    elif kind == "pi_double":
        blocks = [S, S, S] if delta == 0 else [S, I, I]
    elif kind == "power_centralized":
        blocks = [np.eye(1), S, I]
    elif kind == "power_decentralized":
        blocks = [I, I]
    else:
        raise ValueError(f"unknown system kind {kind!r}")
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    T = np.zeros((rows, cols))
    r = c = 0
    for blk in blocks:
        T[r:r + blk.shape[0], c:c + blk.shape[1]] = blk
        r += blk.shape[0]
        c += blk.shape[1]
    return T


def deflate(A, kind: str, n: int, delta: float = 0.0) -> np.ndarray:
    T = _deflation_basis(kind, n, delta)
    return T.T @ np.asarray(A, dtype=float) @ T


def deflate_and_spectrum(A, kind: str, n: int, delta: float = 0.0) -> np.ndarray:
    """Eigenvalues of the deflated closed-loop matrix.

    The dropped directions span the consensus vector in the blocks listed in
    ``_deflation_basis``; they are invariant under A, so the reduced matrix
    carries every remaining eigenvalue exactly.
    """
    R = deflate(A, kind, n, delta)
    if R.size == 0:
        return np.zeros(0, dtype=complex)
    return eigenvalues_general(R)


def _spectral_class(spectrum, tol=MARGINAL_TOL) -> StabilityClass:
    if len(spectrum) == 0:
        return StabilityClass(StabilityKind.HURWITZ, -np.inf)
    return StabilityClass.from_margin(float(np.max(spectrum.real)), tol)


# -- PI protocols ---------------------------------------------------------------


def _laplacian_modes(graph: Graph):
    if not is_connected(graph):
        raise ValueError("graph must be connected")
    lam = symmetric_eigenvalues(_lap(graph)).eigenvalues
    return np.maximum(lam[1:], 0.0)  # drop the consensus mode


def classify_pi_single(graph: Graph, a: float, b: float, delta: float = 0.0,
                       tol: float = MARGINAL_TOL) -> StabilityReport:
    modes = _laplacian_modes(graph)
    per_mode = [(lam, routh_hurwitz_2(Polynomial2(1.0, lam * b + delta, lam * a), tol)) for lam in modes]
    if delta > 0:
        per_mode.insert(0, (0.0, StabilityClass.from_margin(-delta, tol)))
    spectrum = deflate_and_spectrum(assemble_pi_single(graph, a, b, delta), "pi_single", graph.n, delta)
    analytic = StabilityClass.worst([c for _, c in per_mode]) if per_mode else _spectral_class(spectrum)
    return StabilityReport(analytic, spectrum, per_mode, None, _spectral_class(spectrum, tol))


def classify_pi_double(graph: Graph, a: float, b: float, gamma: float, delta: float = 0.0,
                       tol: float = MARGINAL_TOL) -> StabilityReport:
    """Per-mode cubic s^3 + gamma s^2 + (lambda b + delta) s + lambda a.

    Without position anchoring the boundary is a = b gamma; with delta > 0 it
    moves to b gamma + gamma delta / lambda_max.
    """
    modes = _laplacian_modes(graph)
    per_mode = [(lam, routh_hurwitz_3(Polynomial3(1.0, gamma, lam * b + delta, lam * a), tol))
                for lam in modes]
    if delta > 0:
        per_mode.insert(0, (0.0, routh_hurwitz_2(Polynomial2(1.0, gamma, delta), tol)))
    if len(modes):
        boundary = b * gamma + (gamma * delta / modes[-1] if delta > 0 else 0.0)
    else:
        boundary = None
    spectrum = deflate_and_spectrum(assemble_pi_double(graph, a, b, gamma, delta), "pi_double",
                                    graph.n, delta)
    analytic = StabilityClass.worst([c for _, c in per_mode]) if per_mode else _spectral_class(spectrum)
    return StabilityReport(analytic, spectrum, per_mode, boundary, _spectral_class(spectrum, tol))


def spectral_boundary(graph: Graph, b: float, gamma: float, hi: float | None = None,
                      rtol: float = 1e-9) -> float:
    """Bisect the integral gain ``a`` on the sign of the deflated spectral margin.

    Uses the exact sign of the largest real part (no marginal band) so the
    crossover is located to ``rtol`` relative accuracy.
    """

    def margin(a):
        spec = deflate_and_spectrum(assemble_pi_double(graph, a, b, gamma), "pi_double", graph.n)
        return float(np.max(spec.real))

    lo, hi = 1e-12, (3.0 * b * gamma if hi is None else hi)
    if margin(hi) <= 0:
        raise ValueError("no instability found below the search limit")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if margin(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- power systems --------------------------------------------------------------


def classify_power_centralized(net, a: float, b: float, tol: float = MARGINAL_TOL) -> StabilityReport:
    if not is_connected(net.graph()):
        raise ValueError("network must be connected")
    A = assemble_power_centralized(net, a, b)
    spectrum = deflate_and_spectrum(A, "power_centralized", net.n)
    cls = _spectral_class(spectrum, tol)
    return StabilityReport(cls, spectrum, [], None, cls)


def classify_power_decentralized(net, a: float, b: float, tol: float = MARGINAL_TOL) -> StabilityReport:
    if not is_connected(net.graph()):
        raise ValueError("network must be connected")
    A = assemble_power_decentralized(net, a, b)
    spectrum = deflate_and_spectrum(A, "power_decentralized", net.n)
    cls = _spectral_class(spectrum, tol)
    return StabilityReport(cls, spectrum, [], None, cls)

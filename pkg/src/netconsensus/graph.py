"""Undirected graphs, incidence matrices, Laplacians and symmetric spectra.

Vertices are 1-based in the public constructors (matching the CSV format)
and 0-based everywhere inside arrays.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or graph file."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph with optional positive edge weights.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : sequence of (i, j)
        1-based vertex pairs. Order is kept; it defines the column order of
        the incidence matrix.
    weights : sequence of float, optional
        One strictly positive weight per edge (default 1).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] = field(default=())

    def __init__(self, n, edges, weights=None):
        n = int(n)
        if n < 1:
            raise GraphError(f"vertex count must be >= 1, got {n}")
        edges = tuple((int(i), int(j)) for i, j in edges)
        seen = set()
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (1 <= i <= n and 1 <= j <= n):
                raise GraphError(f"edge ({i}, {j}) outside vertex range 1..{n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        if weights is None:
            weights = (1.0,) * len(edges)
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(edges):
            raise GraphError("one weight per edge is required")
        if any(not (w > 0.0) or not np.isfinite(w) for w in weights):
            raise GraphError("edge weights must be strictly positive and finite")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based endpoint arrays ``(tail, head)`` in edge order."""
        e = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2) - 1
        return e[:, 0].copy(), e[:, 1].copy()

    def neighbors(self, i: int) -> list[int]:
        """1-based neighbours of 1-based vertex ``i``."""
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return out

    def reweighted(self, weights) -> Graph:
        return Graph(self.n, self.edges, weights)

    # -- constructors -------------------------------------------------------

    @classmethod
    def path(cls, n: int) -> Graph:
        return cls(n, [(k, k + 1) for k in range(1, n)])

    @classmethod
    def complete(cls, n: int) -> Graph:
        return cls(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])

    @classmethod
    def star(cls, n: int, weights=None) -> Graph:
        return cls(n, [(1, k) for k in range(2, n + 1)], weights)

    @classmethod
    def random_connected(cls, n: int, rng: np.random.Generator, extra_p: float = 0.3) -> Graph:
        """Random spanning tree plus independent extra edges with prob ``extra_p``."""
        order = rng.permutation(n) + 1
        edges = set()
        for k in range(1, n):
            parent = order[rng.integers(0, k)]
            child = order[k]
            edges.add((min(parent, child), max(parent, child)))
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                if (i, j) not in edges and rng.random() < extra_p:
                    edges.add((i, j))
        return cls(n, sorted(edges))

    def to_dict(self) -> dict:
        d = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if any(w != 1.0 for w in self.weights):
            d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Graph:
        return cls(d["n"], d["edges"], d.get("weights"))


def read_graph_csv(path, n: int | None = None) -> Graph:
    """Read a graph from CSV with header ``i,j[,weight]`` (1-based indices).

    The vertex count defaults to the largest index that appears.
    """
    path = Path(path)
    edges, weights = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"i", "j"} <= set(reader.fieldnames):
            raise GraphError(f"{path}: header must contain i,j[,weight]")
        for lineno, row in enumerate(reader, start=2):
            try:
                i, j = int(row["i"]), int(row["j"])
                w = row.get("weight")
                weights.append(1.0 if w in (None, "") else float(w))
            except (TypeError, ValueError) as exc:
                raise GraphError(f"{path}:{lineno}: malformed row") from exc
            edges.append((i, j))
    if n is None:
        n = max((max(e) for e in edges), default=1)
    return Graph(n, edges, weights)


def write_graph_csv(g: Graph, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "weight"])
        for (i, j), wt in zip(g.edges, g.weights):
            w.writerow([i, j, repr(wt)])


def incidence_matrix(g: Graph) -> np.ndarray:
    """Oriented n x m incidence matrix.

    Column k carries +1 at the lower-indexed endpoint of edge k and -1 at the
    higher-indexed one, so ``B @ B.T`` is the unweighted Laplacian.
    """
    B = np.zeros((g.n, g.m))
    for k, (i, j) in enumerate(g.edges):
        lo, hi = min(i, j), max(i, j)
        B[lo - 1, k] = 1.0
        B[hi - 1, k] = -1.0
    return B


def laplacian(g: Graph, weighted: bool = False) -> np.ndarray:
    """Graph Laplacian; each diagonal entry is the correctly rounded negated off-diagonal row sum."""
    L = np.zeros((g.n, g.n))
    for (i, j), w in zip(g.edges, g.weights):
        w = w if weighted else 1.0
        i, j = i - 1, j - 1
        L[i, j] -= w
        L[j, i] -= w
    for i in range(g.n):
        L[i, i] = -math.fsum(L[i])
    return L


def is_connected(g: Graph) -> bool:
    adj = [[] for _ in range(g.n)]
    for i, j in g.edges:
        adj[i - 1].append(j - 1)
        adj[j - 1].append(i - 1)
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == g.n


@dataclass(frozen=True)
class SymmetricSpectrum:
    eigenvalues: np.ndarray  # ascending

    def __len__(self):
        return len(self.eigenvalues)

    def __getitem__(self, k):
        return self.eigenvalues[k]

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else 0.0


def symmetric_eigenvalues(m, tol: float = 1e-12, max_sweeps: int = 100) -> SymmetricSpectrum:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``.
    """
    A = np.array(m, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return SymmetricSpectrum(np.sort(np.diag(A)))

    mask = ~np.eye(n, dtype=bool)

    def off(M):
        return np.sqrt(np.sum(M[mask] ** 2))

    for _ in range(max_sweeps):
        if off(A) < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta^2 would overflow
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    return SymmetricSpectrum(np.sort(np.diag(A)))


def disagreement_basis(n: int) -> np.ndarray:
    """n x (n-1) matrix S with orthonormal columns orthogonal to the ones vector.

    Built from normalised Helmert contrasts, so ``[1/sqrt(n) 1 | S]`` is
    orthogonal and ``S @ S.T == I - 11^T / n``.
    """
    if n < 2:
        raise ValueError("disagreement basis needs n >= 2")
    S = np.zeros((n, n - 1))
    for k in range(1, n):
        S[:k, k - 1] = 1.0
        S[k, k - 1] = -float(k)
        S[:, k - 1] /= np.sqrt(k * (k + 1.0))
    return S

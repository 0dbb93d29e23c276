"""Weighted DAGs, equal-variance Gaussian SEMs, and their population quantities.

A model is a directed acyclic graph with nonzero edge weights plus a shared
exogenous noise variance sigma2.  With ``B[i, j]`` holding the weight of edge
``i -> j``, the induced zero-mean Gaussian has

    covariance  S = sigma2 * M^T M,      M = (I - B)^{-1}
    precision   T = (1/sigma2) * (I - B)(I - B)^T

Because ``I - B`` is unit triangular once rows and columns are permuted into
topological order, ``M`` is computed by a triangular solve; no general matrix
inversion happens anywhere in this module.
"""

from __future__ import annotations

import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import (
    CycleDetected,
    DuplicateEdge,
    FormatError,
    InvalidParams,
    NumericalFailure,
    SelfLoop,
    SingularSubblock,
    ZeroWeight,
)

Edge = Tuple[int, int]
EdgeTriple = Tuple[int, int, float]

# Contractual tolerances for the CovariancePair invariants.
SYMMETRY_TOL = 1e-12
INVERSE_PAIR_TOL = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class WeightedDag:
    """Immutable weighted DAG with a cached deterministic topological order.

    Construct through :func:`validate_and_order`; direct construction skips
    cycle/duplicate checking and only re-validates the stored order.
    """

    n: int
    edges: Mapping[Edge, float]
    parents: Tuple[Tuple[int, ...], ...]
    topo_order: Tuple[int, ...]
    d_bound: Optional[int] = None

    def __post_init__(self):
        pos = {v: k for k, v in enumerate(self.topo_order)}
        if sorted(self.topo_order) != list(range(self.n)):
            raise InvalidParams("topo_order is not a permutation of the nodes")
        for (i, j), w in self.edges.items():
            if pos[i] >= pos[j]:
                raise CycleDetected(f"edge ({i}, {j}) violates the stored order")
            if w == 0.0:
                raise ZeroWeight(f"edge ({i}, {j}) has zero weight")
        if self.d_bound is not None and self.max_in_degree > self.d_bound:
            raise InvalidParams(
                f"max in-degree {self.max_in_degree} exceeds bound {self.d_bound}"
            )

    @property
    def max_in_degree(self) -> int:
        return max((len(p) for p in self.parents), default=0)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def parent_weights(self, j: int) -> Tuple[Tuple[int, float], ...]:
        """Parents of ``j`` with their edge weights, ascending by index."""
        return tuple((i, self.edges[(i, j)]) for i in self.parents[j])

    def out_weights(self, i: int) -> Tuple[float, ...]:
        return tuple(w for (a, _), w in self.edges.items() if a == i)

    def weight_matrix(self) -> np.ndarray:
        """Dense B with B[i, j] = weight of edge i -> j."""
        b = np.zeros((self.n, self.n))
        for (i, j), w in self.edges.items():
            b[i, j] = w
        return b


@dataclass(frozen=True)
class GaussianSem:
    """A WeightedDag driving a linear SEM with equal noise variance sigma2.

    ``b_min``, when declared, promises that every edge magnitude is at least
    that large; learners use it to size their decision thresholds.
    """

    dag: WeightedDag
    sigma2: float = 1.0
    b_min: Optional[float] = None

    def __post_init__(self):
        if not (self.sigma2 > 0):
            raise InvalidParams(f"sigma2 must be positive, got {self.sigma2}")
        if self.b_min is not None:
            if not (self.b_min > 0):
                raise InvalidParams(f"b_min must be positive, got {self.b_min}")
            for (i, j), w in self.dag.edges.items():
                if abs(w) < self.b_min - 1e-12:
                    raise InvalidParams(
                        f"edge ({i}, {j}) weight {w} violates declared b_min {self.b_min}"
                    )

    @property
    def n(self) -> int:
        return self.dag.n


@dataclass(frozen=True)
class CovariancePair:
    """Covariance and precision of a SEM, validated to be mutual inverses.

    The product check is done at max-abs tolerance 1e-8, widened by the
    double-precision floor ``n * eps * max|S| * max|T|`` so that legitimately
    ill-conditioned models (huge chain weights) still construct.
    """

    sigma: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        t = np.asarray(self.theta, dtype=float)
        if s.shape != t.shape or s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InvalidParams("sigma and theta must be square and same shape")
        scale = max(1.0, float(np.abs(s).max()), float(np.abs(t).max()))
        if np.abs(s - s.T).max() > SYMMETRY_TOL * scale:
            raise InvalidParams("sigma is not symmetric")
        if np.abs(t - t.T).max() > SYMMETRY_TOL * scale:
            raise InvalidParams("theta is not symmetric")
        n = s.shape[0]
        fp_floor = 64 * n * np.finfo(float).eps * float(np.abs(s).max()) * float(
            np.abs(t).max()
        )
        tol = max(INVERSE_PAIR_TOL, fp_floor)
        if np.abs(s @ t - np.eye(n)).max() > tol:
            raise InvalidParams("sigma @ theta deviates from identity")
        object.__setattr__(self, "sigma", _readonly(s))
        object.__setattr__(self, "theta", _readonly(t))

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


# -- construction --------------------------------------------------------------


def validate_and_order(
    n: int, edges: Union[Iterable[EdgeTriple], Mapping[Edge, float]]
) -> WeightedDag:
    """Check an edge list and return a WeightedDag with a deterministic order.

    The order is produced by Kahn's algorithm with a smallest-index-first
    tie-break, so it is stable across runs and platforms.

    Raises CycleDetected, DuplicateEdge, SelfLoop, ZeroWeight, InvalidParams.
    """
    if n < 1:
        raise InvalidParams(f"need at least one node, got n={n}")
    if isinstance(edges, Mapping):
        triples = [(i, j, w) for (i, j), w in edges.items()]
    else:
        triples = [(int(i), int(j), float(w)) for i, j, w in edges]

    emap: dict = {}
    for i, j, w in triples:
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidParams(f"edge ({i}, {j}) outside 0..{n - 1}")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        if (i, j) in emap:
            raise DuplicateEdge(f"edge ({i}, {j}) listed twice")
        if w == 0.0:
            raise ZeroWeight(f"edge ({i}, {j}) has zero weight")
        emap[(i, j)] = w

    children: list = [[] for _ in range(n)]
    indeg = [0] * n
    for (i, j) in emap:
        children[i].append(j)
        indeg[j] += 1

    ready = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) < n:
        stuck = sorted(v for v in range(n) if indeg[v] > 0)
        raise CycleDetected(f"directed cycle through nodes {stuck}")

    parents: list = [[] for _ in range(n)]
    for (i, j) in emap:
        parents[j].append(i)
    return WeightedDag(
        n=n,
        edges=dict(sorted(emap.items())),
        parents=tuple(tuple(sorted(p)) for p in parents),
        topo_order=tuple(order),
    )


def with_d_bound(dag: WeightedDag, d: int) -> WeightedDag:
    """Attach a declared in-degree bound to an existing dag."""
    return WeightedDag(
        n=dag.n,
        edges=dag.edges,
        parents=dag.parents,
        topo_order=dag.topo_order,
        d_bound=d,
    )


# -- population quantities -----------------------------------------------------


def _inv_i_minus_b(dag: WeightedDag) -> np.ndarray:
    """(I - B)^{-1} via a unit-triangular solve in topological order."""
    n = dag.n
    order = np.asarray(dag.topo_order)
    b = dag.weight_matrix()
    u = np.eye(n) - b[np.ix_(order, order)]
    # strictly-upper structure is guaranteed by the topological permutation
    m_perm = solve_triangular(u, np.eye(n), lower=False, unit_diagonal=True)
    m = np.empty_like(m_perm)
    m[np.ix_(order, order)] = m_perm
    return m


def covariance(sem: GaussianSem) -> CovariancePair:
    """Population covariance and precision of the SEM.

    Both matrices are assembled from ``I - B`` factors; the pair invariants
    (symmetry, mutual inverses) are validated on construction.
    """
    n = sem.dag.n
    m = _inv_i_minus_b(sem.dag)
    sigma = sem.sigma2 * (m.T @ m)
    ib = np.eye(n) - sem.dag.weight_matrix()
    theta = (ib @ ib.T) / sem.sigma2
    sigma = (sigma + sigma.T) / 2.0
    theta = (theta + theta.T) / 2.0
    return CovariancePair(sigma=sigma, theta=theta)


def precision_closed_form(sem: GaussianSem) -> np.ndarray:
    """Precision matrix assembled entrywise from the edge weights.

    Diagonal:      1 + sum over children l of w(i -> l)^2
    Off-diagonal:  -w(i -> j) - w(j -> i) + sum over common children l of
                   w(i -> l) * w(j -> l)

    all scaled by 1/sigma2.  Must agree with ``covariance(sem).theta``.
    """
    n = sem.dag.n
    b = sem.dag.weight_matrix()
    theta = -b - b.T + b @ b.T
    theta[np.diag_indices(n)] = 1.0 + (b * b).sum(axis=1)
    return theta / sem.sigma2


def tau(sem: GaussianSem) -> float:
    """1 + the largest per-node sum of squared outgoing edge weights."""
    out_sq = np.zeros(sem.dag.n)
    for (i, _), w in sem.dag.edges.items():
        out_sq[i] += w * w
    return 1.0 + float(out_sq.max(initial=0.0))


def condition_number(pair: CovariancePair) -> float:
    """Ratio of extreme eigenvalues of the covariance matrix.

    The precision matrix has the identical spectrum ratio, so the choice of
    matrix is immaterial; we fix the covariance.
    """
    try:
        w = np.linalg.eigvalsh(pair.sigma)
    except np.linalg.LinAlgError as e:  # pragma: no cover - eigh rarely fails
        raise NumericalFailure(f"eigenvalue solve failed: {e}") from e
    if w[0] <= 0:
        raise NumericalFailure(f"covariance not positive definite (lambda_min={w[0]})")
    return float(w[-1] / w[0])


def max_variance(pair: CovariancePair) -> float:
    """Largest marginal variance (max diagonal entry of the covariance)."""
    return float(np.diag(pair.sigma).max())


def conditional_variance(pair: CovariancePair, i: int, j_set: Sequence[int]) -> float:
    """Population residual variance of node ``i`` given the nodes in ``j_set``.

    Computed as S_ii - S_iJ S_JJ^{-1} S_Ji with the S_JJ system solved by
    Cholesky; a factorization failure raises SingularSubblock rather than
    being regularized away.
    """
    cols = tuple(sorted(j_set))
    if i in cols:
        raise InvalidParams(f"node {i} cannot condition on itself")
    s = pair.sigma
    if not cols:
        return float(s[i, i])
    sjj = s[np.ix_(cols, cols)]
    sji = s[np.asarray(cols), i]
    try:
        low = np.linalg.cholesky(sjj)
    except np.linalg.LinAlgError as e:
        raise SingularSubblock(f"subblock {cols} not positive definite") from e
    z = solve_triangular(low, sji, lower=True)
    return float(s[i, i] - z @ z)


def population_coefficients(
    pair: CovariancePair, i: int, j_set: Sequence[int]
) -> np.ndarray:
    """Population regression vector of node ``i`` on ``j_set``: S_JJ^{-1} S_Ji.

    Coefficients are aligned with ``sorted(j_set)``.  When ``j_set`` is
    exactly the parent set of ``i`` (and contains none of its descendants),
    the result equals the edge weights into ``i``.
    """
    cols = tuple(sorted(j_set))
    if i in cols:
        raise InvalidParams(f"node {i} cannot regress on itself")
    if not cols:
        raise InvalidParams("j_set must be nonempty")
    s = pair.sigma
    sjj = s[np.ix_(cols, cols)]
    sji = s[np.asarray(cols), i]
    try:
        factor = cho_factor(sjj, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularSubblock(f"subblock {cols} not positive definite") from e
    return cho_solve(factor, sji)


# -- edge-list text format -----------------------------------------------------
#
# One line "n=<int>", then one line "<parent> <child> <weight>" per edge with
# the weight printed to 17 significant digits (lossless float64 round-trip).
# Lines starting with '#' are comments and survive in front of the header.


def dumps_edge_list(dag: WeightedDag, header_comments: Sequence[str] = ()) -> str:
    out = io.StringIO()
    for line in header_comments:
        out.write(f"# {line}\n")
    out.write(f"n={dag.n}\n")
    for (i, j), w in sorted(dag.edges.items()):
        out.write(f"{i} {j} {w:.17g}\n")
    return out.getvalue()


def write_edge_list(dag: WeightedDag, path, header_comments: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_edge_list(dag, header_comments))


def loads_edge_list(text: str) -> Tuple[WeightedDag, Tuple[str, ...]]:
    """Parse edge-list text; returns the dag and any leading comment lines."""
    comments = []
    n = None
    triples = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if n is None:
            if not line.startswith("n="):
                raise FormatError(f"expected 'n=<int>' header, got {line!r}")
            try:
                n = int(line[2:])
            except ValueError as e:
                raise FormatError(f"bad node count in {line!r}") from e
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"expected '<parent> <child> <weight>', got {line!r}")
        try:
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as e:
            raise FormatError(f"bad edge line {line!r}") from e
    if n is None:
        raise FormatError("missing 'n=<int>' header")
    return validate_and_order(n, triples), tuple(comments)


def read_edge_list(path) -> WeightedDag:
    with open(path) as fh:
        dag, _ = loads_edge_list(fh.read())
    return dag


def sem_digest(sem: GaussianSem) -> str:
    """Stable hash of a SEM (nodes, weighted edges, sigma2)."""
    import hashlib

    payload = [f"n={sem.dag.n}", f"sigma2={sem.sigma2:.17g}"]
    payload += [f"{i},{j},{w:.17g}" for (i, j), w in sorted(sem.dag.edges.items())]
    return hashlib.sha256(";".join(payload).encode()).hexdigest()

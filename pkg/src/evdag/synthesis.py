"""Ground-truth generators and observation sampling.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``);
identical parameters and seed reproduce bit-identical output within this
implementation.  The draw sequence of each generator is part of its contract
and documented in its docstring.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .dag_model import (
    GaussianSem,
    WeightedDag,
    sem_digest,
    validate_and_order,
    with_d_bound,
)
from .errors import FormatError, InvalidParams

NOISE_KINDS = ("gaussian", "rademacher", "uniform")


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class SampleMatrix:
    """m x n observation matrix with the metadata that regenerates it."""

    data: np.ndarray
    seed: int
    noise_kind: str
    source_digest: str = ""

    def __post_init__(self):
        a = np.asarray(self.data, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidParams(f"data must be m x n with m, n >= 1, got {a.shape}")
        if not np.isfinite(a).all():
            raise InvalidParams("data contains non-finite entries")
        if self.noise_kind not in NOISE_KINDS:
            raise InvalidParams(f"unknown noise kind {self.noise_kind!r}")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EnsembleSpec:
    """One member of a lower-bound ensemble family.

    ``matching`` pairs nodes (2i, 2i+1); member k >= 1 reverses the k-th
    pair's edge.  ``triangle`` groups nodes (3i, 3i+1, 3i+2); member k >= 1
    replaces the k-th triangle by a two-edge chain with a compensated weight.
    ``index = 0`` is the base model.
    """

    family: str
    n: int
    index: int
    b_min: float
    b1: Optional[float] = None
    big_b: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("matching", "triangle"):
            raise InvalidParams(f"unknown ensemble family {self.family!r}")
        block = 2 if self.family == "matching" else 3
        if self.n < block or self.n % block != 0:
            raise InvalidParams(f"{self.family} family needs {block} | n, got n={self.n}")
        if not (0 <= self.index <= self.n // block):
            raise InvalidParams(
                f"index must lie in 0..{self.n // block}, got {self.index}"
            )
        if not (self.b_min > 0):
            raise InvalidParams("b_min must be positive")
        if self.family == "triangle":
            if self.b1 is None or self.big_b is None:
                raise InvalidParams("triangle family needs b1 and big_b")
            if self.b1 <= 0 or self.big_b < 0:
                raise InvalidParams("triangle weights must be positive (big_b may be 0)")

    @property
    def block_count(self) -> int:
        return self.n // (2 if self.family == "matching" else 3)


# -- random graphs -------------------------------------------------------------


def random_dag(n: int, d: int, b_min: float, b_max: float, seed: int) -> GaussianSem:
    """Random ground-truth SEM: permutation, sparse parents, signed weights.

    Protocol, all draws from one PCG64 stream in this order:

    1. a uniformly random permutation ``p`` of 0..n-1;
    2. for the node at permutation position j (j = 1..n-1), each earlier node
       ``p[0..j-1]`` is accepted as a parent independently with probability
       ``min(d / (j + 2), 1/2)`` (one uniform per candidate, in position
       order); the accepted list is truncated to its first d entries;
    3. each kept edge gets weight ``s * (b_min + (b_max - b_min) * u)`` with
       ``u`` uniform and the sign ``s`` a fair coin (one uniform then one
       integer draw per edge, in position order).

    Noise variance is 1 and the returned SEM declares ``b_min``.
    """
    if n < 1:
        raise InvalidParams(f"n must be positive, got {n}")
    if d < 1 or (n > 1 and d >= n):
        raise InvalidParams(f"need 1 <= d < n, got d={d}, n={n}")
    if not (0 < b_min < b_max):
        raise InvalidParams(f"need 0 < b_min < b_max, got {b_min}, {b_max}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    triples = []
    for j in range(1, n):
        child = int(perm[j])
        prob = min(d / (j + 2), 0.5)
        accepted = [int(perm[t]) for t in range(j) if rng.random() < prob]
        for parent in accepted[:d]:
            magnitude = b_min + (b_max - b_min) * rng.random()
            sign = 2 * int(rng.integers(0, 2)) - 1
            triples.append((parent, child, sign * magnitude))
    dag = with_d_bound(validate_and_order(n, triples), d)
    return GaussianSem(dag=dag, sigma2=1.0, b_min=b_min)


def empty_sem(n: int, sigma2: float = 1.0) -> GaussianSem:
    """SEM with no edges (independent noise columns)."""
    return GaussianSem(dag=validate_and_order(n, []), sigma2=sigma2)


# -- observation sampling ------------------------------------------------------


def sample(
    sem: GaussianSem, m: int, seed: int, noise_kind: str = "gaussian"
) -> SampleMatrix:
    """Draw m i.i.d. rows from the SEM.

    The noise matrix E is drawn in one call (row-major), each entry with
    mean 0 and variance sigma2: gaussian N(0, sigma2); rademacher +-sigma;
    uniform U[-sigma*sqrt(3), sigma*sqrt(3)].  Rows are then propagated
    through the graph by forward substitution in topological order; the
    (I - B) system is never inverted densely.
    """
    if m < 1:
        raise InvalidParams(f"m must be positive, got {m}")
    if noise_kind not in NOISE_KINDS:
        raise InvalidParams(f"unknown noise kind {noise_kind!r}")
    n = sem.dag.n
    sigma = math.sqrt(sem.sigma2)
    rng = np.random.default_rng(seed)
    if noise_kind == "gaussian":
        x = rng.normal(0.0, sigma, size=(m, n))
    elif noise_kind == "rademacher":
        x = sigma * (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0)
    else:
        half = sigma * math.sqrt(3.0)
        x = rng.uniform(-half, half, size=(m, n))

    for v in sem.dag.topo_order:
        for p, w in sem.dag.parent_weights(v):
            x[:, v] += w * x[:, p]
    return SampleMatrix(
        data=x, seed=int(seed), noise_kind=noise_kind, source_digest=sem_digest(sem)
    )


# -- special graph families ----------------------------------------------------


def chain_dag(n: int, k: float) -> GaussianSem:
    """Directed path 0 -> 1 -> ... -> n-1 with uniform weight k."""
    if n < 2:
        raise InvalidParams(f"chain needs n >= 2, got {n}")
    if k == 0:
        raise InvalidParams("chain weight must be nonzero")
    dag = with_d_bound(
        validate_and_order(n, [(i, i + 1, k) for i in range(n - 1)]), 1
    )
    return GaussianSem(dag=dag, sigma2=1.0, b_min=abs(k))


def tree_dag(height: int, lam: float) -> GaussianSem:
    """Complete binary tree of the given height, every edge weighted lam.

    Node 0 is the root; node v has children 2v+1 and 2v+2.  The admissible
    weight range (1/sqrt(2), 1) keeps the per-level variance series bounded
    while the leaf-sum direction grows geometrically.
    """
    if height < 1:
        raise InvalidParams(f"height must be >= 1, got {height}")
    if not (1.0 / math.sqrt(2.0) < lam < 1.0):
        raise InvalidParams(f"lam must lie in (1/sqrt(2), 1), got {lam}")
    n = 2 ** (height + 1) - 1
    triples = []
    for v in range(n):
        for c in (2 * v + 1, 2 * v + 2):
            if c < n:
                triples.append((v, c, lam))
    dag = with_d_bound(validate_and_order(n, triples), 1)
    return GaussianSem(dag=dag, sigma2=1.0, b_min=lam)


def ensemble_member(spec: EnsembleSpec) -> GaussianSem:
    """Construct the requested ensemble member as an equal-variance SEM."""
    triples = []
    if spec.family == "matching":
        for blk in range(spec.block_count):
            y, z = 2 * blk, 2 * blk + 1
            if spec.index == blk + 1:
                triples.append((z, y, spec.b_min))
            else:
                triples.append((y, z, spec.b_min))
        d = 1
    else:
        comp = spec.b1 + spec.big_b * spec.b_min / (1.0 + spec.big_b**2)
        for blk in range(spec.block_count):
            x, y, z = 3 * blk, 3 * blk + 1, 3 * blk + 2
            if spec.big_b != 0.0:
                triples.append((x, y, spec.big_b))
            if spec.index == blk + 1:
                triples.append((y, z, comp))
            else:
                triples.append((x, z, spec.b_min))
                triples.append((y, z, spec.b1))
        d = 2
    dag = with_d_bound(validate_and_order(spec.n, triples), d)
    declared = min(abs(w) for w in dag.edges.values())
    return GaussianSem(dag=dag, sigma2=1.0, b_min=declared)


def nonidentifiable_pair(b: float) -> Tuple[GaussianSem, np.ndarray]:
    """Equal-variance chain X -> Y -> Z plus the covariance of its unequal-
    variance doppelganger.

    The second model reverses the structure (X -> Z, then Z and X into Y)
    with noise variances (1, b^2 + 1, 1/(b^2 + 1)); its covariance is
    assembled analytically here and matches the chain's exactly, which is
    what makes the pair indistinguishable from observational data.
    """
    if not (b > 0):
        raise InvalidParams(f"b must be positive, got {b}")
    chain = GaussianSem(
        dag=validate_and_order(3, [(0, 1, b), (1, 2, b)]), sigma2=1.0, b_min=b
    )

    # doppelganger in topological order (X, Z, Y): X -> Z weight b^2,
    # X -> Y and Z -> Y weight b/(b^2+1); noise variances 1, b^2+1, 1/(b^2+1)
    c = b / (b * b + 1.0)
    b2 = np.zeros((3, 3))
    b2[0, 1] = b * b
    b2[0, 2] = c
    b2[1, 2] = c
    dvar = np.diag([1.0, b * b + 1.0, 1.0 / (b * b + 1.0)])
    a2 = solve_triangular(np.eye(3) - b2, np.eye(3), lower=False, unit_diagonal=True)
    cov_xzy = a2.T @ dvar @ a2
    perm = [0, 2, 1]  # back to (X, Y, Z)
    cov = cov_xzy[np.ix_(perm, perm)]
    cov = (cov + cov.T) / 2.0
    cov.setflags(write=False)
    return chain, cov


def path_cancellation_triple(b: float) -> GaussianSem:
    """Three-node SEM whose X -> Z path contributions cancel exactly.

    Edges X -> Y (b), X -> Z (-b^2), Y -> Z (b); marginally X and Z are
    independent despite the directed paths, so no b_min is declared.
    """
    if b == 0:
        raise InvalidParams("b must be nonzero")
    dag = validate_and_order(3, [(0, 1, b), (0, 2, -b * b), (1, 2, b)])
    return GaussianSem(dag=dag, sigma2=1.0, b_min=None)


# -- sample CSV persistence ------------------------------------------------------
#
# Header "# seed=<u64> noise=<kind> n=<int> m=<int>", then m rows of n
# comma-separated decimals at 17 significant digits.

_HEADER_RE = re.compile(r"^# seed=(\d+) noise=(\w+) n=(\d+) m=(\d+)$")


def dumps_samples(sm: SampleMatrix) -> str:
    out = io.StringIO()
    out.write(f"# seed={sm.seed} noise={sm.noise_kind} n={sm.n} m={sm.m}\n")
    for row in sm.data:
        out.write(",".join(f"{v:.17g}" for v in row))
        out.write("\n")
    return out.getvalue()


def write_samples(sm: SampleMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_samples(sm))


def loads_samples(text: str) -> SampleMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty sample file")
    match = _HEADER_RE.match(lines[0])
    if not match:
        raise FormatError(f"bad sample header {lines[0]!r}")
    seed, noise, n, m = int(match[1]), match[2], int(match[3]), int(match[4])
    if len(lines) - 1 != m:
        raise FormatError(f"expected {m} rows, found {len(lines) - 1}")
    try:
        data = np.array(
            [[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float
        )
    except ValueError as e:
        raise FormatError(f"bad sample row: {e}") from e
    if data.shape != (m, n):
        raise FormatError(f"expected shape {(m, n)}, got {data.shape}")
    return SampleMatrix(data=data, seed=seed, noise_kind=noise)


def read_samples(path) -> SampleMatrix:
    with open(path) as fh:
        return loads_samples(fh.read())

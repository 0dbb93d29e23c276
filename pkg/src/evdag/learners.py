"""Structure learners: exhaustive two-phase search, lasso screening, the
adaptive variant for unknown noise/sparsity/strength, and a variance-gap
baseline.

All learners consume second moments.  ``EmpiricalMoments`` precomputes the
Gram matrix of a sample once, after which every subset regression is a small
dense solve independent of the sample count; ``PopulationMoments`` answers
the same queries from a population covariance through
:func:`evdag.dag_model.conditional_variance` and
:func:`evdag.dag_model.population_coefficients`, which is how the learners
are exercised against exact oracles.

Determinism: candidate nodes are scanned in ascending index, candidate
subsets in lexicographic order over ascending indices, and ties resolve to
the earliest item.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dag_model import (
    CovariancePair,
    conditional_variance,
    population_coefficients,
)
from .errors import (
    BMinExhausted,
    FormatError,
    InvalidParams,
    NoPassingSubset,
    OrderStalled,
    RankDeficient,
)
from .regression import LASSO_MAX_ITER, LASSO_TOL, RANK_RTOL, lasso_gram
from .synthesis import SampleMatrix

ADAPTIVE_B_FLOOR = 2.0**-20
ADAPTIVE_GAP_CONSTANT = 4.0
ADAPTIVE_REJECT_DIVISOR = 40.0
DEFAULT_FIXED_LAMBDA = 0.01


# -- moment backends ------------------------------------------------------------


class EmpiricalMoments:
    """Second moments of a sample; one O(n^2 m) pass, then O(k^3) regressions."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise InvalidParams("data must be an m x n matrix")
        self.m, self.n = data.shape
        self.gram = data.T @ data / self.m
        self.solves = 0

    def variance(self, i: int) -> float:
        return float(self.gram[i, i])

    def regress(self, target: int, cols: Tuple[int, ...]) -> Tuple[np.ndarray, float]:
        """OLS coefficients and empirical MSE of target on cols (sorted)."""
        if not cols:
            return np.zeros(0), self.variance(target)
        idx = np.asarray(cols)
        sub = self.gram[np.ix_(idx, idx)]
        gy = self.gram[idx, target]
        eig = np.linalg.eigvalsh(sub)
        if eig[-1] <= 0 or eig[0] < RANK_RTOL * eig[-1]:
            raise RankDeficient(
                f"gram of columns {cols} singular for target {target}",
                columns=cols,
                target=target,
            )
        coef = np.linalg.solve(sub, gy)
        self.solves += 1
        mse = self.variance(target) - 2.0 * float(coef @ gy) + float(coef @ sub @ coef)
        return coef, max(mse, 0.0)

    def lasso(
        self,
        target: int,
        cols: Tuple[int, ...],
        lam: float,
        tol: float = LASSO_TOL,
        max_iter: int = LASSO_MAX_ITER,
    ) -> Tuple[np.ndarray, float, bool, int]:
        idx = np.asarray(cols) if cols else np.zeros(0, dtype=int)
        sub = self.gram[np.ix_(idx, idx)] if cols else np.zeros((0, 0))
        gy = self.gram[idx, target] if cols else np.zeros(0)
        beta, mse, converged, sweeps, _ = lasso_gram(
            sub, gy, self.variance(target), lam, tol=tol, max_iter=max_iter
        )
        return beta, mse, converged, sweeps


class PopulationMoments:
    """Infinite-sample twin of EmpiricalMoments, backed by a covariance pair."""

    def __init__(self, pair: CovariancePair):
        self.pair = pair
        self.n = pair.n
        self.m = None
        self.solves = 0

    def variance(self, i: int) -> float:
        return float(self.pair.sigma[i, i])

    def regress(self, target: int, cols: Tuple[int, ...]) -> Tuple[np.ndarray, float]:
        mse = conditional_variance(self.pair, target, cols)
        if not cols:
            return np.zeros(0), mse
        coef = population_coefficients(self.pair, target, cols)
        self.solves += 1
        return coef, mse

    def lasso(self, *_args, **_kwargs):
        raise InvalidParams("lasso screening needs sample data, not a population oracle")


Moments = Union[EmpiricalMoments, PopulationMoments]
DataLike = Union[SampleMatrix, np.ndarray, EmpiricalMoments, PopulationMoments]


def as_moments(data: DataLike) -> Moments:
    if isinstance(data, (EmpiricalMoments, PopulationMoments)):
        return data
    if isinstance(data, SampleMatrix):
        return EmpiricalMoments(data.data)
    return EmpiricalMoments(np.asarray(data, dtype=float))


# -- configuration and output types ----------------------------------------------


@dataclass(frozen=True)
class LambdaMode:
    """Lasso regularization rule.

    ``fixed``: use ``value`` as-is.  ``theoretical``: use
    ``constant * R * sqrt(log(n / delta) / m)`` where R defaults to the
    largest empirical column standard deviation unless ``r_hint`` overrides
    it.
    """

    kind: str = "fixed"
    value: float = DEFAULT_FIXED_LAMBDA
    delta: float = 0.05
    constant: float = 1.0
    r_hint: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "theoretical"):
            raise InvalidParams(f"unknown lambda mode {self.kind!r}")
        if self.kind == "fixed" and self.value < 0:
            raise InvalidParams("fixed lambda must be >= 0")
        if self.kind == "theoretical" and not (0 < self.delta < 1):
            raise InvalidParams("delta must lie in (0, 1)")

    @staticmethod
    def fixed(value: float = DEFAULT_FIXED_LAMBDA) -> "LambdaMode":
        return LambdaMode(kind="fixed", value=value)

    @staticmethod
    def theoretical(
        delta: float = 0.05, constant: float = 1.0, r_hint: Optional[float] = None
    ) -> "LambdaMode":
        return LambdaMode(kind="theoretical", delta=delta, constant=constant, r_hint=r_hint)

    def resolve(self, moments: Moments) -> float:
        if self.kind == "fixed":
            return self.value
        r = self.r_hint
        if r is None:
            r = math.sqrt(max(moments.variance(i) for i in range(moments.n)))
        return self.constant * r * math.sqrt(math.log(moments.n / self.delta) / moments.m)


@dataclass(frozen=True)
class LearnerConfig:
    """Inputs the d/b_min-aware learners need, with derived thresholds.

    mse_cutoff   sigma2 * (1 + b_min^2 / 2)   acceptance for conditional fits
    coef_cutoff  b_min / 2                    edge detection / rejection
    """

    d: Optional[int] = None
    b_min: Optional[float] = None
    sigma2: float = 1.0
    lambda_mode: LambdaMode = field(default_factory=LambdaMode)
    phase1_gap_constant: float = ADAPTIVE_GAP_CONSTANT
    adaptive_b_floor: float = ADAPTIVE_B_FLOOR
    lasso_tol: float = LASSO_TOL
    lasso_max_iter: int = LASSO_MAX_ITER

    def __post_init__(self):
        if self.d is not None and self.d < 1:
            raise InvalidParams(f"d must be >= 1, got {self.d}")
        if self.b_min is not None and not (self.b_min > 0):
            raise InvalidParams(f"b_min must be positive, got {self.b_min}")
        if not (self.sigma2 > 0):
            raise InvalidParams(f"sigma2 must be positive, got {self.sigma2}")
        if not (self.phase1_gap_constant > 0):
            raise InvalidParams("phase1_gap_constant must be positive")

    def _require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise InvalidParams(f"this learner needs {name} set in LearnerConfig")

    @property
    def mse_cutoff(self) -> float:
        self._require("b_min")
        return self.sigma2 * (1.0 + self.b_min**2 / 2.0)

    @property
    def coef_cutoff(self) -> float:
        self._require("b_min")
        return self.b_min / 2.0


@dataclass
class LearnDiagnostics:
    """Work counters; ``extras`` carries learner-specific scalars."""

    regressions: int = 0
    subsets_enumerated: int = 0
    lasso_iterations: int = 0
    lasso_not_converged: int = 0
    extras: Dict[str, float] = field(default_factory=dict)


ALGORITHMS = ("exhaustive", "lasso", "adaptive", "variance_baseline")


@dataclass(frozen=True)
class LearnedStructure:
    """A learned topological order plus per-node weighted parent sets."""

    order: Tuple[int, ...]
    parents: Tuple[Tuple[Tuple[int, float], ...], ...]
    algorithm: str
    diagnostics: LearnDiagnostics = field(default_factory=LearnDiagnostics)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidParams(f"unknown algorithm tag {self.algorithm!r}")
        if sorted(self.order) != list(range(len(self.order))):
            raise InvalidParams("order is not a permutation")
        pos = {v: k for k, v in enumerate(self.order)}
        for child, plist in enumerate(self.parents):
            for parent, _ in plist:
                if pos[parent] >= pos[child]:
                    raise InvalidParams(
                        f"parent {parent} of {child} does not precede it in order"
                    )

    @property
    def n(self) -> int:
        return len(self.order)

    def parent_map(self) -> Dict[int, Dict[int, float]]:
        return {v: dict(plist) for v, plist in enumerate(self.parents)}

    def edge_set(self) -> frozenset:
        return frozenset(
            (p, child) for child, plist in enumerate(self.parents) for p, _ in plist
        )


def _pack_parents(n: int, parents: Mapping[int, Mapping[int, float]]) -> Tuple:
    return tuple(
        tuple(sorted(parents.get(v, {}).items())) for v in range(n)
    )


# -- exhaustive two-phase learner -------------------------------------------------


def _regress_cached(moments, target, cols, cache, diag):
    key = cols
    hit = cache.get(key)
    if hit is None:
        try:
            hit = moments.regress(target, cols)
        except RankDeficient as e:
            raise RankDeficient(
                f"degenerate regression of node {target} on {cols}",
                columns=cols,
                target=target,
            ) from e
        cache[key] = hit
        diag.regressions += 1
    return hit


def order_exhaustive(
    data: DataLike, cfg: LearnerConfig, diagnostics: Optional[LearnDiagnostics] = None
) -> List[int]:
    """Greedy conditional-variance ordering over all small conditioning sets.

    Seeds the ordering with every node whose raw variance is within the
    acceptance cutoff, then repeatedly sweeps the remaining nodes in
    ascending index, admitting a node as soon as one subset of the current
    prefix (size min(|prefix|, d), lexicographic order) explains it down to
    ``cfg.mse_cutoff``.  A sweep that admits nothing raises OrderStalled.
    """
    cfg._require("d", "b_min")
    moments = as_moments(data)
    if moments.m is not None and moments.m <= cfg.d:
        raise InvalidParams(f"need m > d, got m={moments.m}, d={cfg.d}")
    diag = diagnostics if diagnostics is not None else LearnDiagnostics()
    n = moments.n
    cutoff = cfg.mse_cutoff

    ordered = [i for i in range(n) if moments.variance(i) <= cutoff]
    member = [False] * n
    for i in ordered:
        member[i] = True

    cache: Dict[Tuple[int, Tuple[int, ...]], Tuple[np.ndarray, float]] = {}
    while len(ordered) < n:
        admitted = False
        for i in [v for v in range(n) if not member[v]]:
            size = min(len(ordered), cfg.d)
            for j_sub in combinations(sorted(ordered), size):
                diag.subsets_enumerated += 1
                key = (i, j_sub)
                if key not in cache:
                    cache[key] = _regress_cached(moments, i, j_sub, {}, diag)
                _, mse = cache[key]
                if mse <= cutoff:
                    ordered.append(i)
                    member[i] = True
                    admitted = True
                    break
        if not admitted:
            raise OrderStalled(
                f"no remaining node fits below {cutoff:.6g}; "
                f"placed {len(ordered)} of {n}"
            )
    return ordered


def parents_exhaustive(
    data: DataLike,
    order: Sequence[int],
    cfg: LearnerConfig,
    diagnostics: Optional[LearnDiagnostics] = None,
) -> LearnedStructure:
    """Certify a parent superset per node by cross-examination, then prune.

    For node i with predecessors S: a candidate J (size min(|S|, d)) is
    rejected as soon as some probe regression on J u K (K disjoint, size up
    to min(|S| - |J|, d)) shows a coefficient of at least b_min/2 on a probe
    column.  The first surviving J is refit alone and its large-coefficient
    members are reported as parents.  Probe regressions are memoized per
    node.
    """
    cfg._require("d", "b_min")
    moments = as_moments(data)
    diag = diagnostics if diagnostics is not None else LearnDiagnostics()
    thr = cfg.coef_cutoff
    parents: Dict[int, Dict[int, float]] = {}

    for pos, node in enumerate(order):
        prefix = sorted(order[:pos])
        if not prefix:
            parents[node] = {}
            continue
        cache: Dict[Tuple[int, ...], Tuple[np.ndarray, float]] = {}
        j_size = min(len(prefix), cfg.d)
        chosen = None
        for j_sub in combinations(prefix, j_size):
            passed = True
            rest = [v for v in prefix if v not in j_sub]
            for k_size in range(0, min(len(rest), cfg.d) + 1):
                for k_sub in combinations(rest, k_size):
                    diag.subsets_enumerated += 1
                    cols = tuple(sorted(j_sub + k_sub))
                    coef, _ = _regress_cached(moments, node, cols, cache, diag)
                    if any(
                        abs(coef[cols.index(k)]) >= thr for k in k_sub
                    ):
                        passed = False
                        break
                if not passed:
                    break
            if passed:
                coef, _ = _regress_cached(moments, node, j_sub, cache, diag)
                parents[node] = {
                    j: float(w) for j, w in zip(j_sub, coef) if abs(w) >= thr
                }
                chosen = j_sub
                break
        if chosen is None:
            raise NoPassingSubset(
                f"every parent candidate set for node {node} was rejected", node=node
            )
    return LearnedStructure(
        order=tuple(order),
        parents=_pack_parents(len(order), parents),
        algorithm="exhaustive",
        diagnostics=diag,
    )


def learn_exhaustive(data: DataLike, cfg: LearnerConfig) -> LearnedStructure:
    """Both exhaustive phases on the same moments."""
    moments = as_moments(data)
    diag = LearnDiagnostics()
    order = order_exhaustive(moments, cfg, diagnostics=diag)
    return parents_exhaustive(moments, order, cfg, diagnostics=diag)


# -- lasso learner ----------------------------------------------------------------


def learn_lasso(data: DataLike, cfg: LearnerConfig) -> LearnedStructure:
    """Lasso-screened ordering and parent selection.

    Seeds the order with the low-variance nodes, then per sweep runs one
    lasso of every remaining node on the current prefix, keeps the
    coefficients at or above b_min/2 as a candidate parent set J (skipping
    the node if |J| > d), refits J by OLS and admits the node when the refit
    MSE passes the acceptance cutoff.  All admissions of a sweep are
    appended together in ascending node index; an empty sweep raises
    OrderStalled.
    """
    cfg._require("d", "b_min")
    moments = as_moments(data)
    diag = LearnDiagnostics()
    n = moments.n
    cutoff = cfg.mse_cutoff
    thr = cfg.coef_cutoff
    lam = cfg.lambda_mode.resolve(moments)
    diag.extras["lambda"] = lam

    ordered = [i for i in range(n) if moments.variance(i) <= cutoff]
    member = [False] * n
    parents: Dict[int, Dict[int, float]] = {i: {} for i in ordered}
    for i in ordered:
        member[i] = True

    while len(ordered) < n:
        batch: List[Tuple[int, Dict[int, float]]] = []
        cols = tuple(sorted(ordered))
        for i in [v for v in range(n) if not member[v]]:
            beta, _, converged, sweeps = moments.lasso(
                i, cols, lam, tol=cfg.lasso_tol, max_iter=cfg.lasso_max_iter
            )
            diag.lasso_iterations += sweeps
            if not converged:
                diag.lasso_not_converged += 1
            selected = tuple(c for c, b in zip(cols, beta) if abs(b) >= thr)
            if len(selected) > cfg.d:
                continue
            coef, mse = _regress_cached(moments, i, selected, {}, diag)
            if mse <= cutoff:
                batch.append(
                    (i, {j: float(w) for j, w in zip(selected, coef) if abs(w) >= thr})
                )
        if not batch:
            raise OrderStalled(
                f"lasso sweep admitted no node; placed {len(ordered)} of {n}"
            )
        for i, pa in batch:
            ordered.append(i)
            member[i] = True
            parents[i] = pa
    return LearnedStructure(
        order=tuple(ordered),
        parents=_pack_parents(n, parents),
        algorithm="lasso",
        diagnostics=diag,
    )


# -- adaptive learner ----------------------------------------------------------


def learn_adaptive(
    data: DataLike,
    d: Optional[int] = None,
    gap_constant: float = ADAPTIVE_GAP_CONSTANT,
    b_floor: float = ADAPTIVE_B_FLOOR,
) -> LearnedStructure:
    """Two-phase learner that estimates sigma2 and adapts to unknown d, b_min.

    Phase 1 (no d, no b_min): sigma2 is estimated as the smallest column
    variance.  Starting from the argmin-variance node and a working degree
    dhat = 1, sweeps admit any node some subset (size <= dhat) of the prefix
    explains within the noise-sized band
    ``sigma2_hat * (1 + gap_constant * sqrt(dhat * log n / m))``; a barren
    sweep increments dhat.

    Phase 2 (d known or dhat, no b_min): the cross-examination scheme with a
    working scale bhat, halved from 1.  A candidate J is rejected when a
    probe coefficient reaches bhat (a missing parent).  It is accepted only
    if its sole refit both (a) passes the Phase-1 fit band, and (b) has every
    coefficient resolved at scale bhat - at least bhat, or at most bhat/40;
    anything inside that band means bhat has not reached the edge scale, so
    if every J fails, bhat halves and the node retries.  Reported parents
    are the refit coefficients at or above bhat.  Halving below ``b_floor``
    raises BMinExhausted.
    """
    moments = as_moments(data)
    if isinstance(moments, PopulationMoments):
        raise InvalidParams("adaptive learner needs sample data")
    diag = LearnDiagnostics()
    n = moments.n
    m = moments.m
    sigma2_hat = min(moments.variance(i) for i in range(n))
    diag.extras["sigma2_hat"] = sigma2_hat
    logn = math.log(max(n, 2))

    def fit_band(dhat: int) -> float:
        return sigma2_hat * (1.0 + gap_constant * math.sqrt(dhat * logn / m))

    # Phase 1
    first = int(np.argmin([moments.variance(i) for i in range(n)]))
    ordered = [first]
    member = [False] * n
    member[first] = True
    d_hat = 1
    cache: Dict[Tuple[int, Tuple[int, ...]], Tuple[np.ndarray, float]] = {}
    while len(ordered) < n:
        admitted = False
        for i in [v for v in range(n) if not member[v]]:
            accept = False
            for size in range(0, min(len(ordered), d_hat) + 1):
                for j_sub in combinations(sorted(ordered), size):
                    diag.subsets_enumerated += 1
                    key = (i, j_sub)
                    if key not in cache:
                        cache[key] = _regress_cached(moments, i, j_sub, {}, diag)
                    if cache[key][1] <= fit_band(d_hat):
                        accept = True
                        break
                if accept:
                    break
            if accept:
                ordered.append(i)
                member[i] = True
                admitted = True
        if not admitted:
            if d_hat >= n - 1:
                raise OrderStalled(
                    f"adaptive ordering stalled with dhat={d_hat}; "
                    f"placed {len(ordered)} of {n}"
                )
            d_hat += 1
    diag.extras["d_hat"] = d_hat

    # Phase 2
    dd = d if d is not None else d_hat
    if dd < 1:
        raise InvalidParams(f"d must be >= 1, got {dd}")
    band = fit_band(dd)
    b_hat = 1.0
    parents: Dict[int, Dict[int, float]] = {}
    for pos, node in enumerate(ordered):
        prefix = sorted(ordered[:pos])
        if not prefix:
            parents[node] = {}
            continue
        node_cache: Dict[Tuple[int, ...], Tuple[np.ndarray, float]] = {}
        j_size = min(len(prefix), dd)
        while True:
            chosen = None
            for j_sub in combinations(prefix, j_size):
                rejected = False
                rest = [v for v in prefix if v not in j_sub]
                for k_size in range(0, min(len(rest), dd) + 1):
                    for k_sub in combinations(rest, k_size):
                        diag.subsets_enumerated += 1
                        cols = tuple(sorted(j_sub + k_sub))
                        coef, _ = _regress_cached(moments, node, cols, node_cache, diag)
                        if any(abs(coef[cols.index(k)]) >= b_hat for k in k_sub):
                            rejected = True
                            break
                    if rejected:
                        break
                if rejected:
                    continue
                coef, mse = _regress_cached(moments, node, j_sub, node_cache, diag)
                if mse > band:
                    continue  # J does not explain the node; wrong support
                if any(b_hat / ADAPTIVE_REJECT_DIVISOR < abs(w) < b_hat for w in coef):
                    continue  # scale unresolved at this bhat
                parents[node] = {
                    j: float(w) for j, w in zip(j_sub, coef) if abs(w) >= b_hat
                }
                chosen = j_sub
                break
            if chosen is not None:
                break
            b_hat /= 2.0
            if b_hat < b_floor:
                raise BMinExhausted(
                    f"edge scale for node {node} not resolved above {b_floor:.3g}",
                    node=node,
                )
    diag.extras["b_hat"] = b_hat
    return LearnedStructure(
        order=tuple(ordered),
        parents=_pack_parents(n, parents),
        algorithm="adaptive",
        diagnostics=diag,
    )


# -- variance-gap baseline -------------------------------------------------------


def parents_variance_baseline(
    data: DataLike,
    order: Sequence[int],
    d: int,
    gamma: float,
    diagnostics: Optional[LearnDiagnostics] = None,
) -> LearnedStructure:
    """Min-MSE subset selection with a leave-one-out variance-gap prune.

    Per node: fit every predecessor subset of size min(|S|, d), keep the one
    with the smallest empirical MSE (first in lexicographic order on ties),
    then retain member j only when dropping it raises the MSE by at least
    ``gamma``.
    """
    if d < 1:
        raise InvalidParams(f"d must be >= 1, got {d}")
    if gamma <= 0:
        raise InvalidParams(f"gamma must be positive, got {gamma}")
    moments = as_moments(data)
    diag = diagnostics if diagnostics is not None else LearnDiagnostics()
    parents: Dict[int, Dict[int, float]] = {}

    for pos, node in enumerate(order):
        prefix = sorted(order[:pos])
        if not prefix:
            parents[node] = {}
            continue
        cache: Dict[Tuple[int, ...], Tuple[np.ndarray, float]] = {}
        best = None
        for j_sub in combinations(prefix, min(len(prefix), d)):
            diag.subsets_enumerated += 1
            coef, mse = _regress_cached(moments, node, j_sub, cache, diag)
            if best is None or mse < best[1]:
                best = (j_sub, mse, coef)
        j_sub, best_mse, coef = best
        kept: Dict[int, float] = {}
        for j, w in zip(j_sub, coef):
            reduced = tuple(v for v in j_sub if v != j)
            _, mse_without = _regress_cached(moments, node, reduced, cache, diag)
            if mse_without - best_mse >= gamma:
                kept[j] = float(w)
        parents[node] = kept
    return LearnedStructure(
        order=tuple(order),
        parents=_pack_parents(len(order), parents),
        algorithm="variance_baseline",
        diagnostics=diag,
    )


def run_algorithm(name: str, data: DataLike, cfg: LearnerConfig) -> LearnedStructure:
    """Dispatch one full learner by name (shared by the grid and the CLI).

    ``variance_baseline`` pairs the exhaustive ordering with the variance-gap
    parent prune at ``gamma = sigma2 * b_min^2 / 2``.
    """
    moments = as_moments(data)
    if name == "exhaustive":
        return learn_exhaustive(moments, cfg)
    if name == "lasso":
        return learn_lasso(moments, cfg)
    if name == "adaptive":
        return learn_adaptive(moments, d=cfg.d)
    if name == "variance_baseline":
        cfg._require("d", "b_min")
        order = order_exhaustive(moments, cfg)
        return parents_variance_baseline(
            moments, order, cfg.d, gamma=cfg.sigma2 * cfg.b_min**2 / 2.0
        )
    raise InvalidParams(f"unknown algorithm {name!r}")


# -- serialization ----------------------------------------------------------------


def dumps_structure(est: LearnedStructure) -> str:
    """Edge-list text with '# order=' and '# algorithm=' headers."""
    out = io.StringIO()
    out.write("# order=" + ",".join(str(v) for v in est.order) + "\n")
    out.write(f"# algorithm={est.algorithm}\n")
    out.write(f"n={est.n}\n")
    rows = sorted(
        (p, child, w) for child, plist in enumerate(est.parents) for p, w in plist
    )
    for p, child, w in rows:
        out.write(f"{p} {child} {w:.17g}\n")
    return out.getvalue()


def write_structure(est: LearnedStructure, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_structure(est))


def loads_structure(text: str) -> LearnedStructure:
    order = None
    algorithm = "exhaustive"
    n = None
    triples = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("order="):
                order = tuple(int(v) for v in body[6:].split(",") if v)
            elif body.startswith("algorithm="):
                algorithm = body[10:]
            continue
        if n is None:
            if not line.startswith("n="):
                raise FormatError(f"expected 'n=<int>' header, got {line!r}")
            n = int(line[2:])
            continue
        i, j, w = line.split()
        triples.append((int(i), int(j), float(w)))
    if n is None or order is None:
        raise FormatError("structure file needs both '# order=' and 'n=' headers")
    parents: Dict[int, Dict[int, float]] = {}
    for i, j, w in triples:
        parents.setdefault(j, {})[i] = w
    return LearnedStructure(
        order=order, parents=_pack_parents(n, parents), algorithm=algorithm
    )


def read_structure(path) -> LearnedStructure:
    with open(path) as fh:
        return loads_structure(fh.read())

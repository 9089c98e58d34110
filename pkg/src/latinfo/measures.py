"""Lattice-indexed information measures.

Every measure is a Möbius-weighted sum of divergences ``D(p_pi || prod p_i)``
over a set of partitions:

* SI  - Streitberg information, the full partition lattice,
* LI  - Lancaster information, partitions with at most one non-singleton block,
* TC  - total correlation, the two-element chain {bottom, top},
* SI(pi) - generalised SI on the interval below a partition ``pi``.

Singleton blocks cancel against the product of marginals, so each term is
evaluated only on the union of its non-singleton blocks. Terms are evaluated
either in closed form for a Gaussian or with the kNN estimator on samples.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import false_discovery_control, rankdata

from . import rng
from .divergence import (
    EstimatorConfig,
    EstimatorError,
    GaussianSpec,
    estimate_tsallis_knn,
    tsallis_gaussian,
)
from .lattice import (
    LatticeError,
    SetPartition,
    enumerate_partitions,
    mobius_interval,
    refines,
)
from .synth import DataError, SampleMatrix

LATTICE_KINDS = ("full", "lancaster", "chain")
MEASURE_KINDS = ("SI", "LI", "TC", "II")
MAX_PLAN_ORDER = 9
MAX_EMPIRICAL_ORDER = 7


@dataclass(frozen=True)
class TermPlan:
    """One divergence term: a partition, its weight and its reduced support."""

    partition: SetPartition
    coefficient: int
    reduced_support: tuple[int, ...]
    reduced_blocks: tuple[tuple[int, ...], ...]

    @property
    def reduced_dim(self) -> int:
        return len(self.reduced_support)

    @classmethod
    def for_partition(cls, partition: SetPartition, coefficient: int) -> "TermPlan":
        blocks = partition.non_singleton_blocks()
        support = tuple(sorted(e for b in blocks for e in b))
        return cls(partition, int(coefficient), support, blocks)


def _sign_factorial(r: int) -> int:
    return (-1) ** (r - 1) * math.factorial(r - 1)


def plan_terms(d: int, lattice_kind: str = "full") -> list[TermPlan]:
    """Terms of the measure on ``P(d)``, its Lancaster sublattice or the chain.

    Plans follow the canonical lattice order (top first, bottom last). The
    bottom term has an empty reduced support and contributes nothing.
    """
    if not isinstance(d, (int, np.integer)) or not 2 <= d <= MAX_PLAN_ORDER:
        raise LatticeError(f"order must lie in [2, {MAX_PLAN_ORDER}], got {d!r}")
    if lattice_kind not in LATTICE_KINDS:
        raise ValueError(f"lattice_kind must be one of {LATTICE_KINDS}")
    if lattice_kind == "chain":
        return [
            TermPlan.for_partition(SetPartition.top(d), 1),
            TermPlan.for_partition(SetPartition.bottom(d), -1),
        ]
    plans = []
    for part in enumerate_partitions(d):
        r = len(part)
        if lattice_kind == "full":
            plans.append(TermPlan.for_partition(part, _sign_factorial(r)))
        elif part.is_lancaster():
            plans.append(TermPlan.for_partition(part, (-1) ** (r - 1)))
    return plans


def plan_interval(pi: SetPartition) -> list[TermPlan]:
    """Terms of the generalised SI on ``[bottom, pi]``, weights ``mu(sigma, pi)``."""
    if not 1 <= pi.d <= MAX_PLAN_ORDER:
        raise LatticeError(f"order must lie in [1, {MAX_PLAN_ORDER}]")
    return [
        TermPlan.for_partition(sigma, mobius_interval(sigma, pi))
        for sigma in enumerate_partitions(pi.d)
        if refines(sigma, pi)
    ]


def estimation_cost(d: int, lattice_kind: str = "full") -> tuple[int, int]:
    """(dimensions summed over all terms, dimensions left after singleton cancellation)."""
    plans = plan_terms(d, lattice_kind)
    return len(plans) * d, sum(p.reduced_dim for p in plans)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class NullStats:
    mean: float
    std: float
    p_value: float
    count: int

    @classmethod
    def from_draws(cls, value: float, draws: Sequence[float]) -> "NullStats":
        arr = np.asarray(draws, dtype=float)
        exceed = int(np.count_nonzero(np.abs(arr) >= abs(value)))
        return cls(
            mean=math.fsum(arr.tolist()) / len(arr),
            std=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
            p_value=(1 + exceed) / (len(arr) + 1),
            count=len(arr),
        )

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "p_value": self.p_value, "count": self.count}


@dataclass(frozen=True)
class MeasureReport:
    measure: str
    order: int
    variables: tuple[str, ...]
    value: float
    terms: tuple[tuple[TermPlan, float], ...]
    mode: str
    alpha: float
    config: EstimatorConfig | None = None
    null: NullStats | None = None
    partition: SetPartition | None = None

    def recompute(self) -> float:
        return math.fsum(plan.coefficient * div for plan, div in self.terms)

    def to_dict(self) -> dict:
        out = {
            "measure": self.measure,
            "order": self.order,
            "variables": list(self.variables),
            "value": self.value,
            "alpha": self.alpha,
            "k": self.config.k if self.config else None,
            "seed": self.config.seed if self.config else None,
            "mode": self.mode,
            "terms": [
                {
                    "partition_rgs": list(plan.partition.rgs),
                    "coefficient": plan.coefficient,
                    "reduced_support": [self.variables[i] for i in plan.reduced_support],
                    "divergence": div,
                }
                for plan, div in self.terms
            ],
            "null": self.null.to_dict() if self.null else None,
        }
        if self.partition is not None:
            out["partition_rgs"] = list(self.partition.rgs)
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# ---------------------------------------------------------------------------
# analytic Gaussian terms


def _gaussian_variables(spec: GaussianSpec, variables) -> tuple[list[int], tuple[str, ...]]:
    if variables is None:
        idx = list(range(spec.dim))
    else:
        idx = []
        for v in variables:
            if isinstance(v, str):
                if not (v.startswith("X") and v[1:].isdigit()):
                    raise ValueError(f"Gaussian variables are X1..X{spec.dim} or 0-based ints, got {v!r}")
                idx.append(int(v[1:]) - 1)
            else:
                idx.append(int(v))
    if len(set(idx)) != len(idx) or not all(0 <= i < spec.dim for i in idx):
        raise ValueError(f"bad variable selection {variables!r} for dimension {spec.dim}")
    return idx, tuple(f"X{i + 1}" for i in idx)


def _require_unit_diagonal(spec: GaussianSpec) -> None:
    if not np.allclose(np.diag(spec.covariance), 1.0, rtol=0, atol=1e-12):
        raise ValueError("analytic mode needs a unit-diagonal covariance")


def gaussian_term(spec: GaussianSpec, blocks, alpha: float) -> float:
    """``D(prod_b N_b || N(0, I))`` for the sub-blocks ``blocks`` of a unit-diagonal ``spec``."""
    if not blocks:
        return 0.0
    f = spec.block_diagonal(blocks)
    return tsallis_gaussian(f, GaussianSpec(np.eye(f.dim)), alpha)


def _analytic_report(measure, spec, variables, plans, alpha, partition=None) -> MeasureReport:
    idx, names = _gaussian_variables(spec, variables)
    sub = spec.marginal(idx)
    _require_unit_diagonal(sub)
    terms = tuple((plan, gaussian_term(sub, plan.reduced_blocks, alpha)) for plan in plans)
    value = math.fsum(plan.coefficient * div for plan, div in terms)
    return MeasureReport(measure, len(idx), names, value, terms, "analytic_gaussian", alpha, partition=partition)


def gaussian_entropy(spec: GaussianSpec) -> float:
    sign, logdet = np.linalg.slogdet(spec.covariance)
    if sign <= 0:
        raise ValueError("singular covariance")
    return 0.5 * (spec.dim * math.log(2 * math.pi * math.e) + logdet)


def interaction_information_gaussian(spec: GaussianSpec, variables=None) -> float:
    """Inclusion-exclusion over subset entropies, ``-sum_T (-1)^(d-|T|) H(T)``."""
    idx, _ = _gaussian_variables(spec, variables)
    d = len(idx)
    terms = []
    for r in range(1, d + 1):
        for subset in itertools.combinations(idx, r):
            terms.append(-((-1) ** (d - r)) * gaussian_entropy(spec.marginal(subset)))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# empirical terms


def _shuffle_all(values: np.ndarray, columns, seed: int, replicate: int) -> np.ndarray:
    out = np.empty_like(values)
    for j, name in enumerate(columns):
        out[:, j] = values[rng.permutation(len(values), seed, "null", replicate, name), j]
    return out


class TermEstimator:
    """kNN divergence terms on one data table, cached by column identity.

    Replicate 0 is the observed table. Replicate ``r > 0`` is a null copy in
    which every column is shuffled independently. Term randomness is keyed by
    (seed, replicate, block column names), so a term has the same value in
    every measure and every subset that uses it.
    """

    def __init__(self, data: SampleMatrix, cfg: EstimatorConfig, replicate: int = 0):
        self.data = data
        self.cfg = cfg
        self.replicate = replicate
        if replicate:
            self.values = _shuffle_all(data.values, data.columns, cfg.seed, replicate)
        else:
            self.values = data.values
        self._col = {name: i for i, name in enumerate(data.columns)}
        self._cache: dict[tuple, float] = {}

    def divergence(self, blocks: tuple[tuple[int, ...], ...]) -> float:
        """``D(prod_b p_b || prod_i p_i)`` over the columns in ``blocks`` (global indices)."""
        if not blocks:
            return 0.0
        names = self.data.columns
        key = tuple(sorted(tuple(sorted(names[c] for c in b)) for b in blocks))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        seed, rep, n = self.cfg.seed, self.replicate, len(self.values)
        support = sorted(c for b in blocks for c in b)
        x = self.values[:, support]
        if len(blocks) > 1:
            x = np.empty_like(x)
            pos = {c: i for i, c in enumerate(support)}
            for j, name_block in enumerate(key):
                cols = [self._col[nm] for nm in name_block]
                perm = rng.permutation(n, seed, "term", rep, key, j)
                x[:, [pos[c] for c in cols]] = self.values[np.ix_(perm, cols)]
        y = np.empty_like(x)
        for i, c in enumerate(support):
            y[:, i] = self.values[rng.permutation(n, seed, "product", rep, key, names[c]), c]
        value = estimate_tsallis_knn(x, y, self.cfg).value
        self._cache[key] = value
        return value


class EmpiricalSession:
    """Observed-data estimator plus lazily built null replicates, shared across measures."""

    def __init__(self, data: SampleMatrix, cfg: EstimatorConfig):
        self.data = data
        self.cfg = cfg
        self.observed = TermEstimator(data, cfg, 0)
        self._null: list[TermEstimator] = []

    def replicates(self, count: int) -> list[TermEstimator]:
        while len(self._null) < count:
            self._null.append(TermEstimator(self.data, self.cfg, len(self._null) + 1))
        return self._null[:count]

    def _terms(self, est: TermEstimator, idx, plans, names):
        out = []
        for plan in plans:
            blocks = tuple(tuple(idx[e] for e in b) for b in plan.reduced_blocks)
            try:
                out.append((plan, est.divergence(blocks)))
            except EstimatorError as exc:
                where = f"{plan.partition} over ({', '.join(names)})"
                raise EstimatorError(exc.args[0], term=where) from exc
        return tuple(out)

    def report(self, measure: str, variables: Sequence[str], plans, partition=None,
               permutations: int | None = None) -> MeasureReport:
        names = tuple(variables)
        idx = self.data.column_index(names)
        terms = self._terms(self.observed, idx, plans, names)
        value = math.fsum(p.coefficient * d for p, d in terms)
        count = self.cfg.permutations if permutations is None else permutations
        null = None
        if count:
            draws = [
                math.fsum(p.coefficient * d for p, d in self._terms(rep, idx, plans, names))
                for rep in self.replicates(count)
            ]
            null = NullStats.from_draws(value, draws)
        return MeasureReport(measure, len(names), names, value, terms, "empirical",
                             self.cfg.alpha, self.cfg, null, partition)


def rank_transform(data: SampleMatrix) -> SampleMatrix:
    """Per-column ordinal ranks scaled into (0, 1).

    Divergences are invariant under strictly monotone maps of each
    coordinate, so measures are unchanged while every column becomes a
    permutation of the same grid. Ties are broken by row order.
    """
    ranks = rankdata(data.values, axis=0, method="ordinal")
    return SampleMatrix(data.columns, ranks / (data.n + 1), data.provenance)


_POOLED: dict[tuple, np.ndarray] = {}


def pooled_null(n: int, order: int, cfg: EstimatorConfig, count: int) -> np.ndarray:
    """Null SI draws for ``order`` independent rank-transformed columns of length ``n``.

    After :func:`rank_transform` a fully shuffled table is just ``order``
    independent random permutations of the rank grid, whatever the data, so
    these draws serve every subset of that order. Results are memoised.
    """
    key = (n, order, replace(cfg, permutations=0), count)
    hit = _POOLED.get(key)
    if hit is not None:
        return hit
    base = replace(cfg, permutations=0)
    plans = plan_terms(order, "full")
    names = tuple(f"C{j + 1}" for j in range(order))
    draws = np.empty(count)
    for b in range(count):
        cols = [rng.permutation(n, cfg.seed, "pooled-null", n, order, b, j) for j in range(order)]
        table = SampleMatrix(names, (np.column_stack(cols) + 1) / (n + 1))
        draws[b] = EmpiricalSession(table, base).report("SI", names, plans).value
    draws.setflags(write=False)
    _POOLED[key] = draws
    return draws


def _empirical_variables(data: SampleMatrix, variables) -> tuple[str, ...]:
    names = tuple(data.columns if variables is None else variables)
    data.column_index(names)
    if len(set(names)) != len(names):
        raise DataError("duplicate variables")
    return names


def _measure(measure, source, variables, cfg, alpha, session, plans_for, partition=None):
    if isinstance(source, GaussianSpec):
        a = alpha if alpha is not None else (cfg.alpha if cfg else 0.5)
        idx, _ = _gaussian_variables(source, variables)
        if len(idx) > MAX_PLAN_ORDER:
            raise ValueError(f"at most {MAX_PLAN_ORDER} variables in analytic mode")
        return _analytic_report(measure, source, idx, plans_for(len(idx)), a, partition)
    if not isinstance(source, SampleMatrix):
        raise TypeError("source must be a SampleMatrix or a GaussianSpec")
    if alpha is not None and cfg is not None and alpha != cfg.alpha:
        raise ValueError("pass alpha through the EstimatorConfig in empirical mode")
    cfg = cfg or EstimatorConfig(alpha=alpha if alpha is not None else 0.5)
    names = _empirical_variables(source, variables)
    if len(names) > MAX_EMPIRICAL_ORDER:
        raise ValueError(f"at most {MAX_EMPIRICAL_ORDER} variables in empirical mode")
    if session is None:
        session = EmpiricalSession(source, cfg)
    elif session.data is not source or session.cfg != cfg:
        raise ValueError("session was built for different data or configuration")
    return session.report(measure, names, plans_for(len(names)), partition)


def _check_order(variables_count):
    if variables_count < 2:
        raise ValueError("need at least two variables")


def streitberg_information(source, variables=None, cfg=None, *, alpha=None, session=None) -> MeasureReport:
    """Streitberg information over the full partition lattice.

    ``source`` is a :class:`SampleMatrix` (kNN estimation with ``cfg``) or a
    unit-diagonal :class:`GaussianSpec` (closed form; ``alpha=1`` gives KL).
    """
    def plans(d):
        _check_order(d)
        return plan_terms(d, "full")
    return _measure("SI", source, variables, cfg, alpha, session, plans)


def lancaster_information(source, variables=None, cfg=None, *, alpha=None, session=None) -> MeasureReport:
    def plans(d):
        _check_order(d)
        return plan_terms(d, "lancaster")
    return _measure("LI", source, variables, cfg, alpha, session, plans)


def total_correlation(source, variables=None, cfg=None, *, alpha=None, session=None) -> MeasureReport:
    """Divergence of the joint from the product of marginals.

    Analytic mode defaults to KL (``alpha=1``); empirical mode uses the
    Tsallis-alpha estimator at ``cfg.alpha``.
    """
    if isinstance(source, GaussianSpec) and alpha is None:
        alpha = 1.0

    def plans(d):
        _check_order(d)
        return plan_terms(d, "chain")
    return _measure("TC", source, variables, cfg, alpha, session, plans)


def generalized_si(source, pi: SetPartition, variables=None, cfg=None, *, alpha=None, session=None) -> MeasureReport:
    """SI on the interval ``[bottom, pi]`` with weights ``mu(sigma, pi)``."""
    def plans(d):
        if pi.d != d:
            raise LatticeError(f"partition of order {pi.d} for {d} variables")
        return plan_interval(pi)
    return _measure("SI", source, variables, cfg, alpha, session, plans, partition=pi)


def measure_report(kind: str, source, variables=None, cfg=None, *, alpha=None, session=None) -> MeasureReport:
    kind = kind.upper()
    if kind == "II":
        if not isinstance(source, GaussianSpec):
            raise ValueError("interaction information is available in analytic mode only")
        idx, names = _gaussian_variables(source, variables)
        value = interaction_information_gaussian(source, idx)
        return MeasureReport("II", len(idx), names, value, (), "analytic_gaussian", 1.0)
    funcs = {"SI": streitberg_information, "LI": lancaster_information, "TC": total_correlation}
    if kind not in funcs:
        raise ValueError(f"measure must be one of {MEASURE_KINDS}")
    return funcs[kind](source, variables, cfg, alpha=alpha, session=session)


def recursive_check(spec: GaussianSpec, d: int | None = None, alpha: float = 0.5) -> float:
    """Residual of ``SI(d) = D(joint || product) - sum_{pi != top} SI(pi)``."""
    d = spec.dim if d is None else d
    if not 2 <= d <= 5:
        raise ValueError("recursive check supports 2 <= d <= 5")
    variables = list(range(d))
    si = streitberg_information(spec, variables, alpha=alpha).value
    top = SetPartition.top(d)
    whole = gaussian_term(spec.marginal(variables), (tuple(range(d)),), alpha)
    lower = [
        generalized_si(spec, pi, variables, alpha=alpha).value
        for pi in enumerate_partitions(d)
        if pi != top
    ]
    return abs(si - (whole - math.fsum(lower)))


# ---------------------------------------------------------------------------
# scans


def subsets_for_scan(columns: Sequence[str], order: int, cap: int = 5000,
                     sample: int | None = None, seed: int = 0) -> list[tuple[str, ...]]:
    """All ``order``-subsets of ``columns``, or a seeded sample of distinct ones.

    Without ``sample`` the number of subsets must not exceed ``cap``. With
    ``sample`` all subsets are returned when there are at most ``sample`` of
    them, otherwise ``sample`` distinct subsets drawn uniformly.
    """
    m = len(columns)
    if not 1 <= order <= m:
        raise ValueError(f"order {order} out of range for {m} columns")
    total = math.comb(m, order)
    if sample is None:
        if total > cap:
            raise ValueError(f"{total} subsets exceed the cap of {cap}; pass a sample size")
        return list(itertools.combinations(columns, order))
    if total <= sample:
        return list(itertools.combinations(columns, order))
    gen = rng.stream(seed, "scan-sample", order)
    chosen: set[tuple[int, ...]] = set()
    while len(chosen) < sample:
        pick = tuple(sorted(gen.choice(m, size=order, replace=False).tolist()))
        chosen.add(pick)
    return [tuple(columns[i] for i in pick) for pick in sorted(chosen)]


@dataclass(frozen=True)
class EmergenceResult:
    rows: tuple[dict, ...]
    emergent: bool
    threshold: float


def emergence_scan(data: SampleMatrix, variables=None, cfg: EstimatorConfig | None = None,
                   threshold: float = 0.05, session: EmpiricalSession | None = None) -> EmergenceResult:
    """SI with permutation nulls on every subset of order 2..d.

    The full set is flagged emergent when its p-value is below ``threshold``
    while every lower-order subset has p above ``threshold / m`` (Bonferroni
    over the ``m`` lower-order subsets).
    """
    cfg = cfg or EstimatorConfig(permutations=200)
    if cfg.permutations < 1:
        raise ValueError("emergence scan needs permutations > 0")
    names = _empirical_variables(data, variables)
    if not 2 <= len(names) <= 6:
        raise ValueError("emergence scan supports 2..6 variables")
    session = session or EmpiricalSession(data, cfg)
    rows = []
    for r in range(2, len(names) + 1):
        for subset in itertools.combinations(names, r):
            rep = streitberg_information(data, subset, cfg, session=session)
            rows.append({"subset": subset, "order": r, "value": rep.value, "p_value": rep.null.p_value})
    lower = [row for row in rows if row["order"] < len(names)]
    top = rows[-1]
    lower_ok = all(row["p_value"] > threshold / len(lower) for row in lower) if lower else True
    return EmergenceResult(tuple(rows), bool(top["p_value"] < threshold and lower_ok), threshold)


@dataclass(frozen=True)
class FeatureSelection:
    target: str
    selected: tuple[str, ...]
    rows: tuple[dict, ...]
    level: float


def select_features(data: SampleMatrix, target: str, max_set: int = 3,
                    cfg: EstimatorConfig | None = None, level: float = 0.05,
                    null: str = "pooled") -> FeatureSelection:
    """Smallest feature set whose SI with the target is significant.

    Every candidate set ``S`` with ``1 <= |S| <= max_set`` gets
    ``SI({target} + S)`` and a permutation p-value; p-values are adjusted with
    Benjamini-Hochberg across the family. Among significant sets that are not
    contained in a significant superset with a smaller p-value, the smallest
    one wins, ties broken by column names.

    With ``null="pooled"`` the table is rank transformed first and each order
    shares one memoised null (see :func:`pooled_null`). ``null="shuffle"``
    shuffles the observed columns per replicate instead, which is exact for
    any data but far slower.
    """
    cfg = cfg or EstimatorConfig(permutations=500)
    if not 1 <= max_set <= 4:
        raise ValueError("max_set must lie in [1, 4]")
    if cfg.permutations < 1:
        raise ValueError("feature selection needs permutations > 0")
    if null not in ("pooled", "shuffle"):
        raise ValueError("null must be 'pooled' or 'shuffle'")
    y = data.column(target)
    if np.all(y == y[0]):
        raise DataError(f"target column {target!r} is constant")
    if data.n < 50 * (max_set + 1):
        raise DataError(f"need at least {50 * (max_set + 1)} rows for max_set={max_set}, got {data.n}")
    features = [c for c in data.columns if c != target]
    if not features:
        raise DataError("no feature columns besides the target")
    candidates = [s for r in range(1, min(max_set, len(features)) + 1)
                  for s in itertools.combinations(features, r)]
    if null == "pooled":
        table = rank_transform(data)
        base = replace(cfg, permutations=0)
        session = EmpiricalSession(table, base)
        reports = []
        for s in candidates:
            rep = streitberg_information(table, (target, *s), base, session=session)
            stats = NullStats.from_draws(rep.value, pooled_null(data.n, len(s) + 1, cfg, cfg.permutations))
            reports.append(replace(rep, null=stats))
    else:
        session = EmpiricalSession(data, cfg)
        reports = [streitberg_information(data, (target, *s), cfg, session=session) for s in candidates]
    pvals = np.array([rep.null.p_value for rep in reports])
    qvals = false_discovery_control(pvals, method="bh")
    rows = []
    for s, rep, q in zip(candidates, reports, qvals):
        rows.append({
            "subset": s,
            "order": len(s) + 1,
            "value": rep.value,
            "p_value": rep.null.p_value,
            "q_value": float(q),
            "significant": bool(q < level),
        })
    significant = [row for row in rows if row["significant"]]
    keep = [
        row for row in significant
        if not any(
            set(row["subset"]) < set(other["subset"]) and other["p_value"] < row["p_value"]
            for other in significant
        )
    ]
    keep.sort(key=lambda row: (len(row["subset"]), row["subset"]))
    selected = keep[0]["subset"] if keep else ()
    return FeatureSelection(target, tuple(selected), tuple(rows), level)

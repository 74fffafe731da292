"""Analytic Hierarchy Process numerics.

Weights come from row geometric means (not eigenvector extraction); the consistency
diagnostics follow the weighted-sum / consistency-vector route:

    X_k = (prod_j a_kj) ** (1/n)      W = X / sum(X)
    S = A @ W      CV = S / W      lambda_max = mean(CV)
    CI = (lambda_max - n) / (n - 1)   CR = CI / RI(n)
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BadDiagonal,
    DimensionMismatch,
    InconsistentMatrix,
    NonPositive,
    NonReciprocal,
    RevisionDiverged,
    UnsupportedDimension,
)

EQ_TOL = 1e-9
CR_THRESHOLD = 0.1
SCALE_MIN, SCALE_MAX = 1.0 / 9.0, 9.0

RANDOM_INDEX: Mapping[int, float] = MappingProxyType(
    {1: 0.0, 2: 0.0, 3: 0.52, 4: 0.9, 5: 1.12, 6: 1.24, 7: 1.32, 8: 1.41, 9: 1.45}
)


def _parse_entry(x: Any) -> float:
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


@dataclass(frozen=True, eq=False)
class PairwiseMatrix:
    """Dense square comparison matrix with row/column labels.

    Construction does not check reciprocity; see :func:`validate_pairwise`.
    """

    labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"comparison matrix must be square, got shape {a.shape}")
        labels = tuple(self.labels)
        if len(labels) != a.shape[0]:
            raise DimensionMismatch(f"{len(labels)} labels for a {a.shape[0]}x{a.shape[0]} matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairwiseMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.entries, other.entries)

    def __getitem__(self, ij: tuple[int, int]) -> float:
        return float(self.entries[ij])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]], labels: Sequence[str] | None = None) -> PairwiseMatrix:
        a = np.array([[_parse_entry(x) for x in row] for row in rows], dtype=float)
        if labels is None:
            labels = [f"C{i + 1}" for i in range(len(a))]
        return cls(tuple(labels), a)

    @classmethod
    def from_weights(cls, weights: Sequence[float], labels: Sequence[str] | None = None) -> PairwiseMatrix:
        """The perfectly consistent matrix ``a_ij = w_i / w_j``."""
        w = np.asarray(weights, dtype=float)
        return cls.from_rows(np.outer(w, 1.0 / w), labels)

    @classmethod
    def uniform(cls, labels: Sequence[str]) -> PairwiseMatrix:
        return cls(tuple(labels), np.ones((len(labels), len(labels))))

    def permuted(self, order: Sequence[int]) -> PairwiseMatrix:
        """Reorder rows, columns and labels so that new index ``k`` is old index ``order[k]``."""
        idx = np.asarray(order)
        return PairwiseMatrix(tuple(self.labels[i] for i in order), self.entries[np.ix_(idx, idx)])

    def with_entry(self, i: int, j: int, value: float) -> PairwiseMatrix:
        """Copy with ``a_ij = value`` and ``a_ji = 1/value``."""
        a = self.entries.copy()
        a[i, j] = value
        a[j, i] = 1.0 / value
        return PairwiseMatrix(self.labels, a)

    def to_dict(self) -> dict[str, Any]:
        return {"labels": list(self.labels), "rows": self.entries.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> PairwiseMatrix:
        return cls.from_rows(d["rows"], d.get("labels"))


@dataclass(frozen=True, eq=False)
class PrioritizationResult:
    labels: tuple[str, ...]
    gm_vector: np.ndarray
    weights: np.ndarray
    weighted_sum: np.ndarray
    consistency_vector: np.ndarray
    lambda_max: float
    ci: float
    cr: float

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def acceptable(self) -> bool:
        return self.cr <= CR_THRESHOLD

    def weight_of(self, label: str) -> float:
        return float(self.weights[self.labels.index(label)])

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "gm_vector": self.gm_vector.tolist(),
            "weights": self.weights.tolist(),
            "weighted_sum": self.weighted_sum.tolist(),
            "consistency_vector": self.consistency_vector.tolist(),
            "lambda_max": self.lambda_max,
            "ci": self.ci,
            "cr": self.cr,
        }


def validate_pairwise(m: PairwiseMatrix, *, scale: bool = False, tol: float = EQ_TOL) -> None:
    """Raise unless ``m`` is a positive reciprocal matrix with a unit diagonal.

    With ``scale=True`` entries must also lie on the closed 1/9..9 range.
    """
    a = m.entries
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        i, j = np.argwhere(~(a > 0) | ~np.isfinite(a))[0]
        raise NonPositive(f"entry ({i},{j}) = {a[i, j]} is not a positive finite number", i=int(i), j=int(j))
    diag = np.diag(a)
    if np.any(np.abs(diag - 1.0) > tol):
        i = int(np.argmax(np.abs(diag - 1.0)))
        raise BadDiagonal(f"diagonal entry ({i},{i}) = {diag[i]} is not 1", i=i)
    prod = a * a.T
    if np.any(np.abs(prod - 1.0) > tol):
        i, j = np.argwhere(np.abs(prod - 1.0) > tol)[0]
        raise NonReciprocal(
            f"a[{i},{j}] * a[{j},{i}] = {prod[i, j]} != 1", i=int(i), j=int(j), a_ij=a[i, j], a_ji=a[j, i]
        )
    if scale and (np.any(a < SCALE_MIN - tol) or np.any(a > SCALE_MAX + tol)):
        raise NonPositive("entries fall outside the 1/9..9 comparison scale")


def geometric_mean_vector(m: PairwiseMatrix) -> np.ndarray:
    # log-space keeps 9x9 products of extreme entries well conditioned
    return np.exp(np.log(m.entries).mean(axis=1))


def normalize_weights(x: Sequence[float] | np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / x.sum()


def weighted_sum_vector(m: PairwiseMatrix, weights: Sequence[float] | np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (m.n,):
        raise DimensionMismatch(f"weight vector of length {w.size} for a {m.n}x{m.n} matrix")
    return m.entries @ w


def consistency_vector(weighted_sum: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.asarray(weighted_sum, dtype=float) / np.asarray(weights, dtype=float)


def lambda_max(cv: Sequence[float] | np.ndarray) -> float:
    return float(np.mean(cv))


def consistency_index(lam: float, n: int) -> float:
    """``(lam - n) / (n - 1)``; defined as 0 for ``n < 2``."""
    if n < 2:
        return 0.0
    return (lam - n) / (n - 1)


def consistency_ratio(ci: float, n: int, ri_table: Mapping[int, float] = RANDOM_INDEX) -> float:
    if n not in ri_table:
        raise UnsupportedDimension(f"no random index for n={n}", n=n, supported=sorted(ri_table))
    ri = ri_table[n]
    if ri == 0:
        return 0.0
    return ci / ri


def diagnose(m: PairwiseMatrix, ri_table: Mapping[int, float] = RANDOM_INDEX) -> PrioritizationResult:
    """Run the full weight and consistency chain without applying the CR gate."""
    x = geometric_mean_vector(m)
    w = normalize_weights(x)
    s = weighted_sum_vector(m, w)
    cv = consistency_vector(s, w)
    lam = lambda_max(cv)
    ci = consistency_index(lam, m.n)
    cr = consistency_ratio(ci, m.n, ri_table)
    return PrioritizationResult(m.labels, x, w, s, cv, lam, ci, cr)


def prioritize(
    m: PairwiseMatrix,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
    threshold: float = CR_THRESHOLD,
) -> PrioritizationResult:
    """Weights and diagnostics for ``m``; raises :class:`InconsistentMatrix` when CR > threshold."""
    validate_pairwise(m)
    res = diagnose(m, ri_table)
    if res.cr > threshold:
        raise InconsistentMatrix(
            f"consistency ratio {res.cr:.5f} exceeds {threshold}; revise the comparisons",
            result=res,
            cr=res.cr,
            ci=res.ci,
            lambda_max=res.lambda_max,
            labels=list(m.labels),
        )
    return res


def _clamp_scale(v: float) -> float:
    return min(max(v, SCALE_MIN), SCALE_MAX)


def implied_ratio(m: PairwiseMatrix, i: int, j: int) -> float | None:
    """Geometric mean of the indirect judgements ``a_ik * a_kj``, clamped to the 1/9..9 scale."""
    ks = [k for k in range(m.n) if k != i and k != j]
    if not ks:
        return None
    a = m.entries
    v = float(np.exp(np.mean([np.log(a[i, k] * a[k, j]) for k in ks])))
    return _clamp_scale(v)


def revision_steps(
    m: PairwiseMatrix,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
    threshold: float = CR_THRESHOLD,
) -> Iterator[PairwiseMatrix]:
    """Yield successively revised matrices until the CR gate passes or no move helps.

    Entries are ranked by how far they deviate from ``W_i / W_j`` under the current
    weights. Each round first tries replacing an entry (and its reciprocal) with the
    value the other judgements imply for it (:func:`implied_ratio`), most deviant
    entry first; only if no such move lowers CR does it fall back to the clamped
    ``W_i / W_j``. The first replacement that lowers CR is kept, so CR strictly
    decreases along the sequence.
    """
    validate_pairwise(m)
    cur = m
    res = diagnose(cur, ri_table)
    while res.cr > threshold:
        ratio = np.outer(res.weights, 1.0 / res.weights)
        dev = np.abs(cur.entries - ratio)
        moved = False
        # stable sort: ties resolve to row-major order
        order = [divmod(int(f), cur.n) for f in np.argsort(-dev, axis=None, kind="stable")]
        order = [(i, j) for i, j in order if dev[i, j] > EQ_TOL]
        # implied values are tried on every entry before falling back to weight ratios
        candidates = [(i, j, implied_ratio(cur, i, j)) for i, j in order]
        candidates += [(i, j, _clamp_scale(float(ratio[i, j]))) for i, j in order]
        for i, j, value in candidates:
            if value is None or abs(value - cur.entries[i, j]) <= EQ_TOL:
                continue
            cand = cur.with_entry(i, j, value)
            cand_res = diagnose(cand, ri_table)
            if cand_res.cr < res.cr:
                cur, res, moved = cand, cand_res, True
                break
        if not moved:
            return
        yield cur


def revise_matrix(
    m: PairwiseMatrix,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
    max_iters: int = 50,
    threshold: float = CR_THRESHOLD,
) -> PairwiseMatrix:
    """Return a reciprocal matrix with CR <= threshold, revising ``m`` at most ``max_iters`` times."""
    validate_pairwise(m)
    cur = m
    cr = diagnose(cur, ri_table).cr
    if cr <= threshold:
        return cur
    steps = revision_steps(m, ri_table, threshold)
    for _ in range(max_iters):
        nxt = next(steps, None)
        if nxt is None:
            break
        cur = nxt
        cr = diagnose(cur, ri_table).cr
        if cr <= threshold:
            return cur
    raise RevisionDiverged(
        f"consistency ratio still {cr:.5f} after {max_iters} revision rounds", cr=cr, max_iters=max_iters
    )


def aggregate_group(ms: Sequence[PairwiseMatrix]) -> PairwiseMatrix:
    """Entrywise geometric mean across judges; reciprocal whenever the inputs are."""
    if not ms:
        raise DimensionMismatch("aggregate_group needs at least one matrix")
    first = ms[0]
    for other in ms[1:]:
        if other.n != first.n or other.labels != first.labels:
            raise DimensionMismatch(
                "matrices to aggregate must share dimension and labels",
                expected=list(first.labels),
                got=list(other.labels),
            )
    logs = np.stack([np.log(m.entries) for m in ms])
    return PairwiseMatrix(first.labels, np.exp(logs.mean(axis=0)))

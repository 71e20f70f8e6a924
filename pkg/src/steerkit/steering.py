"""Loss-tolerant steering functionals and their local-hidden-state bounds.

The exact bound is the dual value ``max_s ||G_s||``, where ``G_s`` is the
sum of the functional operators picked out by a deterministic strategy
``s``. It is found by enumerating all ``(d+1)**n`` strategies.

The per-class bound carries a leading ``1 +`` from the projector-sum norm
lemma: ``||G_s|| <= k*alpha + 1 + (n-k-1)*cos_theta`` for ``k < n``
no-click slots. Dropping that term (as one sometimes sees it written)
gives a bound that the all-click strategies violate.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .measurements import MeasurementSet, max_overlap, warn_if_trivial

ENUMERATION_GUARD = 10**7
TIE_TOL = 1e-12
_CHUNK = 4096


class EnumerationGuardError(RuntimeError):
    def __init__(self, required: int, guard: int):
        super().__init__(
            f"exact bound needs {required} strategies, above the guard of {guard}"
        )
        self.required = required
        self.guard = guard


@dataclass(frozen=True)
class SteeringFunctional:
    """Click operators ``click[x, a]`` and the no-click coefficient ``alpha``.

    The no-click operator for every setting is ``alpha * identity``.
    """

    click: np.ndarray  # (n, d, d, d)
    alpha: float

    def __post_init__(self):
        click = np.asarray(self.click, dtype=complex)
        if click.ndim != 4 or click.shape[1:] != (click.shape[1],) * 3:
            raise ValueError(f"click operators must have shape (n, d, d, d), got {click.shape}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for x, a in np.ndindex(click.shape[:2]):
            if not matcore.is_rank1_projector(click[x, a]):
                raise ValueError(f"click operator ({x}, {a}) is not a rank-1 projector")
        click.setflags(write=False)
        object.__setattr__(self, "click", click)

    @property
    def n(self) -> int:
        return self.click.shape[0]

    @property
    def dim(self) -> int:
        return self.click.shape[1]

    @property
    def cos_theta(self) -> float:
        """Largest overlap between click directions of different settings."""
        n = self.n
        best = 0.0
        for x, y in itertools.combinations(range(n), 2):
            prods = self.click[x][:, None] @ self.click[y][None, :]
            best = max(best, float(np.linalg.norm(prods, ord=2, axis=(-2, -1)).max()))
        return min(best, 1.0)

    def operators(self) -> np.ndarray:
        """All operators, shape (n, d+1, d, d), no-click last."""
        d = self.dim
        no_click = np.broadcast_to(self.alpha * np.eye(d), (self.n, 1, d, d))
        return np.concatenate([self.click, no_click], axis=1)


@dataclass(frozen=True)
class DeterministicStrategy:
    """One outcome per setting; ``None`` marks a no-click slot.

    Ordering is lexicographic with no-click after every click outcome.
    """

    outcomes: tuple

    def __post_init__(self):
        outs = tuple(None if a is None else int(a) for a in self.outcomes)
        if any(a is not None and a < 0 for a in outs):
            raise ValueError(f"negative outcome in strategy {outs}")
        object.__setattr__(self, "outcomes", outs)

    @property
    def no_clicks(self) -> int:
        return sum(a is None for a in self.outcomes)

    def sort_key(self, d: int) -> tuple:
        return tuple(d if a is None else a for a in self.outcomes)

    def __str__(self) -> str:
        # 1-based labels for display, ∅ for no-click
        return "(" + ",".join("∅" if a is None else str(a + 1) for a in self.outcomes) + ")"

    @classmethod
    def from_index(cls, index: int, n: int, d: int) -> "DeterministicStrategy":
        digits = []
        for _ in range(n):
            index, r = divmod(index, d + 1)
            digits.append(None if r == d else r)
        return cls(tuple(reversed(digits)))


@dataclass(frozen=True)
class LhsBoundReport:
    analytic_bound: float
    exact_bound: float
    argmax_strategy: DeterministicStrategy
    per_class_max: dict = field(default_factory=dict)
    cos_theta: float = float("nan")
    alpha: float = float("nan")
    strategies: int = 0

    def as_dict(self) -> dict:
        return {
            "analytic_bound": self.analytic_bound,
            "exact_bound": self.exact_bound,
            "argmax_strategy": str(self.argmax_strategy),
            "per_class_max": {str(k): v for k, v in sorted(self.per_class_max.items())},
            "cos_theta": self.cos_theta,
            "alpha": self.alpha,
            "strategies": self.strategies,
        }


def build_functional(
    mset: MeasurementSet, alpha: float | None = None, use_transpose: bool = False
) -> SteeringFunctional:
    """Functional with click operators Pi_{a|x} (or their transposes).

    ``alpha`` defaults to cos(theta) of the set. Transposes are taken in the
    computational basis, which is the choice matched to the maximally
    entangled state ``sum_i |ii>/sqrt(d)``.
    """
    if mset.n < 2:
        raise ValueError("a steering functional needs at least two measurements")
    cos_theta = max_overlap(mset)
    if alpha is None:
        alpha = cos_theta
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    warn_if_trivial(cos_theta)
    proj = mset.projectors
    if use_transpose:
        proj = np.swapaxes(proj, -1, -2)
    return SteeringFunctional(click=proj, alpha=float(alpha))


def analytic_lhs_bound(n: int, cos_theta: float) -> float:
    if n < 2:
        raise ValueError("the bound needs n >= 2")
    if not 0.0 <= cos_theta <= 1.0:
        raise ValueError(f"cos_theta must lie in [0, 1], got {cos_theta}")
    return 1.0 + (n - 1) * cos_theta


def class_bound(k: int, n: int, alpha: float, cos_theta: float) -> float:
    """Upper bound on ||G_s|| for strategies with k no-click slots."""
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if k == n:
        return n * alpha
    return k * alpha + 1.0 + (n - k - 1) * cos_theta


def functional_analytic_bound(f: SteeringFunctional) -> float:
    """Closed-form LHS bound valid for any alpha: the worst class bound.

    Equals ``1 + (n-1) cos_theta`` when ``alpha = cos_theta``.
    """
    c = f.cos_theta
    return max(class_bound(k, f.n, f.alpha, c) for k in range(f.n + 1))


def strategy_operator(f: SteeringFunctional, s: DeterministicStrategy) -> np.ndarray:
    if len(s.outcomes) != f.n:
        raise ValueError(f"strategy has {len(s.outcomes)} slots, functional has {f.n}")
    d = f.dim
    g = np.zeros((d, d), dtype=complex)
    for x, a in enumerate(s.outcomes):
        if a is None:
            g += f.alpha * np.eye(d)
        elif a >= d:
            raise ValueError(f"outcome {a} out of range for d = {d}")
        else:
            g += f.click[x, a]
    return g


def _digits(start: int, stop: int, n: int, base: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for x in range(n - 1, -1, -1):
        idx, out[:, x] = np.divmod(idx, base)
    return out


def _scan_chunk(ops: np.ndarray, start: int, stop: int):
    """Norms of every strategy with linear index in [start, stop).

    Returns (max, argmax index, per-class maxima array).
    """
    n, base = ops.shape[0], ops.shape[1]
    d = base - 1
    digits = _digits(start, stop, n, base)
    g = ops[np.arange(n), digits].sum(axis=1)
    norms = np.abs(np.linalg.eigvalsh(g)).max(axis=1)
    top = norms.max()
    # first index within TIE_TOL of the chunk max
    arg = start + int(np.argmax(norms >= top - TIE_TOL))
    k = (digits == d).sum(axis=1)
    per_class = np.full(n + 1, -np.inf)
    np.maximum.at(per_class, k, norms)
    return float(top), arg, per_class


def _combine(p, q):
    """Order-independent reduction of two chunk results."""
    (m1, i1, c1), (m2, i2, c2) = p, q
    if abs(m1 - m2) <= TIE_TOL:
        best = (max(m1, m2), min(i1, i2))
    elif m1 > m2:
        best = (m1, i1)
    else:
        best = (m2, i2)
    return best[0], best[1], np.maximum(c1, c2)


def thread_count() -> int:
    cap = os.environ.get("STEERKIT_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def exact_lhs_bound(
    f: SteeringFunctional, guard: int | None = ENUMERATION_GUARD, workers: int | None = None
) -> LhsBoundReport:
    """Enumerate every deterministic strategy and maximize ||G_s||.

    Ties within ``TIE_TOL`` go to the lexicographically first strategy. Pass
    ``guard=None`` to lift the enumeration limit.
    """
    n, d = f.n, f.dim
    total = (d + 1) ** n
    if guard is not None and total > guard:
        raise EnumerationGuardError(total, guard)
    ops = f.operators()
    bounds = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]
    workers = workers or thread_count()
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _scan_chunk(ops, *b), bounds))
    else:
        results = [_scan_chunk(ops, *b) for b in bounds]
    best = results[0]
    for r in results[1:]:
        best = _combine(best, r)
    top, arg, per_class = best
    return LhsBoundReport(
        analytic_bound=functional_analytic_bound(f),
        exact_bound=top,
        argmax_strategy=DeterministicStrategy.from_index(arg, n, d),
        per_class_max={k: float(v) for k, v in enumerate(per_class)},
        cos_theta=f.cos_theta,
        alpha=f.alpha,
        strategies=total,
    )


def projector_sum_norm_check(projectors) -> tuple[float, float]:
    """Norm of a sum of rank-1 projectors and the pairwise-overlap bound.

    Returns ``(||sum||, 1 + (l-1) cos_phi)`` with ``cos_phi`` the largest
    ``||P_i P_j||`` over pairs (equal to ``sqrt(tr(P_i P_j))`` for rank-1
    inputs, but without the square root's loss of accuracy near zero).
    """
    projs = [matcore.as_matrix(p) for p in projectors]
    if not projs:
        raise ValueError("need at least one projector")
    for i, p in enumerate(projs):
        if not matcore.is_rank1_projector(p):
            raise ValueError(f"input {i} is not a rank-1 projector")
    lhs = matcore.op_norm_hermitian(sum(projs))
    cos_phi = 0.0
    for p, q in itertools.combinations(projs, 2):
        cos_phi = max(cos_phi, float(np.linalg.norm(p @ q, 2)))
    return lhs, 1.0 + (len(projs) - 1) * min(cos_phi, 1.0)

"""Joint spectral radius bounds and worst-case growth decisions.

The bounds come from a best-first branch-and-bound over the tree of
matrix products (Gripenberg style):

* every explored product ``P`` of length ``k`` gives the lower bound
  ``rho(P)^(1/k)``;
* each node carries ``min`` over its prefixes ``Q`` of ``|Q|^(1/len Q)``.
  Any finite set of nodes covering all infinite branches (pruned leaves
  plus the live frontier) yields the upper bound ``max`` of those values,
  because every long product factors into such prefixes;
* a node is pruned once its value is within ``eps`` of the lower bound;
  the node with the largest value is always expanded next.

Norms are measured in an ellipsoidal norm ``|x|_T = |T x|_2`` chosen from
the set itself (see :func:`ellipsoid_preconditioner`). Any invertible ``T``
gives valid bounds; a good one shortens the products needed to close the gap
by orders of magnitude.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .matcore import as_mat, op_norm, spectral_radius
from .model import SwitchingSystem

__all__ = [
    "JsrBounds",
    "GrowthVerdict",
    "jsr_bounds",
    "decide_growth",
    "decide_stability",
    "ellipsoid_preconditioner",
    "DEFAULT_EPS",
    "DEFAULT_BUDGET",
    "INSTABILITY_MARGIN",
]

DEFAULT_EPS = 1e-3
DEFAULT_BUDGET = 2_000_000
# spectral radii of defective products carry O(sqrt(machine eps)) error, so
# instability is only certified past this margin
INSTABILITY_MARGIN = 1e-7


@dataclass
class JsrBounds:
    lower: float
    upper: float
    witness: tuple[int, ...]
    explored: int
    converged: bool
    eps: float
    history: list[tuple[int, float, float]] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "witness": list(self.witness),
            "explored": self.explored,
            "converged": self.converged,
            "eps": self.eps,
        }


@dataclass
class GrowthVerdict:
    """Outcome of a growth-rate decision at rate ``rate``.

    ``kind`` is ``UpperCertified`` (all trajectories grow at most like
    ``(rate + eps)^t``), ``LowerCertified`` (some signal makes them grow at
    least like ``(rate - eps)^t``) or ``Bracket``. When both certificates
    hold ``kind`` is ``UpperCertified`` and ``facts`` lists both.
    ``stability`` compares the bounds with 1: ``Stable``, ``Unstable`` or
    ``Undetermined``.
    """

    kind: str
    facts: tuple[str, ...]
    rate: float
    eps: float
    stability: str
    bounds: JsrBounds

    @property
    def lower(self) -> float:
        return self.bounds.lower

    @property
    def upper(self) -> float:
        return self.bounds.upper

    def as_dict(self) -> dict:
        out = self.bounds.as_dict()
        out.update(
            verdict=self.stability,
            growth=self.kind,
            facts=list(self.facts),
            rate=self.rate,
        )
        return out


def _as_family(sys) -> dict[int, np.ndarray]:
    if isinstance(sys, SwitchingSystem):
        return dict(sys.matrices)
    if isinstance(sys, Mapping):
        mats = {int(k): as_mat(v) for k, v in sys.items()}
    else:
        mats = {i: as_mat(v) for i, v in enumerate(sys)}
    if not mats:
        raise InvalidInputError("matrix set is empty")
    shapes = {M.shape for M in mats.values()}
    if len(shapes) != 1 or next(iter(shapes))[0] != next(iter(shapes))[1]:
        raise InvalidInputError(f"matrices must be square and equal-sized, got {sorted(shapes)}")
    return dict(sorted(mats.items()))


def ellipsoid_preconditioner(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Factor ``T`` (with ``Q = T^T T``) of an ellipsoidal norm adapted to ``mats``.

    ``Q`` solves ``Q = I + sum_i A_i^T Q A_i / g^2`` for ``g`` slightly above
    ``rho(sum_i A_i (x) A_i)^(1/2)``, which makes every ``A_i`` contract
    towards ``g`` in ``|.|_Q``. Two margins are tried and the one giving
    the smaller largest generator norm wins. Falls back to the identity
    when the set is degenerate.
    """
    n = mats[0].shape[0]
    eye = np.eye(n)
    kron = sum(np.kron(A, A) for A in mats)
    rho2 = math.sqrt(max(abs(np.linalg.eigvals(kron)))) if n > 0 else 0.0
    best, best_val = eye, max(np.linalg.norm(A, 2) for A in mats)
    if not rho2 > 0.0 or not math.isfinite(rho2):
        return best
    kt = sum(np.kron(A.T, A.T) for A in mats)
    for margin in (1.01, 1.1):
        g2 = (margin * rho2) ** 2
        try:
            q = np.linalg.solve(np.eye(n * n) - kt / g2, eye.reshape(-1))
            Q = q.reshape(n, n)
            Q = 0.5 * (Q + Q.T)
            T = np.linalg.cholesky(Q).T
            Tinv = np.linalg.inv(T)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(Tinv)) or np.linalg.cond(T) > 1e8:
            continue
        val = max(np.linalg.norm(T @ A @ Tinv, 2) for A in mats)
        if val < best_val:
            best, best_val = T, val
    return best


def jsr_bounds(
    sys,
    eps: float = DEFAULT_EPS,
    budget: int = DEFAULT_BUDGET,
    *,
    max_depth: int | None = None,
    precondition: bool = True,
    stop: Callable[[float, float], bool] | None = None,
) -> JsrBounds:
    """Certified lower and upper bounds on the joint spectral radius.

    ``budget`` caps the number of products examined. ``stop(lower, upper)``
    may end the search early once it returns true (used by the decision
    procedures). ``max_depth`` caps product length; nodes at that depth stay
    on the frontier.
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    if budget <= 0:
        raise InvalidInputError(f"budget must be positive, got {budget}")
    family = _as_family(sys)
    labels = list(family)
    raw = [family[d] for d in labels]
    if precondition:
        T = ellipsoid_preconditioner(raw)
        Tinv = np.linalg.inv(T)
        mats = [T @ A @ Tinv for A in raw]
    else:
        mats = [np.array(A) for A in raw]

    lower = 0.0
    witness: tuple[int, ...] = ()
    upper = math.inf
    pruned_max = 0.0
    frozen_max = 0.0
    explored = 0
    heap: list = []
    history: list[tuple[int, float, float]] = []

    # products are stored normalised to unit norm with their log-norm kept
    # aside, so long products of a fast-growing set cannot overflow
    def visit(seq, P, logscale, parent_best):
        nonlocal lower, witness, pruned_max, frozen_max, explored
        explored += 1
        k = len(seq)
        nrm = op_norm(P)
        if nrm == 0.0:
            r = val = 0.0
            logn = -math.inf
        else:
            logn = logscale + math.log(nrm)
            rho = spectral_radius(P)
            r = math.exp((logscale + math.log(rho)) / k) if rho > 0.0 else 0.0
            val = min(parent_best, math.exp(logn / k))
            P = P / nrm
        if r > lower or not witness:
            lower, witness = r, tuple(labels[i] for i in seq)
        if val <= lower + eps:
            pruned_max = max(pruned_max, val)
        elif max_depth is not None and k >= max_depth:
            frozen_max = max(frozen_max, val)
        else:
            heapq.heappush(heap, (-val, seq, P, logn))

    for i, A in enumerate(mats):
        visit((i,), A, 0.0, math.inf)

    while True:
        while heap and -heap[0][0] <= lower + eps:
            pruned_max = max(pruned_max, -heapq.heappop(heap)[0])
        top = -heap[0][0] if heap else 0.0
        candidate = max(pruned_max, frozen_max, top, lower)
        if candidate < upper:
            upper = candidate
        if not history or history[-1][1:] != (lower, upper):
            history.append((explored, lower, upper))
        if upper - lower <= eps or not heap:
            break
        if stop is not None and stop(lower, upper):
            break
        if explored + len(mats) > budget:
            break
        negval, seq, P, logn = heapq.heappop(heap)
        for i, A in enumerate(mats):
            visit(seq + (i,), A @ P, logn, -negval)

    return JsrBounds(lower, upper, witness, explored, upper - lower <= eps, eps, history)


def _stability(lower: float, upper: float) -> str:
    if upper < 1.0:
        return "Stable"
    if lower > 1.0 + INSTABILITY_MARGIN:
        return "Unstable"
    return "Undetermined"


def _verdict(b: JsrBounds, rate: float, eps: float) -> GrowthVerdict:
    facts = []
    if b.upper < rate + eps:
        facts.append("UpperCertified")
    if b.lower > rate - eps:
        facts.append("LowerCertified")
    kind = facts[0] if facts else "Bracket"
    return GrowthVerdict(kind, tuple(facts), rate, eps, _stability(b.lower, b.upper), b)


def decide_growth(sys, r: float, eps: float = DEFAULT_EPS, budget: int = DEFAULT_BUDGET,
                  **kwargs) -> GrowthVerdict:
    """Decide whether the worst growth rate is below ``r + eps`` or above ``r - eps``.

    The matrices are scaled by ``1/r`` and the bounds refined until one of
    the two certificates holds or the budget runs out.
    """
    if not r > 0:
        raise InvalidInputError(f"rate must be positive, got {r}")
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    family = _as_family(sys)
    scaled = {d: M / r for d, M in family.items()}
    e = eps / r
    b = jsr_bounds(scaled, e, budget, stop=lambda lo, up: up < 1 + e or lo > 1 - e, **kwargs)
    b = JsrBounds(b.lower * r, b.upper * r, b.witness, b.explored, b.converged, eps,
                  [(k, lo * r, up * r) for k, lo, up in b.history])
    return _verdict(b, r, eps)


def decide_stability(sys, eps: float = DEFAULT_EPS, budget: int = DEFAULT_BUDGET,
                     **kwargs) -> GrowthVerdict:
    """Stable iff the upper bound drops below 1, Unstable iff the lower bound
    exceeds 1, Undetermined otherwise."""
    stop = lambda lo, up: up < 1.0 or lo > 1.0 + INSTABILITY_MARGIN  # noqa: E731
    b = jsr_bounds(sys, eps, budget, stop=stop, **kwargs)
    return _verdict(b, 1.0, eps)

"""Controller synthesis.

* :func:`design_scalar_deadbeat` - closed-form delay-dependent gains that
  drive any scalar loop exactly to zero within ``d_max + 1`` steps.
* :func:`search_indep_gains`, :func:`search_example2_gains` - heuristic
  search over delay-independent gains, each candidate certified by the JSR
  engine. A failed search proves nothing; only the controller-independent
  trace bound in :func:`example2_instability_bound` rules gains out.
* :func:`search_dep_gains` - the same idea for delay-dependent gains, used to
  probe fixed switching patterns.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedInstanceError
from .jsr import DEFAULT_BUDGET, DEFAULT_EPS, GrowthVerdict, decide_stability
from .matcore import spectral_radius
from .model import (
    DelaySet,
    DepController,
    IndepController,
    Plant,
    build_dep_closed_loop,
    build_example2,
    build_indep_closed_loop,
)

__all__ = [
    "DeadbeatResult",
    "SearchResult",
    "design_scalar_deadbeat",
    "ackermann_gain",
    "grid_candidates",
    "random_candidates",
    "search_indep_gains",
    "search_example2_gains",
    "search_dep_gains",
    "example2_instability_bound",
    "default_workers",
]


@dataclass(frozen=True)
class DeadbeatResult:
    controller: DepController
    settle_time: int
    k_ack: np.ndarray


def ackermann_gain(a: float, b: float, d: int) -> np.ndarray:
    """Fixed-delay deadbeat row ``(-a^(d+1)/b, -a^d, ..., -a)``."""
    return np.array([[-(a ** (d + 1)) / b] + [-(a ** s) for s in range(d, 0, -1)]])


def design_scalar_deadbeat(a: float, b: float, D: DelaySet) -> DeadbeatResult:
    """Delay-dependent deadbeat gains for ``x(t+1) = a x(t) + b u(t)``.

    ``K(d) = K_ack / a^(dmax - d)``: rescaling by the delay makes the
    weighted sum ``K_ack . (x, u_1..u_dmax)`` vanish one step after the
    controller first acts, whichever delay the network picks.
    """
    if a == 0 or b == 0:
        raise UnsupportedInstanceError("deadbeat design needs a != 0 and b != 0")
    k_ack = ackermann_gain(a, b, D.d_max)
    gains = {d: k_ack / a ** (D.d_max - d) for d in D}
    return DeadbeatResult(DepController(gains), D.d_max + 1, k_ack)


def grid_candidates(shape: tuple[int, int], values: Sequence[float]) -> Iterable[np.ndarray]:
    """Every matrix of ``shape`` with entries drawn from ``values``."""
    size = shape[0] * shape[1]
    for combo in itertools.product(values, repeat=size):
        yield np.array(combo, dtype=float).reshape(shape)


def random_candidates(shape: tuple[int, int], count: int, seed: int = 0,
                      scale: float = 1.0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.uniform(-scale, scale, size=shape) for _ in range(count)]


@dataclass
class SearchResult:
    """Best candidate (smallest JSR upper bound) and its verdict.

    ``found`` is true only when the best candidate is certified Stable.
    ``infeasible_bound`` is a lower bound on the JSR that holds for every
    gain, when one is known.
    """

    controller: Any
    verdict: GrowthVerdict | None
    found: bool
    evaluated: list[tuple[Any, GrowthVerdict]] = field(default_factory=list, repr=False)
    infeasible_bound: float | None = None


def default_workers() -> int:
    env = os.environ.get("SWIDEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidInputError(f"SWIDEL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _evaluate(job):
    build, candidate, eps, budget = job
    return decide_stability(build(candidate), eps, budget)


def _search(candidates, build: Callable, eps: float, budget: int, workers: int) -> SearchResult:
    cands = list(candidates)
    if not cands:
        raise InvalidInputError("search needs at least one candidate")
    jobs = [(build, c, eps, budget) for c in cands]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            verdicts = list(pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        verdicts = [_evaluate(j) for j in jobs]
    evaluated = list(zip(cands, verdicts))
    # stable candidates first, then the smallest upper bound; enumeration
    # order breaks ties
    best = min(
        range(len(evaluated)),
        key=lambda i: (evaluated[i][1].stability != "Stable", evaluated[i][1].upper, i),
    )
    cand, verdict = evaluated[best]
    return SearchResult(cand, verdict, verdict.stability == "Stable", evaluated)


class _IndepBuilder:
    def __init__(self, plant, D):
        self.plant, self.D = plant, D

    def __call__(self, K):
        ctrl = K if isinstance(K, IndepController) else IndepController(K)
        return build_indep_closed_loop(self.plant, self.D, ctrl)


class _Example2Builder:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, gains):
        k1, k2 = gains
        return build_example2(self.a, self.b, k1, k2)


def search_indep_gains(plant: Plant, D: DelaySet, candidates, eps: float = DEFAULT_EPS,
                       budget: int = 20_000, workers: int = 1) -> SearchResult:
    """Search delay-independent gains ``K`` (arrays or controllers).

    The returned controller is an :class:`IndepController`.
    """
    res = _search(candidates, _IndepBuilder(plant, D), eps, budget, workers)
    if not isinstance(res.controller, IndepController):
        res.controller = IndepController(res.controller)
    return res


def example2_instability_bound(a: float, b: float) -> float:
    """Gain-independent JSR lower bound for the memory-of-x scalar loop.

    ``trace(M_1) = a`` whatever the gains, so ``rho(M_1) >= |a| / 3``.
    """
    return abs(a) / 3.0


def search_example2_gains(a: float, b: float, k1_values: Sequence[float],
                          k2_values: Sequence[float], eps: float = DEFAULT_EPS,
                          budget: int = 20_000, workers: int = 1) -> SearchResult:
    """Grid search over ``(k1, k2)`` for the scalar loop that stores ``x(t-1)``."""
    grid = [(float(k1), float(k2)) for k1 in k1_values for k2 in k2_values]
    res = _search(grid, _Example2Builder(a, b), eps, budget, workers)
    bound = example2_instability_bound(a, b)
    res.infeasible_bound = bound if bound > 1.0 else None
    return res


def search_dep_gains(plant: Plant, D: DelaySet, candidates, *, period: Sequence[int] | None = None,
                     eps: float = DEFAULT_EPS, budget: int = 20_000) -> SearchResult:
    """Search delay-dependent gain families.

    Each candidate is a :class:`DepController` or a mapping ``d -> K(d)``.
    With ``period`` the candidates are ranked by the exact growth rate
    ``rho(M_{p[-1]} ... M_{p[0]})^(1/len p)`` under that periodic signal;
    ``verdict`` is then None and ``found`` means that rate is below one.
    Without it, candidates are certified against arbitrary switching.
    """
    ctrls = [c if isinstance(c, DepController) else DepController(c) for c in candidates]
    if not ctrls:
        raise InvalidInputError("search needs at least one candidate")
    if period is None:
        return _search(ctrls, lambda c: build_dep_closed_loop(plant, D, c), eps, budget, 1)
    rates = []
    for c in ctrls:
        sys = build_dep_closed_loop(plant, D, c)
        rates.append(spectral_radius(sys.product(period)) ** (1.0 / len(period)))
    best = int(np.argmin(rates))
    res = SearchResult(ctrls[best], None, rates[best] < 1.0,
                       [(c, r) for c, r in zip(ctrls, rates)])
    return res

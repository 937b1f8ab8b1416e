"""Plants, delay sets, controllers and the closed-loop matrix builders.

Extended-state layouts (block order is fixed):

* delay-dependent loop: ``(x, u_1, ..., u_dmax)``, dimension ``n + dmax*m``
* delay-independent loop: ``(x, u_1, ..., u_dmax, v(t-dmax), ..., v(t-1))``,
  dimension ``n + 2*dmax*m``, controller memory oldest first

``u_s`` is the sum of in-flight commands that reach the actuator ``s - 1``
steps from now, so ``u_1`` is the input applied at the current step. A
command emitted with delay ``d = 0`` acts on the plant immediately; with
``d >= 1`` it is added to queue slot ``u_d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidInputError, ShapeError
from .matcore import as_mat

__all__ = [
    "Plant",
    "DelaySet",
    "DepController",
    "IndepController",
    "SwitchingSystem",
    "build_dep_closed_loop",
    "build_indep_closed_loop",
    "build_example2",
    "build_hardness_gadget",
]


@dataclass(frozen=True)
class Plant:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_mat(self.A, name="A")
        B = as_mat(self.B, name="B")
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ShapeError(f"B must have {A.shape[0]} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def scalar(cls, a: float, b: float) -> "Plant":
        return cls([[a]], [[b]])


@dataclass(frozen=True)
class DelaySet:
    """Sorted, duplicate-free set of nonnegative integer delays."""

    delays: tuple[int, ...]

    def __post_init__(self):
        ds = tuple(self.delays)
        if not ds:
            raise InvalidInputError("delay set must be nonempty")
        for d in ds:
            if isinstance(d, bool) or int(d) != d or d < 0:
                raise InvalidInputError(f"delays must be nonnegative integers, got {d!r}")
        ds = tuple(int(d) for d in ds)
        if len(set(ds)) != len(ds):
            raise InvalidInputError(f"duplicate delays in {ds}")
        if list(ds) != sorted(ds):
            raise InvalidInputError(f"delays must be increasing, got {ds}")
        object.__setattr__(self, "delays", ds)

    @classmethod
    def of(cls, delays) -> "DelaySet":
        """Build from any iterable, sorting and deduplicating first."""
        return cls(tuple(sorted(set(int(d) for d in delays))))

    @property
    def d_max(self) -> int:
        return self.delays[-1]

    def __iter__(self):
        return iter(self.delays)

    def __len__(self):
        return len(self.delays)

    def __contains__(self, d) -> bool:
        return d in self.delays


def _gain_shape(plant: Plant, D: DelaySet) -> tuple[int, int]:
    return plant.m, plant.m * D.d_max + plant.n


@dataclass(frozen=True)
class DepController:
    """Delay-dependent gains ``K(d)`` acting on ``(x, u_1, ..., u_dmax)``."""

    gains: Mapping[int, np.ndarray]

    def __post_init__(self):
        gains = {int(d): as_mat(K, name=f"K({d})") for d, K in dict(self.gains).items()}
        shapes = {K.shape for K in gains.values()}
        if len(shapes) > 1:
            raise ShapeError(f"delay-dependent gains have mixed shapes {sorted(shapes)}")
        object.__setattr__(self, "gains", dict(sorted(gains.items())))

    def check(self, plant: Plant, D: DelaySet) -> None:
        want = _gain_shape(plant, D)
        if set(self.gains) != set(D.delays):
            raise ShapeError(
                f"need one gain per delay {list(D.delays)}, got {sorted(self.gains)}"
            )
        for d, K in self.gains.items():
            if K.shape != want:
                raise ShapeError(f"K({d}) must be {want[0]}x{want[1]}, got {K.shape}")

    @classmethod
    def zero(cls, plant: Plant, D: DelaySet) -> "DepController":
        shape = _gain_shape(plant, D)
        return cls({d: np.zeros(shape) for d in D})


@dataclass(frozen=True)
class IndepController:
    """Single gain ``K = (K_0 | K_1 | ... | K_dmax)`` acting on ``(x, V)``."""

    K: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", as_mat(self.K, name="K"))

    def check(self, plant: Plant, D: DelaySet) -> None:
        want = _gain_shape(plant, D)
        if self.K.shape != want:
            raise ShapeError(f"K must be {want[0]}x{want[1]}, got {self.K.shape}")

    def blocks(self, plant: Plant, D: DelaySet) -> list[np.ndarray]:
        """``[K_0, K_1, ..., K_dmax]`` with ``K_0`` of width n, the rest width m."""
        self.check(plant, D)
        n, m = plant.n, plant.m
        return [self.K[:, :n]] + [
            self.K[:, n + (s - 1) * m : n + s * m] for s in range(1, D.d_max + 1)
        ]

    @classmethod
    def zero(cls, plant: Plant, D: DelaySet) -> "IndepController":
        return cls(np.zeros(_gain_shape(plant, D)))


@dataclass(frozen=True)
class SwitchingSystem:
    """A finite family of square matrices indexed by delay label.

    ``layout`` lists ``(block name, size)`` pairs describing the extended
    state, e.g. ``(("x", 2), ("u_1", 1), ("u_2", 1))``.
    """

    matrices: Mapping[int, np.ndarray]
    layout: tuple[tuple[str, int], ...] = ()
    kind: str = "explicit"
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        mats = {int(d): as_mat(M, name=f"M_{d}") for d, M in dict(self.matrices).items()}
        if not mats:
            raise InvalidInputError("switching system needs at least one matrix")
        shapes = {M.shape for M in mats.values()}
        if len(shapes) != 1:
            raise ShapeError(f"matrices have different shapes {sorted(shapes)}")
        (shape,) = shapes
        if shape[0] != shape[1]:
            raise ShapeError(f"matrices must be square, got {shape}")
        layout = tuple((str(name), int(size)) for name, size in self.layout)
        if not layout:
            layout = (("w", shape[0]),)
        if sum(size for _, size in layout) != shape[0]:
            raise ShapeError(f"layout {layout} does not add up to dimension {shape[0]}")
        object.__setattr__(self, "matrices", dict(sorted(mats.items())))
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def dim(self) -> int:
        return next(iter(self.matrices.values())).shape[0]

    @property
    def labels(self) -> list[int]:
        return list(self.matrices)

    def __getitem__(self, d: int) -> np.ndarray:
        return self.matrices[d]

    def __len__(self) -> int:
        return len(self.matrices)

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for name, size in self.layout:
            out[name] = slice(start, start + size)
            start += size
        return out

    def product(self, sequence) -> np.ndarray:
        """``M_{s[k-1]} ... M_{s[0]}`` for a time-ordered delay sequence."""
        P = np.eye(self.dim)
        for d in sequence:
            P = self.matrices[d] @ P
        return P

    def scaled(self, c: float) -> "SwitchingSystem":
        return SwitchingSystem(
            {d: c * M for d, M in self.matrices.items()}, self.layout, self.kind, self.meta
        )


def _queue_layout(prefix: str, count: int, m: int) -> list[tuple[str, int]]:
    return [(f"{prefix}{s}", m) for s in range(1, count + 1)]


def _dep_base(plant: Plant, d_max: int) -> np.ndarray:
    """Open-loop shift system on ``(x, u_1, ..., u_dmax)``."""
    n, m = plant.n, plant.m
    N = n + d_max * m
    base = np.zeros((N, N))
    base[:n, :n] = plant.A
    if d_max >= 1:
        base[:n, n : n + m] = plant.B
        for s in range(1, d_max):
            r0 = n + (s - 1) * m
            base[r0 : r0 + m, r0 + m : r0 + 2 * m] = np.eye(m)
    return base


def _injection(plant: Plant, d_max: int, d: int, width: int) -> np.ndarray:
    """E(d): ``B`` in the x block for ``d = 0``, identity in slot ``u_d`` otherwise."""
    n, m = plant.n, plant.m
    E = np.zeros((width, m))
    if d == 0:
        E[:n] = plant.B
    else:
        r0 = n + (d - 1) * m
        E[r0 : r0 + m] = np.eye(m)
    return E


def build_dep_closed_loop(
    plant: Plant, D: DelaySet, ctrl: DepController
) -> SwitchingSystem:
    """One matrix ``M_d = base + E(d) K(d)`` per delay."""
    ctrl.check(plant, D)
    base = _dep_base(plant, D.d_max)
    N = base.shape[0]
    mats = {d: base + _injection(plant, D.d_max, d, N) @ ctrl.gains[d] for d in D}
    layout = [("x", plant.n)] + _queue_layout("u_", D.d_max, plant.m)
    return SwitchingSystem(
        mats, tuple(layout), "delay_dependent", {"n": plant.n, "m": plant.m, "d_max": D.d_max}
    )


def build_indep_closed_loop(
    plant: Plant, D: DelaySet, ctrl: IndepController
) -> SwitchingSystem:
    """Augmented-state reduction of the delay-independent loop.

    The controller output ``v = K_0 x + sum_s K_s v(t - dmax + s - 1)`` is a
    row of the state; it is routed to the plant (``d = 0``) or to queue slot
    ``u_d`` and appended to the controller memory.
    """
    ctrl.check(plant, D)
    n, m, dm = plant.n, plant.m, D.d_max
    N = n + 2 * dm * m
    mem0 = n + dm * m
    # v as a linear functional of the full state
    v_row = np.zeros((m, N))
    v_row[:, :n] = ctrl.K[:, :n]
    v_row[:, mem0:] = ctrl.K[:, n:]

    base = np.zeros((N, N))
    base[: n + dm * m, : n + dm * m] = _dep_base(plant, dm)
    for k in range(1, dm):
        r0 = mem0 + (k - 1) * m
        base[r0 : r0 + m, r0 + m : r0 + 2 * m] = np.eye(m)
    if dm >= 1:
        base[N - m :, :] = v_row

    mats = {}
    for d in D:
        M = base.copy()
        M += _injection(plant, dm, d, N) @ v_row
        mats[d] = M
    layout = (
        [("x", n)]
        + _queue_layout("u_", dm, m)
        + [(f"v_mem_{k}", m) for k in range(1, dm + 1)]
    )
    return SwitchingSystem(
        mats, tuple(layout), "delay_independent", {"n": n, "m": m, "d_max": dm}
    )


def build_example2(a: float, b: float, k1: float, k2: float) -> SwitchingSystem:
    """Scalar loop with ``D = {0, 1}`` whose controller remembers ``x(t-1)``.

    State is ``(x(t-1), x(t), u_1(t))`` and ``v(t) = k1 x(t-1) + k2 x(t)``.
    """
    M0 = [[0.0, 1.0, 0.0], [b * k1, a + b * k2, 1.0], [0.0, 0.0, 0.0]]
    M1 = [[0.0, 1.0, 0.0], [0.0, a, 1.0], [b * k1, b * k2, 0.0]]
    return SwitchingSystem(
        {0: M0, 1: M1},
        (("x_prev", 1), ("x", 1), ("u_1", 1)),
        "example2",
        {"a": a, "b": b, "k1": k1, "k2": k2},
    )


def build_hardness_gadget(A1, A2) -> tuple[Plant, DelaySet, DepController]:
    """Embed the semigroup generated by ``{A1, A2}`` into a delay-dependent loop.

    Plant ``A = 0, B = I`` with ``D = {0, 1}`` and gains
    ``K(0) = (A1 | -I)``, ``K(1) = (A2 | 0)``. The closed loop is

        M_0 = [[A1, 0], [0, 0]],   M_1 = [[0, I], [A2, 0]]

    so each block column of any product carries exactly one nonzero block,
    an ordered product of ``A1``/``A2`` factors: delay 0 applies ``A1`` to
    the plant block, two delay-1 steps route the state through the queue
    and apply ``A2``. Every word over ``{A1, A2}`` is realised, hence the
    loop is stable (bounded) iff the semigroup is.
    """
    A1 = as_mat(A1, name="A1")
    A2 = as_mat(A2, name="A2")
    if A1.shape != A2.shape or A1.shape[0] != A1.shape[1]:
        raise ShapeError(f"A1 and A2 must be square of equal size, got {A1.shape}, {A2.shape}")
    n = A1.shape[0]
    plant = Plant(np.zeros((n, n)), np.eye(n))
    D = DelaySet((0, 1))
    ctrl = DepController(
        {0: np.hstack([A1, -np.eye(n)]), 1: np.hstack([A2, np.zeros((n, n))])}
    )
    return plant, D, ctrl

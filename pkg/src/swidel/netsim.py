"""Direct step-by-step semantics of the networked loop.

Nothing here builds closed-loop matrices: the controller output, arrival
queue and controller memory are updated explicitly, which is what makes
this module a useful cross-check for :mod:`swidel.model`.

Per step, with delay ``d`` chosen by the network:

1. the controller emits ``v`` from what it can see (``(x, u_1..u_dmax)``
   when it knows the delays, ``(x, v(t-dmax)..v(t-1))`` otherwise);
2. the plant receives ``u_1`` plus ``v`` itself when ``d = 0``; an empty
   arrival slot contributes zero input;
3. the queue shifts towards the actuator and ``v`` joins slot ``u_d``;
4. ``v`` is appended to the controller memory.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidDelayError, InvalidInputError, ShapeError
from .model import DelaySet, DepController, IndepController, Plant, SwitchingSystem

__all__ = [
    "NetState",
    "SwitchingSignal",
    "Trajectory",
    "initial_state",
    "step",
    "simulate",
    "gen_signal",
    "parse_signal",
    "iterate",
    "write_csv",
    "DIVERGENCE_NORM",
]

DIVERGENCE_NORM = 1e12

Controller = DepController | IndepController | None


@dataclass(frozen=True)
class NetState:
    x: np.ndarray
    queue: np.ndarray  # shape (d_max, m); row s-1 holds u_s
    memory: np.ndarray  # shape (d_max, m); oldest output first
    t: int = 0

    def extended(self, full: bool = False) -> np.ndarray:
        """``(x, u_1..u_dmax)``, or with the memory appended when ``full``."""
        parts = [self.x, self.queue.ravel()]
        if full:
            parts.append(self.memory.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_extended(cls, w, n: int, m: int, d_max: int, t: int = 0) -> "NetState":
        w = np.asarray(w, dtype=float)
        q_end = n + d_max * m
        if w.size not in (q_end, q_end + d_max * m):
            raise ShapeError(f"extended state of length {w.size} does not fit n={n}, m={m}, d_max={d_max}")
        memory = w[q_end:] if w.size > q_end else np.zeros(d_max * m)
        return cls(
            w[:n].copy(), w[n:q_end].reshape(d_max, m).copy(), memory.reshape(d_max, m).copy(), t
        )


def initial_state(plant: Plant, D: DelaySet, x0, queue=None, memory=None) -> NetState:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != plant.n:
        raise ShapeError(f"x0 must have length {plant.n}, got {x0.size}")
    shape = (D.d_max, plant.m)
    q = np.zeros(shape) if queue is None else np.asarray(queue, dtype=float).reshape(shape)
    mem = np.zeros(shape) if memory is None else np.asarray(memory, dtype=float).reshape(shape)
    return NetState(x0, q, mem, 0)


def controller_output(plant: Plant, D: DelaySet, ctrl: Controller, s: NetState, d: int) -> np.ndarray:
    if ctrl is None:
        return np.zeros(plant.m)
    if isinstance(ctrl, DepController):
        return ctrl.gains[d] @ np.concatenate([s.x, s.queue.ravel()])
    if isinstance(ctrl, IndepController):
        return ctrl.K @ np.concatenate([s.x, s.memory.ravel()])
    raise InvalidInputError(f"unsupported controller {type(ctrl).__name__}")


def step(plant: Plant, D: DelaySet, ctrl: Controller, s: NetState, d: int) -> NetState:
    """Advance the loop by one time step under delay ``d``."""
    if d not in D:
        raise InvalidDelayError(f"delay {d!r} is not in {list(D.delays)}")
    v = controller_output(plant, D, ctrl, s, d)
    applied = s.queue[0] if D.d_max >= 1 else np.zeros(plant.m)
    if d == 0:
        applied = applied + v
    x = plant.A @ s.x + plant.B @ applied
    queue = np.zeros_like(s.queue)
    if D.d_max >= 1:
        queue[:-1] = s.queue[1:]
        if d >= 1:
            queue[d - 1] += v
        memory = np.vstack([s.memory[1:], v[None, :]])
    else:
        memory = s.memory
    return NetState(x, queue, memory, s.t + 1)


@dataclass(frozen=True)
class SwitchingSignal:
    """A rule producing delays from ``D``.

    ``kind`` is one of ``constant``, ``periodic``, ``random``, ``greedy`` or
    ``explicit``. Every kind except ``greedy`` is open-loop and can be
    materialised with :meth:`values`; ``greedy`` picks, at each step, the
    delay whose successor extended state has the largest norm (ties go to
    the smaller delay).
    """

    kind: str
    delays: tuple[int, ...]
    pattern: tuple[int, ...] = ()
    seed: int | None = None

    @property
    def adaptive(self) -> bool:
        return self.kind == "greedy"

    def values(self, length: int) -> list[int]:
        if self.kind in ("constant", "periodic"):
            return [self.pattern[t % len(self.pattern)] for t in range(length)]
        if self.kind == "explicit":
            if length > len(self.pattern):
                raise InvalidInputError(
                    f"explicit signal has {len(self.pattern)} values, {length} requested"
                )
            return list(self.pattern[:length])
        if self.kind == "random":
            rng = np.random.default_rng(self.seed)
            idx = rng.integers(0, len(self.delays), size=length)
            return [self.delays[i] for i in idx]
        raise InvalidInputError(f"{self.kind} signal has no open-loop values")


def gen_signal(kind: str, D: DelaySet, seed: int | None = None, length: int | None = None,
               values: Sequence[int] = ()) -> SwitchingSignal:
    """Build a :class:`SwitchingSignal`; see the class for the kinds."""
    delays = tuple(D.delays) if D is not None else ()
    if not delays:
        raise InvalidInputError("switching signal needs a nonempty delay set")
    values = tuple(int(v) for v in values)
    if kind == "constant":
        if len(values) != 1:
            raise InvalidInputError("constant signal takes exactly one delay")
    elif kind in ("periodic", "explicit"):
        if not values:
            raise InvalidInputError(f"{kind} signal needs at least one delay")
    elif kind == "random":
        seed = 0 if seed is None else int(seed)
    elif kind == "greedy":
        pass
    else:
        raise InvalidInputError(f"unknown signal kind {kind!r}")
    for v in values:
        if v not in D:
            raise InvalidDelayError(f"signal value {v} is not in {list(delays)}")
    if length is not None and kind == "explicit" and len(values) < length:
        raise InvalidInputError(f"explicit signal has {len(values)} values, need {length}")
    return SwitchingSignal(kind, delays, values, seed)


def parse_signal(spec: str, D: DelaySet) -> SwitchingSignal:
    """Parse ``const:d``, ``periodic:d1,d2``, ``random:seed=S``, ``greedy``
    or ``explicit:d1,d2,...``."""
    head, _, rest = spec.strip().partition(":")
    try:
        if head == "const":
            return gen_signal("constant", D, values=[int(rest)])
        if head in ("periodic", "explicit"):
            return gen_signal(head, D, values=[int(v) for v in rest.split(",") if v.strip()])
        if head == "random":
            seed = 0
            if rest:
                key, _, val = rest.partition("=")
                if key != "seed":
                    raise InvalidInputError(f"bad random signal option {rest!r}")
                seed = int(val)
            return gen_signal("random", D, seed=seed)
        if head == "greedy" and not rest:
            return gen_signal("greedy", D)
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"bad signal spec {spec!r}: {exc}") from None
    raise InvalidInputError(f"unknown signal spec {spec!r}")


@dataclass
class Trajectory:
    states: list[NetState]
    signal: list[int]
    growth: list[float]
    diverged: bool = False
    full: bool = False  # whether growth norms include controller memory
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.signal)

    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.states])

    def extended(self) -> np.ndarray:
        return np.array([s.extended(self.full) for s in self.states])


def simulate(plant: Plant, D: DelaySet, ctrl: Controller, signal: SwitchingSignal | Iterable[int],
             x0, horizon: int, *, queue0=None, memory0=None) -> Trajectory:
    """Run the loop for ``horizon`` steps from ``(x0, queue0, memory0)``.

    Queue and memory default to zero. Divergence (extended-state norm above
    ``DIVERGENCE_NORM``) sets ``Trajectory.diverged``; the run continues.
    """
    if horizon < 0:
        raise InvalidInputError("horizon must be nonnegative")
    if isinstance(ctrl, DepController | IndepController):
        ctrl.check(plant, D)
    full = isinstance(ctrl, IndepController)
    s = initial_state(plant, D, x0, queue0, memory0)
    if isinstance(signal, SwitchingSignal):
        chooser = _greedy_chooser(plant, D, ctrl, full) if signal.adaptive else None
        planned = None if signal.adaptive else signal.values(horizon)
    else:
        chooser, planned = None, [int(d) for d in signal]
        if len(planned) < horizon:
            raise InvalidInputError(f"signal has {len(planned)} values, horizon is {horizon}")

    states, sig = [s], []
    growth = [float(np.linalg.norm(s.extended(full)))]
    diverged = growth[0] > DIVERGENCE_NORM
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon):
            d = chooser(s) if chooser else planned[t]
            s = step(plant, D, ctrl, s, d)
            states.append(s)
            sig.append(d)
            nrm = float(np.linalg.norm(s.extended(full)))
            growth.append(nrm)
            if not nrm <= DIVERGENCE_NORM:
                diverged = True
    return Trajectory(states, sig, growth, diverged, full,
                      {"n": plant.n, "m": plant.m, "d_max": D.d_max})


def _greedy_chooser(plant, D, ctrl, full) -> Callable[[NetState], int]:
    def choose(s: NetState) -> int:
        best, best_norm = None, -1.0
        for d in D:
            nrm = float(np.linalg.norm(step(plant, D, ctrl, s, d).extended(full)))
            if nrm > best_norm:
                best, best_norm = d, nrm
        return best

    return choose


def iterate(sys: SwitchingSystem, signal: SwitchingSignal | Iterable[int], w0, horizon: int):
    """Matrix iteration ``w(t+1) = M_{sigma(t)} w(t)``.

    Returns ``(states, realised signal)`` with ``states`` of shape
    ``(horizon + 1, dim)``. Greedy signals maximise ``|w(t+1)|``.
    """
    w = np.asarray(w0, dtype=float).ravel()
    if w.size != sys.dim:
        raise ShapeError(f"initial state must have length {sys.dim}, got {w.size}")
    if isinstance(signal, SwitchingSignal) and not signal.adaptive:
        planned = signal.values(horizon)
    elif isinstance(signal, SwitchingSignal):
        planned = None
    else:
        planned = [int(d) for d in signal]
    out, sig = [w], []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon):
            if planned is None:
                d = max(sys.labels, key=lambda k: (float(np.linalg.norm(sys[k] @ w)), -k))
            else:
                d = planned[t]
                if d not in sys.matrices:
                    raise InvalidDelayError(f"delay {d!r} is not in {sys.labels}")
            w = sys[d] @ w
            out.append(w)
            sig.append(d)
    return np.array(out), sig


def csv_header(n: int, m: int, d_max: int, full: bool) -> list[str]:
    cols = ["t", "sigma"] + [f"x_{i}" for i in range(1, n + 1)]
    cols += [f"u_{s}_{j}" for s in range(1, d_max + 1) for j in range(1, m + 1)]
    if full:
        cols += [f"v_mem_{k}_{j}" for k in range(1, d_max + 1) for j in range(1, m + 1)]
    return cols + ["norm"]


def write_csv(traj: Trajectory, out=None) -> str:
    """Write the trajectory as CSV to ``out`` (path or text stream).

    One row per time step; the delay column is empty on the final row.
    Returns the CSV text.
    """
    meta = traj.meta
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(meta["n"], meta["m"], meta["d_max"], traj.full))
    for t, s in enumerate(traj.states):
        sigma = traj.signal[t] if t < len(traj.signal) else ""
        row = [t, sigma] + [repr(float(v)) for v in s.extended(traj.full)]
        writer.writerow(row + [repr(traj.growth[t])])
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text

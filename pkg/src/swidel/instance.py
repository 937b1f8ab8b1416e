"""Instance files: JSON description of a plant, delays and controller.

Example::

    {
      "plant": {"A": [[0, 2], [2, 0]], "B": [[0], [1]]},
      "delays": [0, 1],
      "controller": {"type": "delay_dependent",
                     "gains": {"0": [[0, 0, 0]], "1": [[0, 0, 0]]}},
      "x0": [1, 0],
      "signal": "periodic:0,1"
    }

Controller variants: ``none``, ``delay_dependent`` (``gains``),
``delay_independent`` (``K``), ``example2`` (``a, b`` and optional ``k1, k2``;
no plant needed) and ``hardness_gadget`` (``A1, A2``; plant and delays implied).
A file holding ``matrices`` (such as the output of ``swidel build``) is read
as an explicit switching system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import SwidelError
from .model import (
    DelaySet,
    DepController,
    IndepController,
    Plant,
    SwitchingSystem,
    build_dep_closed_loop,
    build_example2,
    build_hardness_gadget,
    build_indep_closed_loop,
)

CONTROLLER_TYPES = ("none", "delay_dependent", "delay_independent", "example2", "hardness_gadget")


class InstanceError(SwidelError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class Instance:
    plant: Plant | None
    delays: DelaySet | None
    controller: Any  # DepController | IndepController | None
    ctype: str
    x0: np.ndarray | None = None
    w0: np.ndarray | None = None
    signal: str | None = None
    params: dict | None = None
    explicit: SwitchingSystem | None = None

    @property
    def has_netsim(self) -> bool:
        """Whether the instance has direct loop semantics (not just matrices)."""
        return self.plant is not None and self.ctype not in ("example2", "explicit")

    def system(self) -> SwitchingSystem:
        if self.explicit is not None:
            return self.explicit
        if self.ctype == "example2":
            p = self.params
            return build_example2(p["a"], p["b"], p["k1"], p["k2"])
        if isinstance(self.controller, IndepController):
            return build_indep_closed_loop(self.plant, self.delays, self.controller)
        ctrl = self.controller or DepController.zero(self.plant, self.delays)
        return build_dep_closed_loop(self.plant, self.delays, ctrl)


def _matrix(value, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise InstanceError(field, "expected a nonempty nested row-major array")
    widths = {len(r) for r in value}
    if len(widths) != 1 or 0 in widths:
        raise InstanceError(field, "rows must be nonempty and of equal length")
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InstanceError(field, "entries must be numbers") from None
    if not np.all(np.isfinite(M)):
        raise InstanceError(field, "entries must be finite")
    return M


def _vector(value, field: str) -> np.ndarray:
    if not isinstance(value, list):
        raise InstanceError(field, "expected an array of numbers")
    try:
        v = np.array(value, dtype=float).ravel()
    except (TypeError, ValueError):
        raise InstanceError(field, "entries must be numbers") from None
    if not np.all(np.isfinite(v)):
        raise InstanceError(field, "entries must be finite")
    return v


def _number(obj: dict, key: str, field: str) -> float:
    if key not in obj:
        raise InstanceError(f"{field}.{key}", "missing")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InstanceError(f"{field}.{key}", "expected a number")
    return float(val)


def _guard(field: str, fn, *args):
    try:
        return fn(*args)
    except InstanceError:
        raise
    except (SwidelError, ValueError) as exc:
        raise InstanceError(field, str(exc)) from None


def _explicit(data: dict) -> SwitchingSystem:
    mats = data["matrices"]
    if not isinstance(mats, dict) or not mats:
        raise InstanceError("matrices", "expected a nonempty object delay -> matrix")
    parsed = {}
    for key, val in mats.items():
        try:
            d = int(key)
        except ValueError:
            raise InstanceError(f"matrices.{key}", "keys must be integer delays") from None
        parsed[d] = _matrix(val, f"matrices.{key}")
    layout = data.get("layout") or ()
    try:
        layout = tuple((b["name"], int(b["size"])) for b in layout)
    except (TypeError, KeyError, ValueError):
        raise InstanceError("layout", "expected a list of {name, size} objects") from None
    return _guard("matrices", SwitchingSystem, parsed, layout, data.get("kind", "explicit"))


def parse_instance(data: Any) -> Instance:
    """Validate a decoded JSON instance; errors name the offending field."""
    if not isinstance(data, dict):
        raise InstanceError("instance", "expected a JSON object")
    if "matrices" in data:
        sys = _explicit(data)
        w0 = _vector(data["w0"], "w0") if "w0" in data else None
        return Instance(None, DelaySet.of(sys.labels), None, "explicit", None, w0,
                        data.get("signal"), None, sys)

    ctrl_data = data.get("controller", {"type": "none"})
    if not isinstance(ctrl_data, dict) or "type" not in ctrl_data:
        raise InstanceError("controller", "expected an object with a 'type' field")
    ctype = ctrl_data["type"]
    if ctype not in CONTROLLER_TYPES:
        raise InstanceError("controller.type", f"must be one of {', '.join(CONTROLLER_TYPES)}")

    signal = data.get("signal")
    if signal is not None and not isinstance(signal, str):
        raise InstanceError("signal", "expected a signal spec string")

    if ctype == "example2":
        params = {k: _number(ctrl_data, k, "controller") for k in ("a", "b")}
        # gains may be omitted when the instance only feeds a gain search
        params.update({k: _number(ctrl_data, k, "controller") if k in ctrl_data else 0.0
                       for k in ("k1", "k2")})
        plant = Plant.scalar(params["a"], params["b"])
        w0 = _vector(data["w0"], "w0") if "w0" in data else None
        if w0 is not None and w0.size != 3:
            raise InstanceError("w0", "example2 state has length 3 (x(t-1), x(t), u_1)")
        return Instance(plant, DelaySet((0, 1)), None, ctype, None, w0, signal, params)

    if ctype == "hardness_gadget":
        A1 = _matrix(ctrl_data.get("A1"), "controller.A1")
        A2 = _matrix(ctrl_data.get("A2"), "controller.A2")
        plant, D, ctrl = _guard("controller", build_hardness_gadget, A1, A2)
    else:
        if "plant" not in data or not isinstance(data["plant"], dict):
            raise InstanceError("plant", "missing or not an object")
        A = _matrix(data["plant"].get("A"), "plant.A")
        B = _matrix(data["plant"].get("B"), "plant.B")
        plant = _guard("plant", Plant, A, B)
        delays = data.get("delays")
        if not isinstance(delays, list) or not all(
            isinstance(d, int) and not isinstance(d, bool) for d in delays
        ):
            raise InstanceError("delays", "expected an array of nonnegative integers")
        D = _guard("delays", DelaySet, tuple(delays))
        if ctype == "none":
            ctrl = None
        elif ctype == "delay_dependent":
            gains = ctrl_data.get("gains")
            if not isinstance(gains, dict):
                raise InstanceError("controller.gains", "expected an object delay -> matrix")
            parsed = {}
            for key, val in gains.items():
                try:
                    d = int(key)
                except ValueError:
                    raise InstanceError(f"controller.gains.{key}", "keys must be integer delays") from None
                parsed[d] = _matrix(val, f"controller.gains.{key}")
            ctrl = _guard("controller.gains", DepController, parsed)
            _guard("controller.gains", ctrl.check, plant, D)
        else:
            ctrl = IndepController(_matrix(ctrl_data.get("K"), "controller.K"))
            _guard("controller.K", ctrl.check, plant, D)

    x0 = None
    if "x0" in data:
        x0 = _vector(data["x0"], "x0")
        if x0.size != plant.n:
            raise InstanceError("x0", f"expected length {plant.n}, got {x0.size}")
    w0 = None
    if "w0" in data:
        w0 = _vector(data["w0"], "w0")
    return Instance(plant, D, ctrl, ctype, x0, w0, signal)


def load_instance(source: str | Path) -> Instance:
    """Load from a file path, or from inline JSON text."""
    text = str(source)
    path = Path(text)
    try:
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with path.open("r", encoding="utf-8") as fh:
                data = json.load(fh)
    except OSError as exc:
        raise InstanceError("instance", f"cannot read {text}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError("instance", f"invalid JSON: {exc}") from None
    return parse_instance(data)


def system_to_json(sys: SwitchingSystem) -> dict:
    return {
        "kind": sys.kind,
        "dim": sys.dim,
        "layout": [{"name": name, "size": size} for name, size in sys.layout],
        "matrices": {str(d): M.tolist() for d, M in sys.matrices.items()},
    }

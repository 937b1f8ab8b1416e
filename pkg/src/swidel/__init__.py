"""Stability analysis and design for control loops closed over multi-hop
networks with switching propagation delays."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    InvalidDelayError,
    InvalidInputError,
    NumericOverflowError,
    ShapeError,
    SwidelError,
    UnsupportedInstanceError,
)
from .model import (  # noqa: E402
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
from .jsr import JsrBounds, GrowthVerdict, decide_growth, decide_stability, jsr_bounds  # noqa: E402

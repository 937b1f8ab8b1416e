import itertools

import numpy as np
import pytest

from conftest import random_dep_instance, random_indep_instance
from swidel.errors import InvalidInputError, ShapeError
from swidel.model import (
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


def test_plant_and_delay_validation():
    with pytest.raises(ShapeError):
        Plant(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(ShapeError):
        Plant(np.eye(2), np.ones((3, 1)))
    for bad in [(), (-1, 0), (0, 0), (2, 1), (0.5,), (True,)]:
        with pytest.raises(InvalidInputError):
            DelaySet(bad)
    assert DelaySet.of([3, 1, 1]).delays == (1, 3)
    D = DelaySet((0, 2))
    assert D.d_max == 2 and 1 not in D and list(D) == [0, 2]


def test_controller_shape_checks():
    plant = Plant(np.eye(2), np.ones((2, 1)))
    D = DelaySet((0, 2))
    with pytest.raises(ShapeError):
        DepController({0: np.zeros((1, 4)), 2: np.zeros((1, 3))})
    with pytest.raises(ShapeError):
        build_dep_closed_loop(plant, D, DepController({0: np.zeros((1, 4))}))
    with pytest.raises(ShapeError):
        build_dep_closed_loop(plant, D, DepController({0: np.zeros((1, 3)), 2: np.zeros((1, 3))}))
    with pytest.raises(ShapeError):
        build_indep_closed_loop(plant, D, IndepController(np.zeros((1, 5))))


def test_dep_dimensions_and_layout():
    plant = Plant(np.eye(3), np.ones((3, 2)))
    D = DelaySet((1, 3))
    sys = build_dep_closed_loop(plant, D, DepController.zero(plant, D))
    assert sys.dim == 3 + 3 * 2
    assert [name for name, _ in sys.layout] == ["x", "u_1", "u_2", "u_3"]
    assert sys.labels == [1, 3]


def test_zero_controller_repeats_base_matrix():
    plant = Plant([[1.0, 2.0], [0.0, 3.0]], [[0.0], [1.0]])
    D = DelaySet((0, 1, 2))
    sys = build_dep_closed_loop(plant, D, DepController.zero(plant, D))
    expected = np.array([
        [1, 2, 0, 0],
        [0, 3, 1, 0],
        [0, 0, 0, 1],
        [0, 0, 0, 0],
    ], dtype=float)
    for d in D:
        assert np.array_equal(sys[d], expected)


def test_injection_columns_by_delay():
    plant = Plant([[0.5]], [[2.0]])
    D = DelaySet((0, 1, 2))
    K = {0: [[1.0, 0.0, 0.0]], 1: [[0.0, 1.0, 0.0]], 2: [[0.0, 0.0, 1.0]]}
    sys = build_dep_closed_loop(plant, D, DepController(K))
    # d = 0 feeds B v into x, d >= 1 feeds v into slot u_d
    assert sys[0][0].tolist() == [0.5 + 2.0, 2.0, 0.0]
    assert sys[1][1].tolist() == [0.0, 1.0, 1.0]
    assert sys[2][2].tolist() == [0.0, 0.0, 1.0]


def test_base_matrix_is_delay_independent(rng):
    for _ in range(100):
        plant, D, ctrl = random_dep_instance(rng)
        sys = build_dep_closed_loop(plant, D, ctrl)
        n, m = plant.n, plant.m
        bases = []
        for d in D:
            E = np.zeros((sys.dim, m))
            if d == 0:
                E[:n] = plant.B
            else:
                E[n + (d - 1) * m : n + d * m] = np.eye(m)
            bases.append(sys[d] - E @ ctrl.gains[d])
        for B in bases[1:]:
            assert np.allclose(B, bases[0], atol=1e-14)


def test_indep_dimension_and_layout(rng):
    for _ in range(50):
        plant, D, ctrl = random_indep_instance(rng)
        sys = build_indep_closed_loop(plant, D, ctrl)
        assert sys.dim == plant.n + 2 * D.d_max * plant.m
        names = [name for name, _ in sys.layout]
        assert names[0] == "x"
        assert names.count("x") == 1
        assert sum(1 for s in names if s.startswith("v_mem")) == D.d_max


def test_indep_blocks_split():
    plant = Plant(np.eye(2), np.ones((2, 1)))
    D = DelaySet((0, 2))
    K = IndepController(np.arange(4.0).reshape(1, 4))
    blocks = K.blocks(plant, D)
    assert [b.shape for b in blocks] == [(1, 2), (1, 1), (1, 1)]
    assert blocks[2][0, 0] == 3.0


def test_example2_matrices_as_printed():
    sys = build_example2(1.1, 1.0, 0.0, -0.5)
    assert np.allclose(sys[0], [[0, 1, 0], [0, 1.1 - 0.5, 1], [0, 0, 0]])
    assert np.allclose(sys[1], [[0, 1, 0], [0, 1.1, 1], [0, -0.5, 0]])
    # the trace of M_1 does not depend on the gains
    for k1, k2 in itertools.product([-3.0, 0.0, 2.5], repeat=2):
        assert np.trace(build_example2(3.5, 1.0, k1, k2)[1]) == 3.5


def test_gadget_structure():
    A1 = np.array([[1.0, 2.0], [3.0, 4.0]])
    A2 = np.array([[0.5, 0.0], [1.0, -1.0]])
    plant, D, ctrl = build_hardness_gadget(A1, A2)
    assert np.array_equal(plant.A, np.zeros((2, 2))) and np.array_equal(plant.B, np.eye(2))
    assert D.delays == (0, 1)
    sys = build_dep_closed_loop(plant, D, ctrl)
    Z, I = np.zeros((2, 2)), np.eye(2)
    assert np.array_equal(sys[0], np.block([[A1, Z], [Z, Z]]))
    assert np.array_equal(sys[1], np.block([[Z, I], [A2, Z]]))
    with pytest.raises(ShapeError):
        build_hardness_gadget(np.eye(2), np.eye(3))


def test_gadget_zero_pair():
    plant, D, ctrl = build_hardness_gadget(np.zeros((1, 1)), np.zeros((1, 1)))
    sys = build_dep_closed_loop(plant, D, ctrl)
    # M_0 vanishes; M_1 is the pure shift, which is nilpotent
    assert np.array_equal(sys[0], np.zeros((2, 2)))
    assert np.array_equal(sys[1] @ sys[1], np.zeros((2, 2)))


def test_product_is_time_ordered():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[1.0, 0.0], [1.0, 1.0]])
    sys = SwitchingSystem({0: A, 1: B})
    assert np.array_equal(sys.product([0, 1]), B @ A)
    assert np.array_equal(sys.product([]), np.eye(2))
    assert np.array_equal(sys.scaled(2.0)[0], 2 * A)


def test_switching_system_validation():
    with pytest.raises(InvalidInputError):
        SwitchingSystem({})
    with pytest.raises(ShapeError):
        SwitchingSystem({0: np.eye(2), 1: np.eye(3)})
    with pytest.raises(ShapeError):
        SwitchingSystem({0: np.ones((2, 3))})
    with pytest.raises(ShapeError):
        SwitchingSystem({0: np.eye(2)}, (("x", 3),))

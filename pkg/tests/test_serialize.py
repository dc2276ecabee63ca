import json

import numpy as np
import pytest

from conftest import random_matrix, random_stochgen, random_structure_data, random_superop
from qsgen.errors import InputError
from qsgen.exclusion import LatticeConfig, chain
from qsgen.generators import forward_transform
from qsgen.semigroups import StepFunction
from qsgen.serialize import (
    complex_from_json,
    complex_to_json,
    generator_from_json,
    generator_to_json,
    global_from_json,
    matrix_from_json,
    matrix_to_json,
    structure_data_from_json,
    structure_data_to_json,
    superop_from_json,
    superop_to_json,
    vector_from_json,
)


def through_text(obj):
    return json.loads(json.dumps(obj))


def test_complex_scalars():
    assert complex_to_json(1 - 2j) == [1.0, -2.0]
    assert complex_from_json([0.5, 3]) == 0.5 + 3j
    assert complex_from_json(2.0) == 2


def test_real_input_is_accepted():
    assert np.array_equal(matrix_from_json([[1, 2], [3, 4]]), [[1, 2], [3, 4]])
    assert np.array_equal(vector_from_json([1, 0]), [1, 0])


def test_malformed_input():
    with pytest.raises(InputError):
        matrix_from_json([[1, 2], [3]])
    with pytest.raises(InputError):
        matrix_from_json([[[1, 2, 3]]])
    with pytest.raises(InputError):
        vector_from_json(["a"])
    with pytest.raises(InputError):
        matrix_from_json([[float("nan")]])


def test_matrix_round_trip_is_exact(rng):
    a = random_matrix(rng, 3, 2)
    assert np.array_equal(matrix_from_json(through_text(matrix_to_json(a))), a)


def test_superop_round_trip(rng):
    phi = random_superop(rng, 2, 3)
    back = superop_from_json(through_text(superop_to_json(phi)))
    assert back.n_in == 2 and back.n_out == 3 and np.array_equal(back.kernel, phi.kernel)


def test_generator_round_trip(rng):
    phi = random_stochgen(rng, 2, 2)
    obj = through_text(generator_to_json(phi))
    assert obj["kind"] == "stochastic"
    assert generator_from_json(obj).distance(phi) == 0
    glob = forward_transform(phi)
    assert global_from_json(through_text(generator_to_json(glob))).distance(glob) == 0


def test_generator_shape_checks(rng):
    obj = generator_to_json(random_stochgen(rng, 2, 1))
    bad = dict(obj, d=2)
    with pytest.raises(InputError):
        generator_from_json(bad)
    bad = dict(obj, n=3)
    with pytest.raises(InputError):
        generator_from_json(bad)
    with pytest.raises(InputError):
        generator_from_json({"n": 1})


def test_structure_data_round_trip(rng):
    s = random_structure_data(rng, 2, 1)
    back = structure_data_from_json(through_text(structure_data_to_json(s)))
    assert np.array_equal(back.l, s.l) and np.array_equal(back.h, s.h)
    assert back.pi.distance(s.pi) == 0


def test_step_function_and_lattice_round_trips():
    f = StepFunction(np.array([0.0, 0.5]), np.array([[1 + 1j], [-2.0]]))
    g = StepFunction.from_json(through_text(f.to_json()))
    assert np.array_equal(g.breakpoints, f.breakpoints) and np.array_equal(g.values, f.values)
    cfg = chain(2, {(1, 2): 0.3 - 0.1j}, {2: 1.5})
    assert LatticeConfig.from_json(through_text(cfg.to_json())).to_json() == cfg.to_json()

import numpy as np
import pytest

import sparsegrids as sg


@pytest.fixture(scope="session")
def smolyak_cc_unit_w3():
    """The reference Smolyak grid: N=2, w=3, Clenshaw-Curtis on [0,1]^2."""
    rule, level_map = sg.preset("SM")
    grid = sg.build_sparse_grid_from_rule(2, 3, sg.cc_family(0.0, 1.0), level_map, rule)
    return grid, sg.reduce_grid(grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import numpy as np
import pytest

from spinfilter import (
    CapacityError,
    alpha,
    block_layout,
    degeneracy,
    irrep_operators,
)
from util import branching_degeneracy


def test_degeneracy_small_values():
    assert degeneracy(4, 4) == 1  # unique maximal multiplet
    # counted independently on the branching diagram
    assert degeneracy(4, 2) == 3 == branching_degeneracy(4, 2)
    assert degeneracy(4, 0) == 2 == branching_degeneracy(4, 0)
    # alpha_4^0 = 1 + 3 + 2 = 6, the steady-state purity denominator
    assert degeneracy(4, 4) + degeneracy(4, 2) + degeneracy(4, 0) == 6


def test_degeneracy_matches_branching_recursion():
    for n in range(1, 21):
        for j2 in range(n % 2, n + 1, 2):
            assert degeneracy(n, j2) == branching_degeneracy(n, j2)


def test_degeneracy_rejects_bad_inputs():
    with pytest.raises(ValueError):
        degeneracy(4, 1)  # parity
    with pytest.raises(ValueError):
        degeneracy(4, 6)  # range
    with pytest.raises(ValueError):
        degeneracy(4, -2)
    with pytest.raises(ValueError):
        degeneracy(0, 0)


def test_degeneracy_grows_with_n():
    for n in range(2, 25):
        for j2 in range((n + 2) % 2, n - 1, 2):  # J < N/2, parity of n+2
            if (n - j2) % 2 == 0:
                assert degeneracy(n + 2, j2) > degeneracy(n, j2)


def test_dimension_sum_rule_exact():
    for n in range(1, 31):
        total = sum((j2 + 1) * degeneracy(n, j2) for j2 in range(n % 2, n + 1, 2))
        assert total == 2**n


def test_alpha_values():
    assert alpha(4, 4) == 1
    assert alpha(4, 2) == 4
    assert alpha(4, 0) == 6
    assert alpha(1, 1) == 1
    # |M| symmetry
    assert alpha(4, -2) == alpha(4, 2)
    assert alpha(5, -3) == alpha(5, 3)


def test_alpha_rejects_bad_inputs():
    with pytest.raises(ValueError):
        alpha(4, 1)
    with pytest.raises(ValueError):
        alpha(4, 6)


def test_block_layout_small():
    lay2 = block_layout(2)
    assert [(ir.j2, ir.degeneracy, ir.dim) for ir in lay2.irreps] == [(2, 1, 3), (0, 1, 1)]
    lay3 = block_layout(3)
    assert [(ir.j2, ir.degeneracy) for ir in lay3.irreps] == [(3, 1), (1, 2)]
    assert sum(ir.dim * ir.degeneracy for ir in lay3.irreps) == 8
    lay10 = block_layout(10)
    assert len(lay10.irreps) == 6
    assert [ir.j2 for ir in lay10.irreps] == [10, 8, 6, 4, 2, 0]


def test_block_layout_offsets_and_lookup():
    lay = block_layout(5)
    offset = 0
    for ir in lay.irreps:
        assert ir.offset == offset
        offset += ir.dim**2
    assert lay.total_elements == offset
    assert lay.irreps[lay.index_of(3)].j2 == 3
    assert lay.m_index(3, 3) == 0
    assert lay.m_index(3, -3) == 3
    with pytest.raises(ValueError):
        lay.index_of(2)
    with pytest.raises(ValueError):
        lay.m_index(3, 2)


def test_block_layout_cap():
    with pytest.raises(CapacityError):
        block_layout(5000)


def test_irrep_operators_spin_half():
    ops = irrep_operators(1)
    np.testing.assert_allclose(ops.jz, np.diag([0.5, -0.5]))
    np.testing.assert_allclose(ops.jplus, [[0, 1], [0, 0]])


def test_irrep_operators_spin_one():
    ops = irrep_operators(2)
    assert ops.jplus[0, 1] == pytest.approx(np.sqrt(2))
    assert ops.jplus[1, 2] == pytest.approx(np.sqrt(2))
    np.testing.assert_allclose(ops.jz.diagonal(), [1, 0, -1])


@pytest.mark.parametrize("j2", [0, 1, 2, 3, 7, 20, 61])
def test_su2_algebra(j2):
    ops = irrep_operators(j2)
    comm = ops.jx @ ops.jy - ops.jy @ ops.jx
    assert np.abs(comm - 1j * ops.jz).max() < 1e-12
    np.testing.assert_allclose(ops.jx, (ops.jplus + ops.jminus) / 2)
    np.testing.assert_allclose(ops.jy, (ops.jplus - ops.jminus) / 2j)

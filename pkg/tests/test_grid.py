import numpy as np
import pytest

from mixedsde import GridResourceError, TimeGrid, refine_dyadic
from mixedsde.grid import MAX_STEPS


def test_nodes_uniform_and_exact():
    g = TimeGrid(1.0, 4)
    assert np.array_equal(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert g.delta == 0.25
    assert g.nodes[0] == 0.0 and g.nodes[-1] == g.horizon


def test_refinement_contains_coarse_nodes_bit_for_bit():
    g = TimeGrid(0.7, 12)  # horizon with no exact binary representation of T/n
    for m in (1, 2, 5):
        fine = refine_dyadic(g, m)
        assert np.array_equal(fine.nodes[:: 1 << m], g.nodes)


def test_refine_composition():
    g = TimeGrid(1.0, 4)
    twice = refine_dyadic(refine_dyadic(g, 1), 1)
    once = refine_dyadic(g, 2)
    assert twice == once
    assert np.array_equal(twice.nodes, once.nodes)


def test_refine_rejects_m_zero():
    with pytest.raises(ValueError):
        refine_dyadic(TimeGrid(1.0, 4), 0)


def test_refine_resource_error():
    with pytest.raises(GridResourceError):
        refine_dyadic(TimeGrid(1.0, MAX_STEPS // 2 + 1), 1)


def test_floor_property():
    g = TimeGrid(1.0, 4)
    fine = refine_dyadic(g, 3)
    rng = np.random.default_rng(0)
    for u in rng.uniform(0.0, 1.0, 200):
        k = fine.floor_index(u)
        assert fine.nodes[k] <= u < fine.nodes[k] + fine.delta


def test_floor_index_at_nodes():
    g = TimeGrid(1.0, 8)
    for k, t in enumerate(g.nodes):
        assert g.floor_index(t) == k


def test_invalid_grids():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 8).refinement_stride(TimeGrid(1.0, 12))


def test_node_index_resolves_and_rejects():
    g = TimeGrid(1.0, 8)
    assert g.node_index(g.nodes[3]) == 3
    with pytest.raises(ValueError):
        g.node_index(0.3)

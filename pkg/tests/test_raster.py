"""Occupancy rasters: supercover marking, exterior fill, frontier."""

import numpy as np

from loopsoup.raster import OccupancyRaster, exterior_mask, frontier, rasterize


def test_supercover_marks_every_crossed_cell():
    # unit-slope diagonal from cell (0,0) to cell (10,10): the supercover
    # contains at least the 11 diagonal cells, and every marked cell
    # actually touches the segment
    seg = np.array([[0.5, 0.5], [10.5, 10.5]])
    ras = rasterize([seg], cell=1.0, origin=(0.0, 0.0), shape=(12, 12))
    for i in range(11):
        assert ras.bits[i, i]
    ii, jj = np.nonzero(ras.bits)
    for i, j in zip(ii, jj):
        # distance from cell center to the line y = x
        d = abs((j + 0.5) - (i + 0.5)) / np.sqrt(2.0)
        assert d <= np.sqrt(0.5) + 1e-9


def test_horizontal_segment_single_row():
    seg = np.array([[0.1, 2.5], [7.9, 2.5]])
    ras = rasterize([seg], cell=1.0, origin=(0.0, 0.0), shape=(9, 6))
    assert ras.bits[:, 2].sum() == 8
    assert ras.bits.sum() == 8


def test_auto_bounds_cover_data():
    seg = np.array([[-3.0, 1.0], [2.0, 4.0]])
    ras = rasterize([seg], cell=0.5)
    x0, y0, x1, y1 = ras.extent()
    assert x0 <= -3.0 and x1 >= 2.0 and y0 <= 1.0 and y1 >= 4.0
    assert ras.bits.any()


def test_cell_index_center_round_trip():
    ras = rasterize([np.array([[0.0, 0.0], [1.0, 1.0]])], 0.25)
    i, j = ras.cell_index(0.6, 0.7)
    cx, cy = ras.cell_center(i, j)
    assert abs(cx - 0.6) <= 0.125 + 1e-12
    assert abs(cy - 0.7) <= 0.125 + 1e-12


def test_exterior_mask_ring():
    bits = np.zeros((16, 16), dtype=bool)
    bits[4:12, 4] = bits[4:12, 11] = True
    bits[4, 4:12] = bits[11, 4:12] = True
    ras = OccupancyRaster((0.0, 0.0), 1.0, bits)
    ext = exterior_mask(ras)
    assert ext[0, 0]
    assert not ext[7, 7]  # inside the closed ring
    assert not ext[4, 4]  # occupied cells are never exterior


def test_frontier_of_ring_is_ring():
    bits = np.zeros((16, 16), dtype=bool)
    bits[4:12, 4] = bits[4:12, 11] = True
    bits[4, 4:12] = bits[11, 4:12] = True
    # plus an interior blob that the frontier must exclude
    bits[7, 7] = True
    ras = OccupancyRaster((0.0, 0.0), 1.0, bits)
    fr = frontier(ras)
    assert fr[4, 4] and fr[4, 11] and fr[11, 4]
    assert not fr[7, 7]


def test_union_by_shared_geometry():
    a = np.array([[0.2, 0.2], [0.8, 0.2]])
    b = np.array([[0.2, 0.8], [0.8, 0.8]])
    r1 = rasterize([a], 0.1, origin=(0.0, 0.0), shape=(10, 10))
    r2 = rasterize([b], 0.1, origin=(0.0, 0.0), shape=(10, 10))
    both = rasterize([a, b], 0.1, origin=(0.0, 0.0), shape=(10, 10))
    assert ((r1.bits | r2.bits) == both.bits).all()

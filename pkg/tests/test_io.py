"""Round-trips for every serialized artifact."""

import math

import numpy as np

from loopsoup import io as lio
from loopsoup.extremal import GridDomain, rectangle_domain
from loopsoup.paths import SoupConfig, sample_loop_soup, stream_rng
from loopsoup.raster import OccupancyRaster


def test_campaign_csv_round_trip(tmp_path):
    rows = [(0.0, 2, 0.0, 1.0, 1000, 0.8315, 0.0118),
            (0.5, 1, 0.25, 2.5, 500, 1.0 / 3.0, 0.021)]
    p = tmp_path / "c.csv"
    lio.write_campaign_csv(p, rows)
    back = lio.read_campaign_csv(p)
    assert back == rows


def test_campaign_csv_deterministic_bytes(tmp_path):
    rows = [(0.0, 2, 0.0, 1.0, 1000, 0.8315, 0.0118)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    lio.write_campaign_csv(p1, rows)
    lio.write_campaign_csv(p2, rows)
    assert p1.read_bytes() == p2.read_bytes()


def test_formulas_csv_round_trip(tmp_path):
    table = [(0.0, 8.0 / 3.0, 2.0 / 3.0, 1.5479, 2.4566, 4.0 / 3.0,
              4.0 / 3.0, 0.452)]
    p = tmp_path / "f.csv"
    lio.write_formulas_csv(p, table)
    assert lio.read_formulas_csv(p) == table


def test_summary_json_embeds_config(tmp_path):
    p = tmp_path / "s.json"
    cfg = {"subcommand": "disconnect", "c": 0.0, "radii": [1.0, 2.0]}
    lio.write_summary_json(p, cfg, slope=0.66, stderr=0.01)
    doc = lio.read_summary_json(p)
    assert doc["config"] == cfg
    assert doc["slope"] == 0.66


def test_loops_round_trip(tmp_path):
    cfg = SoupConfig(c=0.6, region=(-1, -1, 1, 1), t_min=0.05, t_max=1.0,
                     dt=0.05 / 8, seed=3)
    loops = sample_loop_soup(cfg, stream_rng(3, 0))
    p = tmp_path / "soup.loops"
    lio.write_loops(p, loops, config={"seed": 3})
    back, meta = lio.read_loops(p)
    assert meta == {"seed": 3}
    assert len(back) == len(loops)
    for a, b in zip(loops, back):
        assert a.duration == b.duration
        assert np.array_equal(np.asarray(a.trace), b.trace)


def test_scene_bitmap_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    bits = rng.random((37, 23)) < 0.3
    ras = OccupancyRaster((-1.25, 0.5), 0.125, bits)
    p = tmp_path / "scene.lsbm"
    lio.write_scene(p, ras)
    back = lio.read_scene(p)
    assert back.origin == ras.origin
    assert back.cell == ras.cell
    assert np.array_equal(back.bits, ras.bits)


def test_domain_round_trip_with_sidecar(tmp_path):
    dom = rectangle_domain(1.0, nx=20, ny=16)
    p = tmp_path / "dom.lsbm"
    lio.write_domain(p, dom)
    back = lio.read_domain(p)
    assert isinstance(back, GridDomain)
    assert np.array_equal(back.free, dom.free)
    assert np.array_equal(back.arc1, dom.arc1)
    assert np.array_equal(back.arc2, dom.arc2)
    assert math.isclose(back.cell, dom.cell)


def test_cluster_csv(tmp_path):
    from loopsoup.clusters import build_clusters
    cfg = SoupConfig(c=0.6, region=(-1, -1, 1, 1), t_min=0.05, t_max=1.0,
                     dt=0.05 / 8, seed=7)
    loops = sample_loop_soup(cfg, stream_rng(7, 0))
    cs = build_clusters(loops, cell=0.05)
    p = tmp_path / "cl.csv"
    lio.write_cluster_csv(p, cs)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "cluster,size,diameter,x0,y0,x1,y1"
    assert len(lines) == 1 + len(cs.clusters)

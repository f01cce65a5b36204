# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from exact_solutions import preset_problem
from flow_field import (
    FlowGridSpec,
    SimilarityFlow,
    continuity_residual,
    evaluate_field,
    overlay_line,
    prandtl_residual,
    singular_overlay_lines,
    stream_function_residual,
    streamline_psi_drift,
    trace_streamline,
    velocity_profiles,
)
from mixlayer_lib import bvp_evaluator, solve_ibvp
from mixlayer_types import DomainError, SeedOnStagnation


@pytest.fixture(scope="module")
def flow_m1(cfg):
    return SimilarityFlow("1", 1.0, bvp_evaluator("1", 1.0, cfg), a=1.0)


def test_separation_streamline_is_logarithmic(cfg):
    flow = preset_problem("separation")
    line = trace_streamline(flow, (1.0, -1.0), 5.0, cfg=cfg)
    assert line.reason == "x_end"
    assert line.x[-1] == pytest.approx(5.0)
    C = math.exp(-1.0) - 1.0
    assert np.max(np.abs(line.y - np.log(1.0 + C / line.x))) < 1e-8
    assert line.psi == pytest.approx(C)
    assert streamline_psi_drift(flow, line) < 1e-6


def test_streamline_stops_at_domain_edge(cfg):
    flow = preset_problem("separation")
    line = trace_streamline(flow, (1.0, -1.0), 5.0, y_bounds=(-1.5, -0.5), cfg=cfg)
    assert line.reason == "domain_edge"
    assert line.y[-1] == pytest.approx(-0.5, abs=1e-8)
    assert line.x[-1] < 5.0


def test_streamline_arc_limit(cfg):
    flow = preset_problem("flooded-jet")
    line = trace_streamline(flow, (1.0, 0.5), 10.0, arc_limit=2.0, cfg=cfg)
    assert line.reason == "arc_limit"
    assert line.x[-1] < 10.0
    assert len(line) == 400


def test_seed_on_stagnation_is_rejected(cfg):
    with pytest.raises(SeedOnStagnation):
        trace_streamline(preset_problem("separation"), (0.0, 1.0), 1.0, cfg=cfg)
    with pytest.raises(SeedOnStagnation):
        trace_streamline(preset_problem("near-wall-jet"), (1.0, 0.0), 2.0, cfg=cfg)


def test_streamline_of_computed_solution_conserves_psi(flow_m1, cfg):
    line = trace_streamline(flow_m1, (0.5, 0.8), 3.0, cfg=cfg)
    assert line.reason == "x_end"
    assert streamline_psi_drift(flow_m1, line) < 1e-6


def test_similarity_flow_identities(flow_m1):
    x = np.array([0.5, 1.0, 3.0])
    assert np.max(np.abs(flow_m1.psi(x, np.zeros_like(x)))) < 1e-8
    for x0, y0 in ((1.5, 0.7), (0.8, -1.2)):
        du, dv = stream_function_residual(flow_m1, x0, y0, h=1e-3)
        assert abs(du) < 1e-5
        assert abs(dv) < 1e-5
        assert abs(continuity_residual(flow_m1, x0, y0, h=1e-3)) < 1e-5
        assert abs(prandtl_residual(flow_m1, x0, y0, h=1e-2)) < 1e-3


@pytest.mark.parametrize("name", ["flooded-jet", "separation", "near-wall-jet"])
def test_presets_satisfy_boundary_layer_equations(name):
    flow = preset_problem(name)
    for x0, y0 in ((1.0, 0.5), (2.0, 1.5)):
        assert abs(continuity_residual(flow, x0, y0)) < 1e-6
        assert abs(prandtl_residual(flow, x0, y0)) < 1e-5


@pytest.mark.parametrize("point", [(1.0, 0.5), (2.0, 1.5)])
def test_continuity_residual_is_second_order(point):
    flow = preset_problem("flooded-jet")
    coarse, mid, fine = (abs(continuity_residual(flow, *point, h=h)) for h in (0.08, 0.04, 0.02))
    # central differences of an exact solution leave only the O(h^2) truncation
    assert mid <= 0.3 * coarse + 1e-12
    assert fine <= 0.3 * mid + 1e-12
    if fine > 1e-10:
        assert mid / fine == pytest.approx(4.0, rel=0.1)


def test_similarity_flow_rejects_bad_input(cfg):
    evaluator = bvp_evaluator("1", 1.0, cfg)
    with pytest.raises(DomainError):
        SimilarityFlow("inf", 1.0, evaluator, a=1.0)
    with pytest.raises(DomainError):
        SimilarityFlow("1", 0.0, evaluator, a=1.0)
    with pytest.raises(DomainError):
        SimilarityFlow("1", 1.0, evaluator, a=1.0).check_x(0.0)


def test_flow_from_ibvp(cfg):
    flow = SimilarityFlow.from_ibvp(solve_ibvp("1", 0.5, cfg))
    meta = flow.metadata()
    assert meta['b'] == "0.5"
    assert float(meta['a']) == pytest.approx(0.61958, abs=5e-4)
    assert flow.pole is None
    assert flow.stagnation is None


def test_evaluate_field_layout():
    flow = preset_problem("flooded-jet")
    spec = FlowGridSpec(flow, 0.5, 2.0, 4, -3.0, 3.0, 7)
    field = evaluate_field(spec)
    assert field.u.shape == (7, 4)
    # psi is odd in y for the symmetric jet
    assert np.allclose(field.psi[0], -field.psi[-1], atol=1e-14)
    cols = field.columns()
    assert cols['x'].size == 28
    assert np.array_equal(cols['x'][:4], spec.x)
    assert np.all(cols['y'][:4] == -3.0)
    assert field.metadata['nx'] == "4"
    threaded = evaluate_field(spec, workers=2)
    assert np.array_equal(threaded.u, field.u)


def test_evaluate_field_marks_cells_beyond_pole():
    flow = preset_problem("near-wall-jet")
    field = evaluate_field(FlowGridSpec(flow, 1.0, 2.0, 3, -20.0, 5.0, 6))
    assert np.isnan(field.u[0]).all()
    assert np.isfinite(field.u[-1]).all()


def test_grid_spec_validation():
    flow = preset_problem("flooded-jet")
    with pytest.raises(DomainError):
        FlowGridSpec(flow, 1.0, 2.0, 0, 0.0, 1.0, 3)
    with pytest.raises(DomainError):
        FlowGridSpec(flow, 2.0, 1.0, 3, 0.0, 1.0, 3)
    with pytest.raises(DomainError):
        FlowGridSpec(flow, 0.0, 1.0, 3, 0.0, 1.0, 3)


def test_velocity_profiles():
    flow = preset_problem("flooded-jet")
    ys = np.linspace(-2.0, 2.0, 5)
    columns, meta = velocity_profiles(flow, [1.0, 2.0], ys, scale_factors={1.0: 2.0})
    assert columns['u'].size == 10
    assert np.array_equal(columns['x'][:5], np.full(5, 1.0))
    assert columns['u'][2] == pytest.approx(0.5)
    assert meta['scale_u_x=1'] == "2"
    assert meta['preset'] == "flooded-jet"


def test_overlay_line_inverts_tau():
    flow = preset_problem("flooded-jet")
    x = np.array([0.5, 1.0, 4.0])
    y = overlay_line("0.5", 1.7, 1.0, x)
    assert np.allclose(flow.tau(x, y), 1.7)


def test_singular_lines_of_reflected_pole_flow(cfg):
    evaluator = bvp_evaluator("0.4", 1.0, cfg)
    flow = SimilarityFlow("0.4", 1.0, evaluator, a=1.0, reflect=True)
    assert flow.pole == pytest.approx(-evaluator.pole)
    lines = singular_overlay_lines(flow, [1.0, 2.0])
    assert set(lines) == {'pole', 'stagnation'}
    x, y_pole = lines['pole']
    _, y_stag = lines['stagnation']
    assert np.all(y_pole < y_stag) and np.all(y_stag < 0.0)
    assert np.allclose(flow.tau(x, y_pole), flow.pole)

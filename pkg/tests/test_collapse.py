import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starkmbl.collapse import (
    EMPTY_OVERLAP_PENALTY,
    CollapseInput,
    collapse_cost,
    edge_asymmetry,
    fit_collapse,
    mobility_edge,
    rescale,
    rescaled_curves,
    write_report,
)
from starkmbl.ensemble import EnsembleRecord
from starkmbl.errors import ParameterError

from oracles import planted_curve, synthetic_curves

F_GRID = np.round(np.arange(0.25, 2.5 + 1e-9, 0.125), 6)


def records_from(curves, eps):
    out = []
    for L, (F, y, e) in curves.items():
        for f, v, s in zip(F, y, e):
            out.append(EnsembleRecord(L, eps, float(f), float(v), float(s), 0.0, 0.0, 1, 50, 0, 0))
    return out


@pytest.fixture(scope="module")
def planted():
    data = CollapseInput(synthetic_curves(), eps=0.5)
    return data, fit_collapse(data)


def test_rescale_examples():
    assert np.all(rescale([1.3, 1.3], 1.3, 0.7, 14) == 0)
    assert rescale([1.25], 1.0, 1.0, 16)[0] == pytest.approx(4.0)
    with pytest.raises(ParameterError):
        rescale([1.0], 1.0, 0.0, 12)
    with pytest.raises(ParameterError):
        rescale([1.0], 1.0, -1.0, 12)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=20),
    st.floats(-2, 2),
    st.floats(0.1, 3),
    st.integers(1, 30),
)
def test_rescale_preserves_order(F, F_c, nu, L):
    F = np.sort(np.array(F))
    assert np.all(np.diff(rescale(F, F_c, nu, L)) >= 0)


def test_input_validation():
    F = np.linspace(0, 1, 6)
    with pytest.raises(ParameterError):
        CollapseInput({10: (F, F)})
    with pytest.raises(ParameterError):
        CollapseInput({10: (F[:4], F[:4]), 12: (F[:4], F[:4])})
    with pytest.raises(ParameterError):
        CollapseInput({10: (F[::-1], F), 12: (F, F)})


def test_identical_curves_cost_zero():
    # each size sampled so that its rescaled abscissae coincide: y_i(x) are one function
    x = np.linspace(-6, 6, 13)
    y = planted_curve(5 * x)
    curves = {L: (1.0 + x / L ** (1 / 0.8), y) for L in (10, 12, 14)}
    data = CollapseInput(curves)
    for w in (0.1, 0.5, 1.0):
        assert collapse_cost(data, 1.0, 0.8, w) < 1e-25
    assert collapse_cost(data, 1.1, 0.8, 0.5) > 1e-6


@pytest.mark.parametrize("w", [0.1, 0.5])
def test_constant_offset_gives_c_squared(w):
    F = np.linspace(0.0, 2.0, 9)
    c = 0.07
    data = CollapseInput({10: (F, np.full(9, 0.4)), 14: (F, np.full(9, 0.4 + c))})
    assert collapse_cost(data, 1.0, 0.8, w) == pytest.approx(c * c, rel=1e-12)


def test_empty_overlap_penalty():
    a = np.linspace(0.0, 1.0, 6)
    data = CollapseInput({10: (a, a), 20: (a + 2.0, a)})
    assert collapse_cost(data, 1.5, 1.0, 1.0) == EMPTY_OVERLAP_PENALTY


def test_cost_prefers_planted_point():
    data = CollapseInput(synthetic_curves())
    for w in np.round(np.arange(0.1, 1.01, 0.1), 1):
        assert collapse_cost(data, 1.0, 0.8, w) < collapse_cost(data, 1.3, 0.8, w)


def test_cost_invariances():
    curves = synthetic_curves(noise=0.02, seed=4)
    data = CollapseInput(curves)
    flipped = CollapseInput(dict(reversed(list(curves.items()))))
    shifted = CollapseInput({L: (F, y + 0.3, e) for L, (F, y, e) in curves.items()})
    for fc, nu, w in [(0.9, 0.7, 0.3), (1.2, 1.1, 1.0)]:
        d = collapse_cost(data, fc, nu, w)
        assert d >= 0
        assert collapse_cost(flipped, fc, nu, w) == d
        assert collapse_cost(shifted, fc, nu, w) == pytest.approx(d, rel=1e-9, abs=1e-15)


def test_cost_argument_errors():
    data = CollapseInput(synthetic_curves())
    with pytest.raises(ParameterError):
        collapse_cost(data, 1.0, 0.8, 0.0)
    with pytest.raises(ParameterError):
        collapse_cost(data, 1.0, 0.8, 1.5)
    with pytest.raises(ParameterError):
        collapse_cost(data, 1.0, -0.8, 0.5)


def test_noiseless_recovery_every_width(planted):
    _, res = planted
    assert abs(res.F_c - 1.0) < 0.02 and abs(res.nu - 0.8) < 0.05
    for w, fc, nu, d in res.per_w_fits:
        assert abs(fc - 1.0) < 0.02 and abs(nu - 0.8) < 0.05, w
        assert d >= 0
    assert res.flags == []
    assert res.F_c_err >= 0 and res.nu_err >= 0 and res.D_min >= 0
    lo, hi = res.metadata["F_c_range"]
    assert lo <= res.F_c <= hi


def test_result_serializes(planted, tmp_path):
    data, res = planted
    write_report(res, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["eps"] == 0.5 and len(d["per_w_fits"]) == 10
    assert d["metadata"]["spline"].startswith("cubic")
    rows = rescaled_curves(data, res.F_c, res.nu)
    assert len(rows) == 4 * len(F_GRID)


@pytest.mark.parametrize("seed", [0, 1])
def test_noisy_recovery(seed):
    res = fit_collapse(CollapseInput(synthetic_curves(noise=0.01, seed=seed)))
    assert abs(res.F_c - 1.0) < 0.05 and abs(res.nu - 0.8) < 0.15


def test_flat_landscape_flagged():
    y = np.full(len(F_GRID), 0.45)
    data = CollapseInput({10: (F_GRID, y), 12: (F_GRID, y)})
    res = fit_collapse(data, w_grid=(0.5, 1.0))
    assert "unidentifiable" in res.flags
    assert res.D_min < 1e-20


def test_boundary_fit_flagged_and_excluded():
    # planted critical field outside the searched range pins the optimum to the edge
    data = CollapseInput(synthetic_curves(F_c=1.0))
    res = fit_collapse(data, w_grid=(0.3, 0.6), F_c_range=(1.3, 2.0))
    assert any(f.startswith("boundary_hit") for f in res.flags)
    assert "all_fits_on_boundary" in res.flags


def dome(eps):
    return 1.1 - 2.0 * (eps - 0.45) ** 2


def test_mobility_edge_dome_and_asymmetry():
    eps_grid = [0.3, 0.45, 0.6]
    recs = []
    for e in eps_grid:
        recs += records_from(synthetic_curves(F_c=dome(e), nu=0.8), e)
    edge = mobility_edge(recs, w_grid=(0.3, 0.6, 0.9))
    assert [e for e, _ in edge] == eps_grid
    for e, res in edge:
        assert abs(res.F_c - dome(e)) < max(3 * res.F_c_err, 0.02)
    asym = edge_asymmetry(edge)
    assert asym["eps_at_max"] == 0.45 and asym["towards"] == "ground"


def test_mobility_edge_single_eps_equals_fit():
    curves = synthetic_curves()
    edge = mobility_edge(records_from(curves, 0.5), w_grid=(0.5,))
    direct = fit_collapse(CollapseInput(curves, 0.5), w_grid=(0.5,))
    assert len(edge) == 1
    assert edge[0][1].F_c == direct.F_c and edge[0][1].nu == direct.nu


def test_mobility_edge_skips_thin_eps():
    curves = synthetic_curves()
    recs = records_from(curves, 0.5) + records_from({12: curves[12]}, 0.3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        edge = mobility_edge(recs, w_grid=(0.5,))
    assert [e for e, _ in edge] == [0.5]
    assert any("eps=0.3" in str(w.message) for w in caught)
    with pytest.raises(ParameterError):
        edge_asymmetry([])

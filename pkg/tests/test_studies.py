import math

import numpy as np
import pytest

from reggecurv.studies import (bundled_config, nominal_h, parse_config, run_curvature_study,
                               run_interpolation_study)

# reference k=2 curvature L2 errors against ndof on perturbed quarter-domain meshes
REFERENCE_K2_L2 = [(16, 0.03283537542914546), (40, 0.01279005887266998), (178, 0.0017451911516211448),
             (697, 0.0003817721974622066), (2842, 9.413032794245751e-05), (10822, 2.5557308283167545e-05),
             (43135, 6.270117247445405e-06)]


def _reference_trend(ndof):
    nd, err = np.log([p[0] for p in REFERENCE_K2_L2]), np.log([p[1] for p in REFERENCE_K2_L2])
    return float(np.exp(np.interp(math.log(ndof), nd, err)))


def test_curvature_error_matches_reference_magnitude():
    cfg = bundled_config("paper_fig6")
    cfg["mesh"]["levels"] = 4
    cfg["degrees"] = [2]
    rows = run_curvature_study(cfg).tables["k2"]
    finest = rows[-1]
    assert finest.n == 16
    ratio = finest.errors["l2"] / _reference_trend(finest.ndof)
    assert 1 / 3 <= ratio <= 3


def test_interpolation_rates():
    cfg = parse_config('{"metric": {"graph": "1/2*(x^2+y^2) - 1/12*(x^4+y^4)"},'
                       ' "mesh": {"n0": 2, "levels": 4}, "degrees": [0, 1, 2]}')
    tables = run_interpolation_study(cfg).tables
    for k in (0, 1, 2):
        assert tables[f"k{k}"][-1].eoc["l2"] == pytest.approx(k + 1, abs=0.3)


def test_nominal_h_halves():
    cfg = bundled_config("paper_fig6")
    hs = [nominal_h(cfg, level) for level in range(5)]
    assert np.allclose(np.array(hs[:-1]) / hs[1:], 2.0)
    assert hs[0] == pytest.approx(math.sqrt(2) / 2)

import math

import numpy as np
import pytest

from reggecurv.mesh import perturb, structured_unit_square
from reggecurv.norms import (RESOLVED, ConvergenceRecord, eoc, field_error, hminus1_error, l2_error,
                             last_rates, records_to_csv, write_csv)
from reggecurv.spaces import DofVector, build_space, interpolate


def _records(errors, h0=0.5):
    return [ConvergenceRecord(level=i, n=2 ** (i + 1), h_max=h0 / 2 ** i, ndof=10 * 4 ** i, errors={"l2": e})
            for i, e in enumerate(errors)]


def test_l2_error_of_reproduced_polynomial():
    m = perturb(structured_unit_square(3), 0.25, 1)
    fe = interpolate(build_space(m, "lagrange", 2), lambda p: (p[..., 0] ** 2 - p[..., 0] * p[..., 1] + 1)[..., None])
    assert l2_error(fe, "x^2 - x*y + 1") <= 1e-13


def test_l2_error_of_single_hat():
    m = structured_unit_square(2)
    V = build_space(m, "lagrange", 1)
    a = int(np.flatnonzero(np.all(np.isclose(m.vertices, 0.5), axis=1))[0])
    coeffs = np.zeros(V.ndof)
    coeffs[a] = 1.0
    # exact P1 mass entry: area / 6 per triangle around the vertex
    areas = 0.5 * np.abs(np.linalg.det(m.jacobians()))
    touching = np.any(m.triangles == a, axis=1)
    assert l2_error(DofVector(V, coeffs), 0) == pytest.approx(math.sqrt(areas[touching].sum() / 6), rel=1e-13)


def test_hminus1_zero_error():
    m = structured_unit_square(2)
    assert hminus1_error(field_error(None, 0), m, 0) == 0.0


def test_hminus1_single_sine_mode():
    m = structured_unit_square(8)
    e_l2 = 0.5
    expected = e_l2 * math.sqrt(1 + 2 * math.pi ** 2) / (2 * math.pi ** 2)
    mode = lambda p: np.sin(math.pi * p[..., 0]) * np.sin(math.pi * p[..., 1])  # noqa: E731
    val = hminus1_error(field_error(None, mode), m, 2)
    assert val == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize("ref", ["x*(1-x)*y", "exp(x)*cos(3*y)", "1"])
def test_hminus1_bounded_by_l2(ref):
    m = perturb(structured_unit_square(4), 0.25, 3)
    err = field_error(None, ref)
    L2 = l2_error(DofVector(build_space(m, "lagrange", 1)), ref)
    # Poincare on the unit square: ||w||_H1 <= sqrt(1 + 1/(2 pi^2)) / (sqrt(2) pi) ||e||_L2
    C = math.sqrt(1 + 1 / (2 * math.pi ** 2)) / (math.sqrt(2) * math.pi)
    val = hminus1_error(err, m, 1)
    assert 0 <= val <= C * L2 * (1 + 1e-9)


def test_eoc_examples():
    recs = eoc(_records([1.0, 0.5, 0.25]))
    assert recs[0].eoc["l2"] is None
    assert recs[1].eoc["l2"] == pytest.approx(1.0, abs=1e-14)
    assert recs[2].eoc["l2"] == pytest.approx(1.0, abs=1e-14)
    recs = eoc(_records([1.0, 0.25, 1 / 16]))
    assert [r.eoc["l2"] for r in recs[1:]] == pytest.approx([2.0, 2.0], abs=1e-14)
    assert last_rates(recs, "l2") == pytest.approx([2.0, 2.0])


def test_eoc_resolved_field():
    recs = eoc(_records([1e-3, 1e-15, 0.0]))
    assert recs[1].eoc["l2"] == RESOLVED == "—"
    assert recs[2].eoc["l2"] == RESOLVED
    assert last_rates(recs, "l2") == []


# reference k=1 curvature H^-1 errors against ndof on perturbed quarter-domain meshes
REFERENCE_K1_HM1 = [(9, 0.00378103414321965), (21, 0.0011065158571022778), (85, 0.0002327366154983381),
              (321, 4.4838104279259916e-05), (1285, 9.976071810983794e-06), (4853, 2.3747422899575113e-06),
              (19257, 5.672363282613678e-07)]


def test_eoc_of_reference_h1_sequence():
    # h ~ ndof^(-1/2) in two dimensions
    recs = [ConvergenceRecord(i, 0, ndof ** -0.5, ndof, {"hm1": e}) for i, (ndof, e) in enumerate(REFERENCE_K1_HM1)]
    rates = last_rates(eoc(recs), "hm1", 3)
    assert len(rates) == 3 and all(abs(r - 2.0) <= 0.2 for r in rates)


def test_csv_format(tmp_path):
    recs = eoc(_records([1.0, 0.5]))
    text = records_to_csv(recs)
    lines = text.split("\n")
    assert lines[0] == "level,n,h,ndof,l2,l2_eoc"
    assert lines[1] == "0,2,0.5,10,1,"
    assert lines[2] == "1,4,0.25,40,0.5,1"
    assert text.endswith("\n") and "\r" not in text
    recs[1].errors["l2"] = 0.1
    assert records_to_csv(recs).split("\n")[2].split(",")[4] == "0.10000000000000001"
    path = tmp_path / "t.csv"
    write_csv(path, recs)
    assert path.read_bytes() == records_to_csv(recs).encode()

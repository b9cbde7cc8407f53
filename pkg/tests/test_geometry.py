import math
import warnings

import numpy as np
import pytest

from mcl import chernweil as cw, geometry as geo, spectral as sp
from mcl.errors import DegreeMismatch, UnsupportedDimension
from mcl.harness.config import compile_expression

QUAD = geo.QuadratureSpec(order=64)


def _winding_of_det(g, samples=4001):
    th = np.linspace(0, 2 * math.pi, samples)[:, None]
    phase = np.unwrap(np.angle(np.linalg.det(g(th))))
    return int(round((phase[-1] - phase[0]) / (2 * math.pi)))


@pytest.mark.parametrize("m", [-3, -1, 0, 2])
def test_tc1_integral_is_minus_det_winding(m):
    g = geo.gm_map(m)
    assert abs(geo.tc_integral(g, 1, QUAD) + _winding_of_det(g)) < 1e-9


def test_tc1_custom_expression_map():
    fns = [[compile_expression("exp(2*i*theta)", ("theta",)), compile_expression("0", ("theta",))],
           [compile_expression("0", ("theta",)), compile_expression("exp(-5*i*theta)", ("theta",))]]
    g = geo.custom_map(geo.circle(), fns)
    assert abs(geo.tc_integral(g, 1, QUAD) - 3) < 1e-9


@pytest.mark.parametrize("m", [-2, 1, 3])
def test_signed_count_matches_integral(m):
    g = geo.gm_map(m)
    hits = geo.find_preimages(g, sp.Flag.standard(2), 1)
    assert len(hits) == abs(m)
    assert all(h.residual < 1e-10 for h in hits)
    assert geo.signed_count(hits) == -m


def test_other_V_gives_same_count(rng):
    V = sp.haar_unitary(2, rng)
    g = geo.gm_map(2, V)
    assert abs(geo.tc_integral(g, 1, QUAD) + 2) < 1e-9
    assert geo.signed_count(geo.find_preimages(g, sp.Flag.standard(2), 1)) == -2


def test_constant_map_has_no_preimages():
    g = cw.GaugeMap(geo.circle(), lambda p: np.broadcast_to(np.diag([1j, -1j]), (len(p), 2, 2)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert geo.find_preimages(g, sp.Flag.standard(2), 1) == []
    assert abs(geo.tc_integral(g, 1, QUAD)) < 1e-12


def test_coorientation_is_fixed():
    assert geo.coorientation() in (-1, 1)
    assert geo.coorientation() == geo.coorientation()


def test_s3_degree_one_and_reversal():
    quad = geo.QuadratureSpec(order=24)
    g = geo.s3_map()
    assert abs(geo.tc_integral(g, 2, quad) - 1) < 1e-9
    hits = geo.find_preimages(g, sp.Flag.standard(2), 2)
    assert geo.signed_count(hits) == 1
    # (z1, z2) -> (conj z1, z2) is a reflection of R^4, so degree -1
    def reflected(p):
        z = geo.hopf_point(p)
        return geo.quaternion_matrix(np.stack([np.conj(z[:, 0]), z[:, 1]], -1))

    rev = cw.GaugeMap(geo.sphere3(), reflected)
    assert abs(geo.tc_integral(rev, 2, quad) + 1) < 1e-6


def test_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        geo.tc_integral(geo.s3_map(), 1, QUAD)


def test_unstable_integrals():
    assert abs(geo.integrate_unstable(1) + 2j * math.pi) < 1e-9
    v = geo.integrate_unstable(2, geo.QuadratureSpec(order=32))
    assert abs(v / (-24 * math.pi ** 2) - 1) < 1e-4
    with pytest.raises(UnsupportedDimension):
        geo.integrate_unstable(3)


def test_negative_control_located():
    report = geo.transversality_check(geo.diag_power_map((1, 2)), sp.Flag.standard(2))
    assert not report.passed
    thetas = sorted(float(h.point[0]) for h in report.forbidden)
    assert np.allclose(thetas, [math.pi / 2, 3 * math.pi / 2], atol=1e-6)


def test_transverse_map_passes():
    assert geo.transversality_check(geo.gm_map(2), sp.Flag.standard(2)).passed


def test_volumes():
    for M in (geo.circle(), geo.sphere2(), geo.sphere3()):
        vol = geo.integrate_form(M, M.volume_form(), geo.QuadratureSpec(order=24))
        assert abs(abs(vol) - M.volume) < 1e-9
    mc = geo.integrate_form(geo.sphere2(), geo.sphere2().volume_form(), geo.QuadratureSpec("mc", samples=200_000))
    assert abs(mc.real - 4 * math.pi) < 0.05
    prod = geo.circle() * geo.sphere3()
    assert prod.dim == 4 and abs(prod.volume - 4 * math.pi ** 3) < 1e-12


def test_wrap_and_distance():
    M = geo.circle()
    assert abs(M.wrap(np.array([7.0]))[0] - (7.0 - 2 * math.pi)) < 1e-15
    assert abs(M.chart_distance([0.1], [2 * math.pi - 0.1]) - 0.2) < 1e-12


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        geo.QuadratureSpec(mode="simpson")
    with pytest.raises(ValueError):
        geo.QuadratureSpec(order=2)


def test_gauss_doubling_stable():
    g = geo.gm_map(3)
    a = geo.tc_integral(g, 1, geo.QuadratureSpec(order=32))
    b = geo.tc_integral(g, 1, geo.QuadratureSpec(order=64))
    assert abs(a - b) < 1e-9


def test_g2_hit_locations():
    hits = geo.find_preimages(geo.gm_map(2), sp.Flag.standard(2), 1)
    thetas = sorted(float(h.point[0]) for h in hits)
    assert np.allclose(thetas, [math.pi / 2, 3 * math.pi / 2], atol=1e-8)
    assert len({h.sign for h in hits}) == 1

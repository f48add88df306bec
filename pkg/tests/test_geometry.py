import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from patchvm import DomainError, Geometry, energy_kernel, force_kernel, gap, kernel_norms, validity
from patchvm.geometry import cell_weights


def test_gap_examples(geom):
    assert gap(geom, 1e-6, 0.0) == 1e-6
    assert gap(geom, 1e-6, 1e-3) == pytest.approx(4.3333333e-6, rel=1e-7)
    assert gap(geom, 7.5e-4, 0.015) == pytest.approx(1.5e-3, rel=1e-12)


@pytest.mark.parametrize("d, r", [(0.0, 0.0), (-1e-6, 0.0), (1e-6, -1e-4), (1e-6, 0.0151)])
def test_gap_domain(geom, d, r):
    with pytest.raises(DomainError):
        gap(geom, d, r)


def test_geometry_invariants():
    with pytest.raises(DomainError):
        Geometry(0.01, 0.015)
    with pytest.raises(DomainError):
        Geometry(-1.0, 0.01)


def test_kernel_examples(geom):
    assert energy_kernel(geom, 1e-6, 0.0) == 0.0
    assert force_kernel(geom, 1e-6, 0.0) == 0.0
    assert energy_kernel(geom, 1e-6, 1e-3) == pytest.approx(230.77, rel=1e-4)
    assert force_kernel(geom, 1e-6, 1e-3) == pytest.approx(5.3254e7, rel=1e-4)


@pytest.mark.parametrize("d", [1e-7, 1e-6, 1e-5])
def test_energy_kernel_peak(geom, d):
    r = np.linspace(0, geom.Rm, 2_000_001)
    w = energy_kernel(geom, d, r)
    assert r[np.argmax(w)] == pytest.approx(math.sqrt(2 * geom.R * d), abs=2 * (r[1] - r[0]))


def test_force_kernel_sharper(geom):
    # normalized force weight puts more mass below sqrt(2Rd) than the energy weight
    d = 1e-6
    rs = math.sqrt(2 * geom.R * d)
    e_in = quad(lambda r: energy_kernel(geom, d, r), 0, rs)[0] / kernel_norms(geom, d)[0]
    f_in = quad(lambda r: force_kernel(geom, d, r), 0, rs)[0] / kernel_norms(geom, d)[1]
    assert f_in > e_in


def test_kernel_norm_example(geom):
    e, f = kernel_norms(geom, 7.5e-4)
    assert e == pytest.approx(0.15 * math.log(2), rel=1e-12)
    assert e == pytest.approx(0.103972, rel=1e-5)
    # large d: ln(1+x) ~ x
    e_far, _ = kernel_norms(geom, 1e3)
    assert e_far == pytest.approx(geom.Rm**2 / 2e3, rel=1e-6)


@pytest.mark.parametrize("d", [1e-8, 1e-6, 7.5e-4, 1e-2])
def test_norms_match_quadrature(geom, d):
    pts = [math.sqrt(2 * geom.R * d)] if math.sqrt(2 * geom.R * d) < geom.Rm else None
    e = quad(lambda r: energy_kernel(geom, d, r), 0, geom.Rm, points=pts, epsabs=0, epsrel=1e-12, limit=200)[0]
    f = quad(lambda r: force_kernel(geom, d, r), 0, geom.Rm, points=pts, epsabs=0, epsrel=1e-12, limit=200)[0]
    en, fn = kernel_norms(geom, d)
    assert en == pytest.approx(e, rel=1e-8)
    assert fn == pytest.approx(f, rel=1e-8)
    assert fn == pytest.approx(geom.R * (1 / d - 1 / (d + geom.d2)), rel=1e-10)


def test_kernel_norms_domain(geom):
    with pytest.raises(DomainError):
        kernel_norms(geom, 0.0)


@pytest.mark.parametrize("kind", ["energy", "force", "area"])
def test_cell_weights_telescope(geom, kind):
    edges = np.concatenate([[0.0], np.geomspace(1e-6, geom.Rm, 50)])
    w = cell_weights(geom, 1e-6, edges, kind)
    total = {"energy": kernel_norms(geom, 1e-6)[0], "force": kernel_norms(geom, 1e-6)[1],
             "area": geom.Rm**2 / 2}[kind]
    assert w.sum() == pytest.approx(total, rel=1e-13)
    assert np.all(w > 0)


def test_validity_examples(geom):
    v = validity(geom, 1e-6, 1e-3)
    assert (v.pfa_ok, v.patch_image_ok) == (True, True)
    v = validity(geom, 1e-3, 1e-3)
    assert (v.pfa_ok, v.patch_image_ok) == (False, False)
    assert validity(geom, geom.d2, 1e-3).pfa_ok is False
    # strict inequality at r0 = sqrt(2 R d)
    d = 1e-6
    assert validity(geom, d, math.sqrt(2 * geom.R * d) * (1 - 1e-12)).patch_image_ok is False


positive = st.floats(1e-9, 1e-2)
frac = st.floats(0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(d=positive, x=frac)
def test_gap_at_least_d(d, x):
    g = Geometry(0.15, 0.015)
    r = x * g.Rm
    val = gap(g, d, r)
    assert val >= d
    if r == 0:
        assert val == d
    elif r * r / (2 * g.R) > 1e-15 * d:
        assert val > d


@settings(max_examples=60, deadline=None)
@given(d=st.floats(1e-8, 1e-3), x=st.floats(0.01, 1.0))
def test_force_kernel_is_minus_d_derivative(d, x):
    g = Geometry(0.15, 0.015)
    r = x * g.Rm
    h = d * 1e-4
    fd = -(energy_kernel(g, d + h, r) - energy_kernel(g, d - h, r)) / (2 * h)
    assert fd == pytest.approx(force_kernel(g, d, r), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(1e-8, 1e-3), x=st.floats(0.0, 1.0), lam=st.floats(0.1, 10.0))
def test_dimensional_scaling(d, x, lam):
    g = Geometry(0.15, 0.015)
    gl = Geometry(0.15 * lam, 0.015 * lam)
    r = x * g.Rm
    assert gap(gl, lam * d, lam * r) == pytest.approx(lam * gap(g, d, r), rel=1e-12)
    assert energy_kernel(gl, lam * d, lam * r) == pytest.approx(energy_kernel(g, d, r), rel=1e-12, abs=1e-300)

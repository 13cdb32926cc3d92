import math

import numpy as np
import pytest

from sgosc.oscint import adaptive_tensor
from sgosc.synth import (
    PrescribedWfSpec,
    g_truncation_bound,
    make_fk,
    make_g,
    make_prescribed,
)
from sgosc.wavefront import WfProtocol, css_scan, wf_scan


def test_fk_basic_values():
    f0 = make_fk([1.0], [1.0], 0)
    assert abs(f0.values(np.zeros((1, 1)))[0] - 1.0) < 1e-14
    for k in (1, 2):
        fk = make_fk([1.0], [1.0], k)
        peak = np.array([[float(k**3)]])
        assert abs(abs(fk.values(peak)[0]) - 1.0) < 1e-14


def test_fk_rejects_non_unit_vectors():
    with pytest.raises(ValueError):
        make_fk([1.0, 1.0], [1.0, 0.0], 1)


def test_fk_fourier_law_by_quadrature_1d():
    for k in (0, 1):
        fk = make_fk([1.0], [1.0], k)
        zs = np.linspace(k**3 - 2, k**3 + 2, 5)
        for z in zs:
            val, _, _ = adaptive_tensor(
                lambda Y: fk.values(Y) * np.exp(-1j * Y[0] * z),
                [-(k**3) - 10],
                [k**3 + 10],
                tol_abs=1e-12,
                tol_rel=1e-11,
            )
            want = fk.ft().values(np.array([[z]]))[0]
            assert abs(val - want) < 1e-8


def test_g_bounded_and_peak_magnitudes():
    g = make_g([1.0], [1.0], K_max=3)
    xs = np.linspace(-100, 100, 4001)[None, :]
    vals = np.abs(g.values(xs))
    assert vals.max() <= 2.0
    assert vals.max() >= 0.9


def test_g_decay_off_ray():
    g = make_g([1.0], [1.0], K_max=3)
    x = np.array([[-50.0]])
    assert (1 + 50.0**2) ** 4 * abs(g.values(x)[0]) <= 1e-6


def test_g_truncation_certificate():
    assert g_truncation_bound(3, 100.0) < 1e-9
    assert g_truncation_bound(5, 200.0) < g_truncation_bound(4, 200.0) + 1e-30


def test_g_css(gtrain_proto=None):
    g = make_g([1.0], [1.0], K_max=3)
    proto = WfProtocol.make(
        1, box=64.0, ngrid=2048, rho_max_frac=0.7,
        classical_centers=[(0.0,)], finite_q=[(0.0,)],
    )
    sing, _ = css_scan(g, proto)
    assert [s.coords for s in sing] == [(1.0,)]


def test_prescribed_empty_is_zero():
    spec = PrescribedWfSpec()
    T = make_prescribed(spec, 1)
    xs = np.linspace(-10, 10, 50)[None, :]
    assert np.max(np.abs(T.values(xs))) == 0.0
    assert np.max(np.abs(T.ft().values(xs))) == 0.0


def test_prescribed_singleton_equals_g():
    spec = PrescribedWfSpec(asymptotic=[([1.0], [1.0])])
    T = make_prescribed(spec, 1, K_max=3)
    g = make_g([1.0], [1.0], K_max=3)
    xs = np.linspace(-30, 30, 301)[None, :]
    assert np.max(np.abs(T.values(xs) - g.values(xs))) < 1e-14


def test_prescribed_weights_are_dyadic():
    spec = PrescribedWfSpec(asymptotic=[([1.0], [1.0]), ([-1.0], [1.0])])
    T = make_prescribed(spec, 1, K_max=2)
    g1 = make_g([1.0], [1.0], K_max=2)
    g2 = make_g([-1.0], [1.0], K_max=2)
    xs = np.linspace(-12, 12, 101)[None, :]
    want = g1.values(xs) + 0.5 * g2.values(xs)
    assert np.max(np.abs(T.values(xs) - want)) < 1e-14


def test_weierstrass_tail_of_weights():
    # dropping levels beyond L changes the asymptotic sum by <= 2^-L sup|g|
    L = 30
    assert 2.0 ** (-L) * 2.0 < 1e-8


def test_classical_part_scan_and_smooth_ft():
    spec = PrescribedWfSpec(classical=[((0.5,), (1.0,))])
    T = make_prescribed(spec, 1)
    proto = WfProtocol.make(
        1,
        box=16.0,
        ngrid=4096,
        rho_max_frac=0.7,
        classical_centers=[(-2.0,), (-1.0,), (0.0,), (0.5,), (1.0,), (2.0,)],
        finite_q=[(-2.0,), (0.0,), (2.0,)],
    )
    from sgosc.compactify import CompactPoint

    wf = wf_scan(T, proto)
    target = wf.lookup(CompactPoint.finite([0.5]), CompactPoint.direction([1.0]))
    assert target.label == "singular"
    # nothing singular farther than one center spacing from the target
    for c in wf.singular():
        assert abs(c.y.coords[0] - 0.5) <= 1.0 + 1e-9
    # the transform is classically smooth
    wf_ft = wf_scan(T.ft(), proto.replace(box=64.0))
    assert not [
        c for c in wf_ft.cells if c.kind == "classical" and c.label == "singular"
    ]


def test_classical_log_constraint_enforced():
    spec = PrescribedWfSpec(classical=[((5.0, ), (1.0,))])
    with pytest.raises(ValueError):
        make_prescribed(spec, 1, k_top=7)


def test_e_part_duality():
    spec = PrescribedWfSpec(e_part=[([1.0], (0.5,))])
    T = make_prescribed(spec, 1)
    # T-hat is the classical construction: bounded, supported near q = 0.5
    zs = np.linspace(-4, 4, 401)[None, :]
    ft_vals = np.abs(T.ft().values(zs))
    assert ft_vals.max() > 1e-3
    mask_far = np.abs(zs[0] - 0.5) > 1.2
    assert ft_vals[mask_far].max() < 1e-2 * ft_vals.max()


def test_spec_json_round_trip():
    spec = PrescribedWfSpec(
        asymptotic=[([1.0], [1.0])],
        classical=[((0.5,), (1.0,))],
        e_part=[([1.0], (0.5,))],
        weights=[1.0],
    )
    back = PrescribedWfSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()

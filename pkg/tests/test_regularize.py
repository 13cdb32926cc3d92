import numpy as np
import pytest

from sgosc.catalog import KgSpec, gaussian_amplitude, sep_power_phase
from sgosc.compactify import CompactPoint
from sgosc.oscint import SchwartzFn
from sgosc.phase import check_admissible
from sgosc.regularize import (
    ConeLocalizer,
    RegularizerRefused,
    apply_P_r,
    build_P,
    build_Q,
    build_Qp,
    residual_P,
)
from sgosc.symbols import constant_symbol, verify_order


@pytest.fixture(scope="module")
def bracket_P():
    phi = sep_power_phase(1, 1)
    check_admissible(phi)
    return build_P(phi)


@pytest.fixture(scope="module")
def kg_P():
    phi = KgSpec(1.0, 1).phase()
    check_admissible(phi)
    return build_P(phi)


def test_components_inside_plateau(bracket_P):
    u, v, w, chi = bracket_P.component_jets(np.zeros((1, 1)), np.zeros((1, 1)), 0)
    assert abs(u[0].value[0]) == 0.0
    assert abs(v[0].value[0]) == 0.0
    assert w.value[0] == pytest.approx(1.0)
    assert chi.value[0] == pytest.approx(1.0)


def test_adjoint_identity_bracket(bracket_P):
    rng = np.random.default_rng(0)
    x = rng.uniform(-50, 50, size=(1, 500))
    k = rng.uniform(-50, 50, size=(1, 500))
    assert residual_P(bracket_P, x, k).max() < 1e-10


def test_adjoint_identity_kg(kg_P):
    rng = np.random.default_rng(1)
    x = rng.uniform(-50, 50, size=(2, 500))
    k = rng.uniform(-50, 50, size=(1, 500))
    assert residual_P(kg_P, x, k).max() < 1e-10


def test_component_orders_kg(kg_P):
    # the product algebra fixes the component orders: u multiplies grad_xi,
    # so u in SG^(-n, -nu+1) = (-1, 0); v multiplies grad_x, so
    # v in SG^(-n+1, -nu) = (0, -1); w in SG^(-n, -nu) = (-1, -1)
    from sgosc.symbols import SymbolFn

    phi = kg_P.phi

    def comp_symbol(which, order):
        def jet_fn(xj, kj):
            K = (xj + kj)[0].order
            x = np.stack([j.value.real for j in xj])
            xi = np.stack([j.value.real for j in kj])
            u, v, w, _ = kg_P.component_jets(x, xi, K)
            if which == "u":
                return u[0]
            if which == "v":
                return v[0]
            return w

        return SymbolFn(phi.d, phi.s, order, jet_fn, which)

    assert verify_order(comp_symbol("u", (-1.0, 0.0)), (-1.0, 0.0)).ok
    assert verify_order(comp_symbol("v", (0.0, -1.0)), (0.0, -1.0)).ok
    assert verify_order(comp_symbol("w", (-1.0, -1.0)), (-1.0, -1.0)).ok


def test_apply_P_r_zero_is_identity(bracket_P):
    a = gaussian_amplitude(1, 1)
    f = SchwartzFn.gaussian(1)
    out = apply_P_r(bracket_P, a, f, 0)
    x = np.array([[0.7]])
    k = np.array([[-0.3]])
    want = a.value(x, k) * f.value(x)
    assert abs(out.value(x, k)[0] - want[0]) < 1e-14


def test_apply_P_is_plateau_identity(bracket_P):
    one = constant_symbol(1, 1, 1.0)
    out = apply_P_r(bracket_P, one, None, 1)
    # inside the chi = 1 region P(1) = w = 1
    assert out.value(np.zeros((1, 1)), np.zeros((1, 1)))[0] == pytest.approx(1.0)


def test_order_descent_under_P(bracket_P):
    a = constant_symbol(1, 1, 1.0).with_order((0.0, 0.0))
    for r in (1, 2):
        out = apply_P_r(bracket_P, a, None, r)
        assert out.order == (-float(r), -float(r))
        assert verify_order(out, out.order).ok


def test_leibniz_cross_check_in_P(bracket_P):
    # P(a f) via jets equals u.grad(af) + v.grad(af) + w af term-by-term
    a = gaussian_amplitude(1, 1)
    f = SchwartzFn.gaussian(1)
    x = np.array([[5.0]])
    k = np.array([[4.0]])
    out = apply_P_r(bracket_P, a, f, 1).value(x, k)[0]
    u, v, w, _ = bracket_P.component_jets(x, k, 0)
    from sgosc.jets import jet_variables

    vars_ = jet_variables(1, x, k)
    g = a.jet(x, k, 1) * f.jet_fn(vars_[:1])
    manual = (
        u[0].value * g.derivative(1).value
        + v[0].value * g.derivative(0).value
        + w.value * g.value
    )[0]
    assert abs(out - manual) < 1e-12 * max(1.0, abs(manual))


def test_build_P_rejects_small_R(bracket_P):
    with pytest.raises(ValueError):
        build_P(bracket_P.phi, R=0.5)


def test_Q_accept_and_residual():
    phi = KgSpec(1.0, 1).phase()
    loc = ConeLocalizer(CompactPoint.finite([3.0, 0.0]), CompactPoint.direction([1.0]))
    Q = build_Q(phi, loc)
    rng = np.random.default_rng(2)
    x = rng.uniform(-4, 4, size=(2, 200))
    k = rng.uniform(2, 60, size=(1, 200))
    assert Q.residual(x, k).max() < 1e-12


def test_Q_refused_on_degenerate_cone():
    phi = KgSpec(1.0, 1).phase()
    with pytest.raises(RegularizerRefused):
        build_Q(
            phi,
            ConeLocalizer(CompactPoint.finite([0.0, 0.0]), CompactPoint.direction([1.0])),
        )


def test_Qp_residual_and_refusal():
    phi = KgSpec(1.0, 1).phase()
    qp = build_Qp(
        phi,
        CompactPoint.finite([0.0, 0.0]),
        CompactPoint.direction([0.0, 1.0]),
        CompactPoint.direction([1.0]),
    )
    rng = np.random.default_rng(3)
    xs = np.zeros((2, 100))
    ks = rng.uniform(30, 100, (1, 100))
    ps = np.stack([np.zeros(100), rng.uniform(30, 100, 100)])
    assert qp.residual(xs, ks, ps).max() < 1e-12
    with pytest.raises(RegularizerRefused):
        # covariable region on the forward shell direction: eta_p degenerates
        build_Qp(
            phi,
            CompactPoint.finite([0.0, 0.0]),
            CompactPoint.direction([-1.0 / np.sqrt(2), 1.0 / np.sqrt(2)]),
            CompactPoint.direction([1.0]),
        )


def test_all_three_adjoint_identities_on_random_points():
    phi = sep_power_phase(1, 1)
    check_admissible(phi)
    P = build_P(phi)
    rng = np.random.default_rng(4)
    x = rng.uniform(-40, 40, (1, 1000))
    k = rng.uniform(-40, 40, (1, 1000))
    assert residual_P(P, x, k).max() < 1e-8
    loc = ConeLocalizer(CompactPoint.finite([2.0]), CompactPoint.direction([1.0]))
    Q = build_Q(phi, loc)
    k2 = rng.uniform(2, 80, (1, 1000))
    assert Q.residual(rng.uniform(-3, 3, (1, 1000)), k2).max() < 1e-8

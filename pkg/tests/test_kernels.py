"""Two-point kernel tests.

Genus-1 oracles are closed theta-quotient forms written directly against
theta1_jet, independently of the kernel assembly: with u the twist over
2*pi*i, the plain kernel is -(th'/th)(w-z) - (th'/th)(z), the twisted one
is th(z-w-u) th'(0) / (th(z-w) th(-u)), the diagonal constants are
-(th'/th)(z) and (th'/th)(-u), and the quadratic differential is
-(th''/th)(u).  Genus-2 checks are consistency-based: finite-separation
kernel values against the analytic diagonal series, pole structure at the
base point against the fitted expansion coefficients, and exact symmetry
or cancellation statements.
"""

import numpy as np
import pytest

from curveops.curve import (
    INFINITY,
    CurvePoint,
    EllipticCurve,
    HyperellipticCurve,
    RationalCurve,
    holomorphic_differentials,
)
from curveops.errors import (
    BadDivisorDegree,
    FitIllConditioned,
    NonGenericTwist,
    PoleAtArgument,
)
from curveops.jets import Jet
from curveops.kernels import (
    Divisor,
    KernelField,
    TwistVector,
    a_coeffs,
    a_cycle_integral,
    connection_D,
    diagonal_series,
    green,
    green_twisted,
    green_twisted_Q,
    omega_quadratic,
    omega_tilde,
    period_variation,
    phi_and_glambda,
)
from curveops.theta import theta1_jet

TAU1 = 0.3 + 1.1j
TAU1M = np.array([[TAU1]], dtype=complex)
QUINTIC = [-2.1, -0.7, 0.4, 1.3, 2.6]
LAM1 = 0.37 + 0.21j
LAM2 = [0.31 + 0.17j, -0.22 + 0.41j]


@pytest.fixture(scope="module")
def elliptic():
    return EllipticCurve(TAU1)


@pytest.fixture(scope="module")
def hyper():
    return HyperellipticCurve(QUINTIC)


def th1(x, order=1):
    return theta1_jet(Jet.variable(0, [x], order), TAU1M)


def logdtheta(x):
    j = th1(x)
    return j.coefficient((1,)) / j.value()


def green_oracle(z, w):
    return -logdtheta(w - z) - logdtheta(z)


def twisted_oracle(lam, z, w):
    u = lam / (2j * np.pi)
    j0 = th1(0.0)
    return (
        th1(z - w - u).value()
        * j0.coefficient((1,))
        / (th1(z - w).value() * th1(-u).value())
    )


# -- plain kernel ---------------------------------------------------------------


def test_green_elliptic_closed_form(elliptic):
    rng = np.random.default_rng(31)
    for _ in range(50):
        z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        w = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        if abs(z - w) < 0.05 or abs(z) < 0.05:
            continue
        assert abs(green(elliptic, z, w) - green_oracle(z, w)) < 1e-10


def test_green_residue(elliptic, hyper):
    # trapezoid mean of G*(z-w) on a small circle is the residue
    for model, w in ((elliptic, CurvePoint("z", 0.17 - 0.23j)),
                     (hyper, CurvePoint("x", 0.9 + 0.6j, 1))):
        r, n = 1e-3, 16
        acc = 0j
        for k in range(n):
            d = r * np.exp(2j * np.pi * k / n)
            zp = CurvePoint(w.chart, w.value + d, w.sheet)
            acc += green(model, zp, w) * d
        assert abs(acc / n - 1.0) < 1e-8


def test_green_vanishes_at_base(elliptic, hyper):
    assert abs(green(elliptic, 0.31 + 0.12j, CurvePoint("z", 0.0))) < 1e-9
    assert abs(green(hyper, CurvePoint("x", 0.9 + 0.6j, 1), INFINITY)) < 1e-9


def test_green_monodromy_elliptic(elliptic):
    # the second slot steps by the normalized differential over the b-cycle
    # and is periodic over the a-cycle; the first slot is fully periodic
    z, w = 0.23 - 0.11j, -0.31 + 0.17j
    base = green(elliptic, z, w)
    omega = holomorphic_differentials(elliptic)[0](z)
    assert abs(green(elliptic, z, w + TAU1) - base - omega) < 1e-9
    assert abs(green(elliptic, z, w + 1) - base) < 1e-9
    assert abs(green(elliptic, z + TAU1, w) - base) < 1e-9
    assert abs(green(elliptic, z + 1, w) - base) < 1e-9


def test_green_a_cycle_integral(elliptic, hyper):
    # zero for the canonical representative (loop separating neither pole
    # from the other); a separating representative shifts by one residue
    w1 = CurvePoint("z", -0.31 - 0.17j)
    val = a_cycle_integral(elliptic, lambda p: green(elliptic, p, w1), 0)
    assert abs(val) < 1e-8
    w1b = CurvePoint("z", -0.31 + 0.47j)
    val = a_cycle_integral(elliptic, lambda p: green(elliptic, p, w1b), 0)
    assert abs(val - 2j * np.pi) < 1e-8
    w2 = CurvePoint("x", 0.9 + 0.6j, 1)
    val = a_cycle_integral(hyper, lambda p: green(hyper, p, w2), 0, nodes=256)
    assert abs(val) < 1e-8


def test_green_base_independence(elliptic, hyper):
    # moving the base point adds a z-form constant in w
    cases = [
        (elliptic, CurvePoint("z", 0.23 - 0.11j), CurvePoint("z", 0.4 + 0.2j),
         [CurvePoint("z", w) for w in (-0.31 + 0.17j, 0.05 - 0.3j, 0.27 + 0.31j)]),
        (hyper, CurvePoint("x", 0.9 + 0.6j, 1), CurvePoint("x", 2.0 + 1.0j, 1),
         [CurvePoint("x", w, -1) for w in (-1.4 + 0.8j, 0.3 - 0.9j, 1.8 + 1.2j)]),
    ]
    for model, z, b2, ws in cases:
        diffs = [green(model, z, w, base=b2) - green(model, z, w) for w in ws]
        assert max(abs(d - diffs[0]) for d in diffs) < 1e-8
        assert abs(diffs[0]) > 1e-3  # the shift itself is not trivial


def test_green_rational_and_poles():
    m0 = RationalCurve()
    assert abs(green(m0, 1.5, 0.5) - 1.0) < 1e-15
    assert green(m0, 1.5, INFINITY) == 0
    with pytest.raises(PoleAtArgument):
        green(m0, INFINITY, 0.5)
    with pytest.raises(PoleAtArgument):
        green(m0, 0.5, 0.5)


def test_green_coincident_raises(elliptic):
    with pytest.raises(PoleAtArgument):
        green(elliptic, 0.3, 0.3)
    with pytest.raises(PoleAtArgument):
        green_twisted(elliptic, TwistVector([LAM1]), 0.3, 0.3)


def test_green_jet_argument(elliptic):
    # a jet-valued point produces the derivative tower of the coefficient
    z0, w = 0.23 - 0.11j, -0.31 + 0.17j
    zj = CurvePoint("z", Jet.variable(0, [z0], 2))
    gj = green(elliptic, zj, w)
    h = 1e-5
    fd = (green(elliptic, z0 + h, w) - green(elliptic, z0 - h, w)) / (2 * h)
    assert abs(gj.value() - green(elliptic, z0, w)) < 1e-12
    assert abs(gj.coefficient((1,)) - fd) < 1e-6


# -- twisted kernel ---------------------------------------------------------------


def test_twisted_elliptic_closed_form(elliptic):
    rng = np.random.default_rng(32)
    done = 0
    while done < 50:
        lam = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        w = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        if abs(z - w) < 0.05 or abs(lam) < 0.05:
            continue
        got = green_twisted(elliptic, TwistVector([lam]), z, w)
        assert abs(got - twisted_oracle(lam, z, w)) < 1e-9
        done += 1


def test_twisted_residue(elliptic):
    w = CurvePoint("z", 0.17 - 0.23j)
    r, n = 1e-3, 16
    acc = 0j
    for k in range(n):
        d = r * np.exp(2j * np.pi * k / n)
        acc += green_twisted(elliptic, TwistVector([LAM1]), CurvePoint("z", w.value + d), w) * d
    assert abs(acc / n - 1.0) < 1e-8


def test_twisted_monodromy_elliptic(elliptic):
    tw = TwistVector([LAM1])
    z, w = 0.23 - 0.11j, -0.31 + 0.17j
    base = green_twisted(elliptic, tw, z, w)
    assert abs(green_twisted(elliptic, tw, z + TAU1, w) / base - np.exp(LAM1)) < 1e-8
    assert abs(green_twisted(elliptic, tw, z, w + TAU1) / base - np.exp(-LAM1)) < 1e-8
    assert abs(green_twisted(elliptic, tw, z + 1, w) - base) < 1e-9
    assert abs(green_twisted(elliptic, tw, z, w + 1) - base) < 1e-9


def test_twisted_nongeneric_and_genus0(elliptic):
    with pytest.raises(NonGenericTwist):
        green_twisted(elliptic, TwistVector([0.0]), 0.3, 0.1)
    assert not TwistVector([0.0]).is_generic(elliptic)
    assert TwistVector([LAM1]).is_generic(elliptic)
    with pytest.raises(ValueError):
        green_twisted(RationalCurve(), TwistVector([]), 1.5, 0.5)


def test_twisted_jet_twist_derivative(elliptic):
    z, w = CurvePoint("z", 0.23 - 0.11j), CurvePoint("z", -0.31 + 0.17j)
    lj = TwistVector([Jet.variable(0, [LAM1], 2)])
    gj = green_twisted(elliptic, lj, z, w)
    h = 1e-5
    fd = (
        green_twisted(elliptic, TwistVector([LAM1 + h]), z, w)
        - green_twisted(elliptic, TwistVector([LAM1 - h]), z, w)
    ) / (2 * h)
    assert abs(gj.coefficient((1,)) - fd) < 1e-6


# -- divisor-twisted kernel -------------------------------------------------------


def test_divisor_degree_gate(hyper):
    tw = TwistVector(LAM2)
    z, w = CurvePoint("x", 0.9 + 0.6j, 1), CurvePoint("x", -1.4 + 0.8j, -1)
    q = CurvePoint("x", 0.05 + 0.55j, 1)
    with pytest.raises(BadDivisorDegree):
        green_twisted_Q(hyper, tw, Divisor([(q, 2)]), z, w)
    with pytest.raises(BadDivisorDegree):
        green_twisted_Q(hyper, tw, Divisor([(q, -1)]), z, w)


def test_divisor_base_point_reduction(elliptic, hyper):
    # degree g-1 supported at the base point reproduces the plain twisted kernel
    z1, w1 = 0.23 - 0.11j, -0.31 + 0.17j
    tw1 = TwistVector([LAM1])
    d = green_twisted_Q(elliptic, tw1, Divisor([]), z1, w1) - green_twisted(
        elliptic, tw1, z1, w1
    )
    assert abs(d) < 1e-10
    tw2 = TwistVector(LAM2)
    z2, w2 = CurvePoint("x", 0.9 + 0.6j, 1), CurvePoint("x", -1.4 + 0.8j, -1)
    d2 = green_twisted_Q(hyper, tw2, Divisor([(INFINITY, 1)]), z2, w2) - green_twisted(
        hyper, tw2, z2, w2
    )
    assert abs(d2) < 1e-10


def test_divisor_zero_and_residue(hyper):
    tw = TwistVector(LAM2)
    q1 = CurvePoint("x", 0.05 + 0.55j, 1)
    Q = Divisor([(q1, 1)])
    w = CurvePoint("x", -1.4 + 0.8j, -1)
    # z-zero at the divisor point
    scale = abs(green_twisted_Q(hyper, tw, Q, CurvePoint("x", 0.9 + 0.6j, 1), w))
    assert abs(green_twisted_Q(hyper, tw, Q, q1, w)) < 1e-6 * scale
    # simple pole with residue one on the diagonal
    r, n = 1e-3, 16
    acc = 0j
    for k in range(n):
        d = r * np.exp(2j * np.pi * k / n)
        zp = CurvePoint("x", w.value + d, w.sheet)
        acc += green_twisted_Q(hyper, tw, Q, zp, w) * d
    assert abs(acc / n - 1.0) < 1e-6


# -- bidifferential ---------------------------------------------------------------


def test_omega_tilde_symmetry_elliptic_grid(elliptic):
    pts = [0.08 + (0.84 * k / 19 - 0.42) + 0.31j * (k % 5 - 2) / 2 for k in range(20)]
    zs = np.linspace(-0.42, 0.42, 20) + 0.11j
    ws = np.linspace(-0.40, 0.40, 20) - 0.17j
    worst = 0.0
    for z in zs:
        for w in ws:
            if abs(z - w) < 0.05:
                continue
            worst = max(worst, abs(omega_tilde(elliptic, z, w) - omega_tilde(elliptic, w, z)))
    assert worst < 1e-9


def test_omega_tilde_symmetry_genus2(hyper):
    pairs = [
        (CurvePoint("x", 0.9 + 0.6j, 1), CurvePoint("x", -1.4 + 0.8j, -1)),
        (CurvePoint("x", 2.0 + 1.0j, 1), CurvePoint("x", 0.3 - 0.9j, -1)),
        (CurvePoint("x", -0.2 + 1.3j, 1), CurvePoint("x", 1.8 + 0.7j, 1)),
    ]
    for z, w in pairs:
        assert abs(omega_tilde(hyper, z, w) - omega_tilde(hyper, w, z)) < 1e-5


def test_omega_tilde_diagonal_coefficient(elliptic):
    z = 0.23 - 0.11j
    vals = []
    for h in (1e-2, 5e-3):
        vals.append(omega_tilde(elliptic, z, z + h) * h * h)
    # second-order one-sided limit: the h^2 error term cancels
    extr = (4 * vals[1] - vals[0]) / 3
    assert abs(extr - 1.0) < 1e-7


def test_omega_tilde_is_w_derivative_of_green(elliptic):
    # differentiating the plain kernel in its second slot gives the bidifferential
    z, w0 = 0.23 - 0.11j, -0.31 + 0.17j
    wj = CurvePoint("z", Jet.variable(0, [w0], 1))
    gj = green(elliptic, z, wj)
    assert abs(gj.coefficient((1,)) - omega_tilde(elliptic, z, w0)) < 1e-10


def test_omega_tilde_rational_and_errors():
    assert abs(omega_tilde(RationalCurve(), 1.5, 0.5) - 1.0) < 1e-15
    m = EllipticCurve(TAU1)
    with pytest.raises(PoleAtArgument):
        omega_tilde(m, 0.3, 0.3)
    with pytest.raises(TypeError):
        omega_tilde(m, CurvePoint("z", Jet.variable(0, [0.3], 1)), 0.1)


# -- diagonal series ---------------------------------------------------------------


def test_diagonal_constants_elliptic(elliptic):
    z = 0.23 - 0.11j
    tw = TwistVector([LAM1])
    u = LAM1 / (2j * np.pi)
    phi, g = phi_and_glambda(elliptic, tw, z)
    assert abs(phi + logdtheta(z)) < 1e-12
    assert abs(g - logdtheta(-u)) < 1e-12
    for slot in ("first", "second"):
        S = diagonal_series(elliptic, CurvePoint("z", z), orders=1, slot=slot)
        assert abs(S[0] - phi) < 1e-12
        SL = diagonal_series(elliptic, CurvePoint("z", z), lam=tw, orders=1, slot=slot)
        assert abs(SL[0] - g) < 1e-12


def test_diagonal_series_matches_kernel_at_finite_separation(hyper):
    tw = TwistVector(LAM2)
    zp = CurvePoint("x", 0.9 + 0.6j, 1)
    h = 1e-3
    wp = CurvePoint("x", zp.value + h, 1)
    S = diagonal_series(hyper, zp, orders=3)
    assert abs(green(hyper, zp, wp) + 1 / h - (S[0] + S[1] * h + S[2] * h * h)) < 1e-8
    T = diagonal_series(hyper, zp, orders=3, slot="first")
    assert abs(green(hyper, wp, zp) - 1 / h - (T[0] + T[1] * h + T[2] * h * h)) < 1e-8
    SL = diagonal_series(hyper, zp, lam=tw, orders=3)
    assert (
        abs(green_twisted(hyper, tw, zp, wp) + 1 / h - (SL[0] + SL[1] * h + SL[2] * h * h))
        < 1e-8
    )
    TL = diagonal_series(hyper, zp, lam=tw, orders=3, slot="first")
    assert (
        abs(green_twisted(hyper, tw, wp, zp) - 1 / h - (TL[0] + TL[1] * h + TL[2] * h * h))
        < 1e-8
    )
    # the two slots share their constant term at any genus
    assert abs(S[0] - T[0]) < 1e-12
    assert abs(SL[0] - TL[0]) < 1e-12


def test_diagonal_first_coefficient_elliptic(elliptic):
    # the plain kernel's linear diagonal coefficient: -th'''(0) / (3 th'(0))
    j0 = th1(0.0, 3)
    want = -6 * j0.coefficient((3,)) / (3 * j0.coefficient((1,)))
    S = diagonal_series(elliptic, CurvePoint("z", 0.23 - 0.11j), orders=2)
    assert abs(S[1] - want) < 1e-11


def test_glambda_crosscheck_finite_separation(elliptic):
    rng = np.random.default_rng(33)
    done = 0
    while done < 20:
        lam = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        if abs(lam) < 0.05:
            continue
        tw = TwistVector([lam])
        _, g = phi_and_glambda(elliptic, tw, z)
        h = 2e-3
        v = [green_twisted(elliptic, tw, z, z + h / 2**k) + 2**k / h for k in range(3)]
        extr = (v[0] - 6 * v[1] + 8 * v[2]) / 3  # kills the linear and quadratic terms
        assert abs(extr - g) < 1e-7
        done += 1


def test_glambda_divergence_scan(elliptic):
    # g grows like the reciprocal normalizing theta as the twist degenerates;
    # the product stays pinned near th'(0)
    z = 0.23 - 0.11j
    j0 = th1(0.0)
    lim = j0.coefficient((1,))
    for mag in (1e-2, 1e-3, 1e-4):
        lam = mag * np.exp(0.4j)
        u = lam / (2j * np.pi)
        _, g = phi_and_glambda(elliptic, TwistVector([lam]), z)
        assert abs(g) > 0.5 / abs(u)
        assert abs(g * th1(-u).value() - lim) < 0.1 * abs(lim)


def test_phi_genus0():
    phi, g = phi_and_glambda(RationalCurve(), TwistVector([]), 1.5)
    assert phi == 0 and g == 0


def test_diagonal_jet_twist(elliptic):
    z = CurvePoint("z", 0.23 - 0.11j)
    lj = TwistVector([Jet.variable(0, [LAM1], 2)])
    S = diagonal_series(elliptic, z, lam=lj, orders=1)[0]
    h = 1e-5
    fp = diagonal_series(elliptic, z, lam=TwistVector([LAM1 + h]), orders=1)[0]
    fm = diagonal_series(elliptic, z, lam=TwistVector([LAM1 - h]), orders=1)[0]
    assert abs(S.coefficient((1,)) - (fp - fm) / (2 * h)) < 1e-6


# -- connection -------------------------------------------------------------------


def const_form(c):
    def ev(pt):
        v = pt.value
        if isinstance(v, Jet):
            return Jet.constant(c, v.base_point, v.order)
        return c

    return ev


def power_form(n):
    def ev(pt):
        return pt.value**n

    return ev


def test_connection_elliptic_display(elliptic):
    # doubled twist acting on the normalized differential:
    # 2 (th'/th)(lam / i pi) * 2 i pi per (dz)^2
    z = 0.23 - 0.11j
    tw2 = TwistVector([LAM1]).doubled()
    om = holomorphic_differentials(elliptic)[0]
    got = connection_D(elliptic, tw2, om, z)
    want = 2 * logdtheta(LAM1 / (1j * np.pi)) * 2j * np.pi
    assert abs(got - want) < 1e-8


def test_connection_log_derivative_consistency(elliptic):
    # the action on a constant-coefficient form is minus twice the twisted
    # diagonal constant
    z = 0.23 - 0.11j
    tw = TwistVector([LAM1])
    _, g = phi_and_glambda(elliptic, tw, z)
    got = connection_D(elliptic, tw, const_form(2j * np.pi), z)
    assert abs(got - (-2 * g * 2j * np.pi)) < 1e-10


def test_connection_leibniz_sign(elliptic):
    # D(f om) = f D(om) + f' om, derived from the limit definition
    z = 0.23 - 0.11j
    tw = TwistVector([LAM1])

    def f_om(pt):
        return (pt.value**2 + 0.3) * 2j * np.pi

    D_fom = connection_D(elliptic, tw, f_om, z)
    D_om = connection_D(elliptic, tw, const_form(2j * np.pi), z)
    f, fp = z * z + 0.3, 2 * z
    assert abs(D_fom - f * D_om - fp * 2j * np.pi) < 1e-9
    assert abs(D_fom - f * D_om + fp * 2j * np.pi) > 0.1


def test_connection_leading_orders_at_base(hyper):
    # coefficient (a - 2g + 2) on t^(a-1): a=0 gives -2, a=3 gives +1
    tw = TwistVector(LAM2)
    r0 = abs(hyper._anchor_chart_value())
    t1, t2 = 0.03 * r0, 0.015 * r0

    def lead(form, a):
        v1 = connection_D(hyper, tw, form, CurvePoint("t", t1)) * t1 ** (1 - a)
        v2 = connection_D(hyper, tw, form, CurvePoint("t", t2)) * t2 ** (1 - a)
        return 2 * v2 - v1

    assert abs(lead(const_form(1.0), 0) - (-2.0)) < 1e-3
    assert abs(lead(power_form(3), 3) - 1.0) < 1e-3


def test_connection_genus0():
    got = connection_D(RationalCurve(), TwistVector([]), power_form(2), 0.3)
    assert abs(got - 0.6) < 1e-12


# -- quadratic differential --------------------------------------------------------


def test_quadratic_elliptic_closed_form(elliptic):
    z = 0.23 - 0.11j
    for lam in (LAM1, 2 * LAM1, 0.8 - 0.4j):
        u = lam / (2j * np.pi)
        ju = th1(u, 2)
        want = -2 * ju.coefficient((2,)) / ju.value()
        got = omega_quadratic(elliptic, TwistVector([lam]), z)
        assert abs(got - want) < 1e-8


def test_quadratic_regularizer_is_twist_free(elliptic):
    # the added curvature term: omega - 2 S_1[twisted] is the same for
    # every twist (and equals the plain S_1)
    z = CurvePoint("z", 0.23 - 0.11j)
    SG = diagonal_series(elliptic, z, orders=2)
    outs = []
    for lam in (LAM1, 0.8 - 0.4j):
        tw = TwistVector([lam])
        SL = diagonal_series(elliptic, z, lam=tw, orders=2)
        outs.append(omega_quadratic(elliptic, tw, z) - 2 * SL[1])
    assert abs(outs[0] - outs[1]) < 1e-12
    assert abs(outs[0] - SG[1]) < 1e-12


def test_quadratic_genus2_leading_and_subleading(hyper):
    tw = TwistVector(LAM2)
    A = a_coeffs(hyper, tw, 1, 1)
    r0 = abs(hyper._anchor_chart_value())
    t1, t2 = 0.02 * r0, 0.01 * r0
    v1 = omega_quadratic(hyper, tw, CurvePoint("t", t1)) * t1 * t1
    v2 = omega_quadratic(hyper, tw, CurvePoint("t", t2)) * t2 * t2
    lead = 2 * v2 - v1
    assert abs(lead - (-2.0)) / 2 < 1e-4  # -g(g-1) at g=2
    s1 = (omega_quadratic(hyper, tw, CurvePoint("t", t1)) + 2 / t1**2) * t1
    s2 = (omega_quadratic(hyper, tw, CurvePoint("t", t2)) + 2 / t2**2) * t2
    sub = 2 * s2 - s1
    assert abs(sub - (-2 * A[0, 0])) < 1e-3  # -2(g-1) a_00


def test_quadratic_genus0(elliptic):
    assert omega_quadratic(RationalCurve(), TwistVector([]), 0.3) == 0


# -- expansion coefficients --------------------------------------------------------


def test_expansion_a00_matches_diagonal_constant(elliptic):
    tw = TwistVector([LAM1])
    A = a_coeffs(elliptic, tw, 2, 2)
    g0 = diagonal_series(elliptic, CurvePoint("z", 0.0), lam=tw, orders=1)[0]
    assert abs(A[0, 0] - g0) < 1e-7


def test_expansion_reconstruction(elliptic, hyper):
    tw1 = TwistVector([LAM1])
    A = a_coeffs(elliptic, tw1, 6, 6)
    zv, wv = 0.075 * np.exp(0.7j), 0.0475 * np.exp(-1.9j)
    rec = 1 / (zv - wv) + sum(
        A[i, j] * zv**i * wv**j for i in range(7) for j in range(7)
    )
    got = green_twisted(elliptic, tw1, zv, wv)
    assert abs(got - rec) < 1e-6 * abs(got)

    tw2 = TwistVector(LAM2)
    A2 = a_coeffs(hyper, tw2, 6, 6)
    r0 = abs(hyper._anchor_chart_value())
    zv, wv = 0.175 * r0 * np.exp(0.7j), 0.11 * r0 * np.exp(-1.9j)
    rec = (zv / wv) * (
        1 / (zv - wv)
        + sum(A2[i, j] * zv**i * wv**j for i in range(7) for j in range(7))
    )
    got = green_twisted(hyper, tw2, CurvePoint("t", zv), CurvePoint("t", wv))
    assert abs(got - rec) < 1e-6 * abs(got)


def test_expansion_pole_structure_genus2(hyper):
    # twisted diagonal constant near the base point: (g-1)/t + a00 + ...
    tw = TwistVector(LAM2)
    A = a_coeffs(hyper, tw, 2, 2)
    r0 = abs(hyper._anchor_chart_value())
    for tv in (0.02 * r0, 0.01 * r0):
        g = diagonal_series(hyper, CurvePoint("t", tv), lam=tw, orders=1)[0]
        pred = A[0, 0] + (A[1, 0] + A[0, 1]) * tv + (A[2, 0] + A[1, 1] + A[0, 2]) * tv**2
        assert abs(g - 1 / tv - pred) < 2e-5 * abs(g)


def test_expansion_gates(elliptic):
    with pytest.raises(FitIllConditioned):
        a_coeffs(elliptic, TwistVector([LAM1]), 2, 2, radius=0.45)
    with pytest.raises(NonGenericTwist):
        a_coeffs(elliptic, TwistVector([0.0]), 2, 2)
    with pytest.raises(ValueError):
        a_coeffs(RationalCurve(), TwistVector([]), 1, 1)
    with pytest.raises(ValueError):
        a_coeffs(elliptic, TwistVector([LAM1]), 11, 2)


# -- period variation --------------------------------------------------------------


def test_variation_elliptic_residue():
    m = EllipticCurve(TAU1)
    dt = period_variation(m, {-1: 1.0})
    assert abs(dt[0, 0] - (2j * np.pi) ** 2) < 1e-12
    assert np.max(np.abs(period_variation(m, {0: 1.0, 3: 0.5 - 0.2j}))) == 0


def test_variation_genus2(hyper):
    dt = period_variation(hyper, {-1: 0.7 + 0.2j, -2: 1.1})
    assert np.max(np.abs(dt - dt.T)) == 0
    assert np.all(np.isfinite(dt)) and np.max(np.abs(dt)) > 1
    assert np.max(np.abs(period_variation(hyper, {2: 1.0}))) == 0


def test_variation_validation(hyper):
    with pytest.raises(ValueError):
        period_variation(hyper, {0.5: 1.0})
    with pytest.raises(ValueError):
        period_variation(RationalCurve(), {-1: 1.0})


# -- cycle quadrature --------------------------------------------------------------


def test_cycle_normalization(elliptic, hyper):
    oms1 = holomorphic_differentials(elliptic)
    val = a_cycle_integral(elliptic, oms1[0], 0) / (2j * np.pi)
    assert abs(val - 1.0) < 1e-10
    oms2 = holomorphic_differentials(hyper)
    for a in range(2):
        for b in range(2):
            val = a_cycle_integral(hyper, oms2[b], a, nodes=192) / (2j * np.pi)
            want = 1.0 if a == b else 0.0
            assert abs(val - want) < 1e-8


def test_cycle_validation(elliptic):
    with pytest.raises(ValueError):
        a_cycle_integral(RationalCurve(), lambda p: 1.0, 0)
    with pytest.raises(ValueError):
        a_cycle_integral(elliptic, lambda p: 1.0, 1)


# -- field wrapper -----------------------------------------------------------------


def test_field_dispatch(elliptic):
    tw = TwistVector([LAM1])
    z, w = 0.23 - 0.11j, -0.31 + 0.17j
    assert KernelField("G", elliptic)(z, w) == green(elliptic, z, w)
    assert KernelField("G_lambda", elliptic, twist=tw)(z, w) == green_twisted(
        elliptic, tw, z, w
    )
    assert KernelField("omega_tilde", elliptic)(z, w) == omega_tilde(elliptic, z, w)
    q = KernelField("G_lambda_Q", elliptic, twist=tw, divisor=Divisor([]))
    assert q(z, w) == green_twisted_Q(elliptic, tw, Divisor([]), z, w)


def test_field_validation(elliptic):
    with pytest.raises(ValueError):
        KernelField("mystery", elliptic)
    with pytest.raises(ValueError):
        KernelField("G_lambda", elliptic)
    with pytest.raises(ValueError):
        KernelField("G_lambda_Q", elliptic, twist=TwistVector([LAM1]))

"""Second-order operator family on twisted multipoint forms.

The central object is a family of operators indexed by a moving point of
the curve, acting on symmetric n-point differential forms whose
B-monodromy in every point variable is exp(-2 lambda_a).  The family is
assembled from the kernel layer: the untwisted and twisted propagation
kernels, the twisted connection, and the quadratic differential that
regularises the doubled-twist kernel on the diagonal.

Twist convention: every twist-dependent coefficient is evaluated at the
DOUBLED twist vector.  In particular the quadratic-differential term
takes the doubled argument; the elliptic conjugation identity
(apply_Tz docstring) pins this reading, and the verification report
records it.

Jet bookkeeping: an output jet of order M needs the form's evaluator at
order M+2 and the kernel coefficients at order M.  The kernel layer caps
theta jets at order 6, which bounds M at 3.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .curve import CurvePoint, abel_map, holomorphic_differentials
from .errors import (CoincidentPoints, DegenerateBasis, FitIllConditioned,
                     InsufficientJetOrder, MonodromyMismatch,
                     ResidueFitFailure, TruncationFailure)
from .jets import Jet
from .kernels import (TwistVector, connection_D, green, green_twisted,
                      omega_quadratic, phi_and_glambda)
from .theta import theta1_jet

__all__ = [
    "CorrelationForm",
    "KZBConfig",
    "apply_Tz",
    "apply_Tz_n0",
    "apply_Tz_rational",
    "commutator_norm",
    "basis_sections",
    "twisted_functions",
    "apply_ftilde",
    "pole_order_check",
    "kzb_point_variation",
    "kzb_coordinate_variation",
    "make_theta_test_form",
]

# theta jets cap at order 6 inside the kernel layer; the diagonal-series
# regularisation spends 3 of those, leaving output order <= 3
MAX_ORDER = 3


class CorrelationForm:
    """Symmetric n-point form given by a coefficient evaluator.

    evaluator(lam, *points) returns the coefficient of the form against
    the product of chart differentials at the given points.  Operators in
    this module call the evaluator with twist entries that are identity
    jets (Jet.variable) based at the twist value, so evaluators must
    handle Jet entries generically.  Point arguments are passed through
    unchanged (chart values or CurvePoints).
    """

    __slots__ = ("n", "evaluator", "level", "pole_bound", "twist_weight")

    def __init__(self, n, evaluator, level=None, pole_bound=None,
                 twist_weight=-2):
        n = int(n)
        if n < 0:
            raise ValueError("point count must be nonnegative")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "evaluator", evaluator)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "pole_bound", pole_bound)
        object.__setattr__(self, "twist_weight", twist_weight)

    def __setattr__(self, name, value):
        raise AttributeError("CorrelationForm is immutable")

    def __call__(self, lam, *points):
        if len(points) != self.n:
            raise ValueError(f"form takes {self.n} points, got {len(points)}")
        return self.evaluator(lam, *points)


def _twist_entries(lam):
    if lam is None:
        return []
    if isinstance(lam, TwistVector):
        return list(lam.lam)
    return list(lam)


def _entry_value(e):
    return e.value() if isinstance(e, Jet) else complex(e)


def _jet_order(lam):
    for e in _twist_entries(lam):
        if isinstance(e, Jet):
            return e.order
    return 0


def _chart_value(p):
    return p.value if isinstance(p, CurvePoint) else p


def _with_value(p, v):
    if isinstance(p, CurvePoint):
        return CurvePoint(p.chart, v, p.sheet)
    return v


def _as_jet(x, bp, order):
    return x if isinstance(x, Jet) else Jet.constant(x, bp, order)


def _mag(x):
    return abs(x.value()) if isinstance(x, Jet) else abs(x)


def _down(h, order):
    return h.truncate(order) if isinstance(h, Jet) else h


def _zeta_slice(F, g, order):
    """Coefficient of the last offset direction, as a jet in the first g."""
    bp = F.base_point[:g]
    shape = Jet.constant(0.0, bp, order)
    cf = [F.coefficient(ix + (1,)) for ix in shape.table]
    return Jet(bp, order, cf)


def _twist_values(model, lam):
    vals = np.array([_entry_value(e) for e in _twist_entries(lam)],
                    dtype=complex)
    if vals.size != model.genus:
        raise ValueError(
            f"twist vector has {vals.size} entries, genus is {model.genus}")
    return vals


def _lambda_jets(bp, order):
    g = bp.size
    if g == 0 or order == 0:
        return TwistVector([complex(v) for v in bp])
    return TwistVector([Jet.variable(a, bp, order) for a in range(g)])


def _doubled_coefficient_twist(bp, order):
    g = bp.size
    if g == 0:
        return TwistVector([])
    if order == 0:
        return TwistVector([2.0 * complex(v) for v in bp])
    return TwistVector([2.0 * Jet.variable(a, bp, order) for a in range(g)])


def _green_z_derivative(model, z, w):
    zj = Jet.variable(0, [_chart_value(z)], 1)
    return green(model, _with_value(z, zj), w).coefficient((1,))


def _twisted_slot_derivative(model, bp, order, z, w, slot):
    """d/d(chart) of the doubled-twist kernel in the given slot.

    Returns a jet of the given order in the twist directions (a plain
    number at order 0 or genus 0), differentiated at the slot point.
    """
    g = bp.size
    if g == 0:
        # twisted kernel degenerates to the plain one
        target = z if slot == "first" else w
        pj = Jet.variable(0, [_chart_value(target)], 1)
        if slot == "first":
            return green(model, _with_value(z, pj), w).coefficient((1,))
        return green(model, z, _with_value(w, pj)).coefficient((1,))
    target = z if slot == "first" else w
    bpm = np.concatenate([bp, [_chart_value(target)]])
    twm = TwistVector([2.0 * Jet.variable(a, bpm, order + 1)
                       for a in range(g)])
    pj = Jet.variable(g, bpm, order + 1)
    if slot == "first":
        Gm = green_twisted(model, twm, _with_value(z, pj), w)
    else:
        Gm = green_twisted(model, twm, z, _with_value(w, pj))
    if order == 0:
        return Gm.coefficient((0,) * g + (1,))
    return _zeta_slice(Gm, g, order)


def apply_Tz(model, k, f, lam, z, pts=(), order=0):
    """Apply the moving-point operator at z to the n-point form f.

    Returns a Jet of the requested order in the twist directions (plain
    complex at genus zero); its value is the coefficient of the output
    against the square of the chart differential at z times the chart
    differentials at the fixed points.

    On elliptic models at n = 0 the operator is conjugation of the
    doubled second derivative by a theta value: with v = lambda / (i pi),
    T f = 2 theta(v)^{-1} d^2/dv^2 (theta(v) f).  This identity is what
    fixes the doubled argument of the quadratic-differential term.

    Raises InsufficientJetOrder for order outside 0..3 and propagates
    NonGenericTwist from the kernel layer.
    """
    pts = tuple(pts)
    if f.n != len(pts):
        raise ValueError(f"form takes {f.n} points, got {len(pts)}")
    if order < 0 or order > MAX_ORDER:
        raise InsufficientJetOrder(
            f"output order {order} outside 0..{MAX_ORDER}")
    g = model.genus
    bp = _twist_values(model, lam)
    M = int(order)

    fj = f(_lambda_jets(bp, M + 2), *pts)
    if g:
        fj = _as_jet(fj, bp, M + 2)
    tw2 = _doubled_coefficient_twist(bp, M)
    oms = holomorphic_differentials(model)
    om_z = [om(z) for om in oms]
    G_pts = [green(model, z, za) for za in pts]
    Gsum2 = 2.0 * sum(G_pts) if pts else 0.0

    def momentum(h):
        # sum_a om_a(z) d/d lam_a + 2 sum_alpha G(z, z_alpha)
        if not isinstance(h, Jet):
            return Gsum2 * h if pts else 0.0
        out = Gsum2 * h.truncate(h.order - 1) if pts else 0.0
        for a in range(g):
            out = out + om_z[a] * h.derivative(a)
        return out

    total = 0.5 * momentum(momentum(fj))
    for a in range(g):
        Da = connection_D(model, tw2, oms[a], z)
        total = total + Da * _down(fj.derivative(a), M)

    fM = _down(fj, M)
    if pts:
        g2l = phi_and_glambda(model, tw2, z)[1] if g else 0.0
        for za, Gza in zip(pts, G_pts):
            dzG = _green_z_derivative(model, z, za)
            total = total + 2.0 * (dzG - 2.0 * g2l * Gza) * fM
    if g:
        total = total + k * omega_quadratic(model, tw2, z) * fM

    for alpha, za in enumerate(pts):
        sub = list(pts)
        sub[alpha] = z
        fa = f(_lambda_jets(bp, M + 1), *sub)
        if g:
            fa = _as_jet(fa, bp, M + 1)
        faM = _down(fa, M)
        inner = 0.0
        for a in range(g):
            inner = inner + oms[a](za) * fa.derivative(a)
        for beta, zb in enumerate(pts):
            if beta != alpha:
                inner = inner + 2.0 * green(model, za, zb) * faM
        if g:
            G2 = green_twisted(model, tw2, z, za)
        else:
            G2 = green(model, z, za)
        dG2 = _twisted_slot_derivative(model, bp, M, z, za, "second")
        Gaz = green(model, za, z)
        total = (total - 2.0 * G2 * inner
                 + (-4.0 * G2 * Gaz + 2.0 * k * dG2) * faM)
    return total


def apply_Tz_n0(model, k, f, lam, z, order=0):
    """Zero-point display, assembled independently of apply_Tz.

    0.5 (sum_a om_a(z) d_a)^2 + sum_a (D om_a)(z) d_a + k * (quadratic
    differential at doubled twist), applied to a function f(lam) of the
    twist.  f may be a plain callable or a zero-point CorrelationForm.
    """
    if order < 0 or order > MAX_ORDER:
        raise InsufficientJetOrder(
            f"output order {order} outside 0..{MAX_ORDER}")
    g = model.genus
    bp = _twist_values(model, lam)
    M = int(order)
    fj = f(_lambda_jets(bp, M + 2))
    if g:
        fj = _as_jet(fj, bp, M + 2)
    tw2 = _doubled_coefficient_twist(bp, M)
    oms = holomorphic_differentials(model)
    om_z = [om(z) for om in oms]

    first = 0.0
    for a in range(g):
        first = first + om_z[a] * fj.derivative(a)
    second = 0.0
    for a in range(g):
        second = second + om_z[a] * first.derivative(a)
    total = 0.5 * second
    for a in range(g):
        Da = connection_D(model, tw2, oms[a], z)
        total = total + Da * _down(fj.derivative(a), M)
    if g:
        total = total + k * omega_quadratic(model, tw2, z) * _down(fj, M)
    return total


def apply_Tz_rational(f, z, points):
    """Rational-curve counterpart on symmetric functions; exact on Fractions.

    (T(z) f)(z_1..z_n) = sum_i (sum_{j != i} 1/(z_j - z_i))
                         * (f with z in slot i - f) / (z - z_i)
    """
    pts = list(points)
    n = len(pts)
    for i in range(n):
        if pts[i] == z:
            raise CoincidentPoints("moving point collides with a fixed point")
        for j in range(i + 1, n):
            if pts[i] == pts[j]:
                raise CoincidentPoints("fixed points must be distinct")
    base = f(*pts)
    total = 0
    for i, zi in enumerate(pts):
        c = 0
        for j, zj in enumerate(pts):
            if j != i:
                c = c + 1 / (zj - zi)
        sub = list(pts)
        sub[i] = z
        total = total + c * (f(*sub) - base) / (z - zi)
    return total


def _nested_apply(model, k, f, lam, z_outer, z_inner, pts):
    inner = CorrelationForm(
        f.n,
        lambda lj, *qs: apply_Tz(model, k, f, lj, z_inner, qs,
                                 order=_jet_order(lj)),
        level=k, pole_bound=f.pole_bound, twist_weight=f.twist_weight)
    out = apply_Tz(model, k, inner, lam, z_outer, pts, order=0)
    return out.value() if isinstance(out, Jet) else out


def commutator_norm(model, k, f, lam, z, w, pts=()):
    """Relative size of (T_z T_w - T_w T_z) f at one sample point.

    Returns |a - b| / (|a| + |b| + 1) where a, b are the two nested
    applications evaluated at the given twist and points.
    """
    a = _nested_apply(model, k, f, lam, z, w, pts)
    b = _nested_apply(model, k, f, lam, w, z, pts)
    return abs(a - b) / (abs(a) + abs(b) + 1.0)


# deterministic generic shifts for the theta-quotient bases; every zero
# moves with the basis index, a shared zero would collapse the span into
# the subspace of sections vanishing there
_SHIFT_SEEDS = (0.137 + 0.289j, -0.241 + 0.173j, 0.319 - 0.121j,
                -0.113 - 0.227j, 0.421 + 0.067j, -0.337 + 0.401j)
_SHIFT_STEP = 0.293 - 0.171j
_SAMPLE_SEEDS = (0.21 + 0.07j, -0.33 + 0.19j, 0.12 - 0.23j,
                 0.44 + 0.31j, -0.27 - 0.11j, 0.05 + 0.41j)


def _th1(x, taum):
    if isinstance(x, Jet):
        return theta1_jet(x, taum)
    return theta1_jet(Jet.constant(x, [0.0], 1), taum).value()


def _one_point_sections(model, pole_order, offset=0.0):
    """Theta-quotient functions F_j(u2, z) with B-factor exp(-2*lam).

    u2 is -lam / (i pi), minus twice the normalised twist; the zero sum
    of each quotient equals u2 so the B-factor is exact.  Pole of order
    pole_order at the base point, j = 0..p-1.
    """
    p = int(pole_order)
    if p < 1:
        raise ValueError("pole order must be >= 1")
    if p > len(_SHIFT_SEEDS):
        raise ValueError(f"pole order must be <= {len(_SHIFT_SEEDS)}")
    taum = np.array([[model.tau]], dtype=complex)

    def make(j):
        shifts = [_SHIFT_SEEDS[i] + offset + j * _SHIFT_STEP
                  for i in range(p - 1)]
        fixed = sum(shifts)

        def F(u2, zv):
            num = _th1(zv - (u2 - fixed), taum)
            for s in shifts:
                num = num * _th1(zv - s, taum)
            return num / _th1(zv, taum) ** p

        return F

    return [make(j) for j in range(p)]


def _check_independence(model, lam, funcs):
    u2 = -_twist_values(model, lam)[0] / (1j * np.pi)
    p = len(funcs)
    mat = np.array([[funcs[j](u2, _SAMPLE_SEEDS[i]) for j in range(p)]
                    for i in range(p)], dtype=complex)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > 1e8:
        raise DegenerateBasis(
            f"sampled section matrix has condition {cond:.3e}")


def basis_sections(model, lam, pole_order, points=1):
    """Basis of symmetric products of twisted one-point sections.

    One-point sections are theta quotients with a pole of order
    pole_order at the base point and exact B-monodromy exp(-2 lambda);
    the symmetrised products of `points` of them span the multipoint
    space, dimension C(pole_order + points - 1, points).  points = 0
    returns the single constant form.

    Raises DegenerateBasis when the sampled independence check fails.
    """
    if model.genus != 1:
        raise ValueError("basis construction requires a genus-one model")
    n = int(points)
    if n < 0:
        raise ValueError("points must be nonnegative")
    p = int(pole_order)
    funcs = _one_point_sections(model, p)
    _check_independence(model, lam, funcs)

    if n == 0:
        def const_ev(lam_):
            for e in _twist_entries(lam_):
                if isinstance(e, Jet):
                    return Jet.constant(1.0, e.base_point, e.order)
            return 1.0 + 0.0j
        return [CorrelationForm(0, const_ev, pole_bound=p)]

    forms = []
    for mu in itertools.combinations_with_replacement(range(p), n):
        def ev(lam_, *zs, mu=mu):
            u2 = -_twist_entries(lam_)[0] / (1j * np.pi)
            zvals = [_chart_value(zi) for zi in zs]
            vals = [[funcs[j](u2, zv) for j in range(p)] for zv in zvals]
            total = 0.0
            for perm in itertools.permutations(range(n)):
                term = 1.0
                for slot, j in zip(perm, mu):
                    term = term * vals[slot][j]
                total = total + term
            return total / math.factorial(n)
        forms.append(CorrelationForm(n, ev, pole_bound=p))
    return forms


def twisted_functions(model, lam, pole_order):
    """Functions with B-monodromy exp(-2 lambda) and bounded base pole.

    These are the raising-map coefficients; the raising display maps the
    twisted section spaces to themselves only when the coefficient
    function carries the SAME B-factor exp(-2 lambda) as the sections
    (the derivative term's twist offset cancels the kernel's period step
    only in that case).  Returns pole_order callables rho(lam, z); both
    slots accept Jet values built on a shared space.
    """
    if model.genus != 1:
        raise ValueError("twisted functions require a genus-one model")
    p = int(pole_order)
    funcs = _one_point_sections(model, p, offset=0.177 - 0.095j)
    _check_independence(model, lam, funcs)

    def make(j):
        def rho(lam_, z):
            u2 = -_twist_entries(lam_)[0] / (1j * np.pi)
            return funcs[j](u2, _chart_value(z))
        return rho

    return [make(j) for j in range(p)]


def _check_rho_monodromy(model, rho, vals):
    if model.genus != 1:
        return
    lam_s = TwistVector([complex(v) for v in vals])
    z0 = 0.31 + 0.23j
    base = rho(lam_s, z0)
    ratio_b = rho(lam_s, z0 + model.tau) / base
    ratio_a = rho(lam_s, z0 + 1.0) / base
    want = np.exp(-2.0 * vals[0])
    if (abs(ratio_b - want) > 1e-7 * abs(want)
            or abs(ratio_a - 1.0) > 1e-7):
        raise MonodromyMismatch(
            f"twisted function has B-factor {ratio_b}, expected {want}, "
            f"A-factor {ratio_a}")


def _rho_z_derivative(model, rho, bp, order, zi):
    g = bp.size
    ziv = _chart_value(zi)
    if order == 0 or g == 0:
        zj = Jet.variable(0, [ziv], 1)
        lam_s = TwistVector([complex(v) for v in bp])
        return rho(lam_s, _with_value(zi, zj)).coefficient((1,))
    bpm = np.concatenate([bp, [ziv]])
    lamm = TwistVector([Jet.variable(a, bpm, order + 1) for a in range(g)])
    zj = Jet.variable(g, bpm, order + 1)
    return _zeta_slice(rho(lamm, _with_value(zi, zj)), g, order)


def apply_ftilde(model, k, rho, f):
    """Raising map: wedge a twisted function into an n-point form.

    (out)(z_1..z_{n+1}) = sum_i [ -rho(z_i) (sum_a om_a(z_i) d_a
        + 2 sum_{j != i} G(z_i, z_j)) + k * d rho(z_i) ] f(without slot i)

    The returned evaluator verifies rho's monodromy factors (A trivial,
    B equal to exp(-2 lambda), see twisted_functions) once per twist
    value and raises MonodromyMismatch beyond 1e-7.
    """
    n1 = f.n + 1
    checked = set()

    def ev(lam_, *zs):
        g = model.genus
        bp = _twist_values(model, lam_)
        M = _jet_order(lam_)
        key = tuple(bp)
        if key not in checked:
            _check_rho_monodromy(model, rho, bp)
            checked.add(key)
        oms = holomorphic_differentials(model)
        lam1 = _lambda_jets(bp, M + 1)
        lamM = _lambda_jets(bp, M)
        out = 0.0
        for i, zi in enumerate(zs):
            others = zs[:i] + zs[i + 1:]
            fi = f(lam1, *others)
            if g:
                fi = _as_jet(fi, bp, M + 1)
            fiM = _down(fi, M)
            acc = 0.0
            for a in range(g):
                acc = acc + oms[a](zi) * fi.derivative(a)
            for zj in others:
                acc = acc + 2.0 * green(model, zi, zj) * fiM
            rho_i = rho(lamM, zi)
            drho_i = _rho_z_derivative(model, rho, bp, M, zi)
            out = out + k * drho_i * fiM - rho_i * acc
        if M == 0 and isinstance(out, Jet):
            return out.value()
        return out

    return CorrelationForm(n1, ev, level=k, pole_bound=f.pole_bound,
                           twist_weight=f.twist_weight)


def _laurent_fit(offsets, values, orders):
    """Least-squares Laurent coefficients on a circle of sample offsets.

    values may be complex numbers or Jets (fitted coefficientwise).
    Returns {order: coefficient}.  Raises FitIllConditioned when the
    column-scaled system is numerically singular.
    """
    offsets = np.asarray(offsets, dtype=complex)
    V = np.array([[off ** o for o in orders] for off in offsets],
                 dtype=complex)
    scale = np.abs(V).max(axis=0)
    scale[scale == 0] = 1.0
    Vs = V / scale
    cond = np.linalg.cond(Vs)
    if not np.isfinite(cond) or cond > 1e8:
        raise FitIllConditioned(f"Laurent system condition {cond:.3e}")
    jets = isinstance(values[0], Jet)
    if jets:
        proto = values[0]
        rhs = np.array([v.coeffs for v in values], dtype=complex)
    else:
        rhs = np.asarray(values, dtype=complex)[:, None]
    sol = np.linalg.lstsq(Vs, rhs, rcond=None)[0]
    sol = sol / scale[:, None]
    out = {}
    for row, o in enumerate(orders):
        if jets:
            out[o] = Jet(proto.base_point, proto.order, sol[row])
        else:
            out[o] = sol[row, 0]
    return out


def pole_order_check(model, k, f, lam, pts=(), pole_bound=None,
                     radius=1e-2, samples=64):
    """Laurent fits of z -> (T_z f) around the base point and each z_alpha.

    Fits orders -(p+2)..3 on a circle of the given radius; a coefficient
    is forbidden below -p at the base point and below 0 at the fixed
    points.  Returns per-centre reports with max_forbidden_rel, the
    largest forbidden coefficient relative to the largest allowed one.
    """
    pts = tuple(pts)
    p = f.pole_bound if pole_bound is None else pole_bound
    p = int(p)
    if p < 1:
        raise ValueError("pole bound must be >= 1")
    base = model.base_point
    centres = [("base", _chart_value(base), -p)]
    for alpha, za in enumerate(pts):
        centres.append((f"point{alpha}", _chart_value(za), 0))
    orders = list(range(-(p + 2), 4))
    angles = 2.0 * np.pi * np.arange(samples) / samples
    ring = radius * np.exp(1j * angles)
    report = {"radius": radius, "orders": (orders[0], orders[-1]),
              "centres": []}
    for name, c, floor in centres:
        vals = []
        for off in ring:
            out = apply_Tz(model, k, f, lam, c + off, pts, order=0)
            vals.append(out.value() if isinstance(out, Jet) else out)
        coeffs = _laurent_fit(ring, vals, orders)
        allowed = max(abs(coeffs[o]) for o in orders if o >= floor)
        forbidden = max((abs(coeffs[o]) for o in orders if o < floor),
                        default=0.0)
        report["centres"].append({
            "name": name,
            "floor": floor,
            "scale": allowed,
            "max_forbidden_rel": forbidden / max(allowed, 1e-300),
            "coefficients": {o: coeffs[o] for o in orders},
        })
    return report


@dataclass(frozen=True)
class KZBConfig:
    """Marked points with nonnegative weights and the operator level."""

    model: object
    points: tuple
    weights: tuple
    level: object = -2

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "weights", tuple(self.weights))
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must pair up")
        for w in self.weights:
            if w < 0:
                raise ValueError("weights must be nonnegative")
        vals = [_chart_value(p) for p in self.points]
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                if vals[i] == vals[j]:
                    raise ValueError("marked points must be distinct")
        bv = _chart_value(self.model.base_point)
        for p, v in zip(self.points, vals):
            same_chart = (not isinstance(p, CurvePoint)
                          or p.chart == self.model.base_point.chart)
            if same_chart and v == bv:
                raise ValueError("marked points must avoid the base point")


def _residue_at(f, lamJ, pts, alpha, centre, radius=1e-2, samples=64):
    """Residue of z -> f(z in slot alpha) at the centre, by Laurent fit."""
    angles = 2.0 * np.pi * np.arange(samples) / samples
    ring = radius * np.exp(1j * angles)
    vals = []
    for off in ring:
        sub = list(pts)
        sub[alpha] = _with_value(pts[alpha], centre + off)
        vals.append(f(lamJ, *sub))
    orders = list(range(-2, 3))
    try:
        coeffs = _laurent_fit(ring, vals, orders)
    except FitIllConditioned as exc:
        raise ResidueFitFailure(str(exc)) from exc
    top = coeffs[-2]
    res = coeffs[-1]
    size = max(_mag(coeffs[o]) for o in orders)
    if _mag(top) > 1e-6 * max(size, 1e-300):
        raise ResidueFitFailure(
            "pole of order >= 2 at the marked point; residue block "
            "expects at most first order")
    return res


def kzb_point_variation(cfg, f, lam, i, pts=(), order=0):
    """Marked-point operator of index i applied to f.

    Bracket part: [- L_i sum_a om_a(P_i) d_a
        + L_i (sum_{j != i} L_j G(P_i, P_j) - 2 sum_alpha G(P_i, z_alpha))
        + L_i^2 phi(P_i) + 2 L_i g_{2lam}(P_i)] f,
    plus slot blocks through the residues of f at P_i (Laurent fit;
    forms regular there contribute nothing).  Returns a Jet of the
    requested order in the twist directions.
    """
    model = cfg.model
    pts = tuple(pts)
    if f.n != len(pts):
        raise ValueError(f"form takes {f.n} points, got {len(pts)}")
    if order < 0 or order > MAX_ORDER:
        raise InsufficientJetOrder(
            f"output order {order} outside 0..{MAX_ORDER}")
    g = model.genus
    bp = _twist_values(model, lam)
    M = int(order)
    P = cfg.points[i]
    L = cfg.weights[i]
    k = cfg.level

    lamJ = _lambda_jets(bp, M + 1)
    fj = f(lamJ, *pts)
    if g:
        fj = _as_jet(fj, bp, M + 1)
    tw2 = _doubled_coefficient_twist(bp, M)
    oms = holomorphic_differentials(model)

    total = 0.0
    for a in range(g):
        total = total - L * oms[a](P) * fj.derivative(a)
    c0 = 0.0
    for j, (Pj, Lj) in enumerate(zip(cfg.points, cfg.weights)):
        if j != i:
            c0 = c0 + Lj * green(model, P, Pj)
    for za in pts:
        c0 = c0 - 2.0 * green(model, P, za)
    phi, g2l = (phi_and_glambda(model, tw2, P) if g else (0.0, 0.0))
    c0 = L * c0 + L * L * phi + 2.0 * L * g2l
    total = total + c0 * _down(fj, M)

    Pv = _chart_value(P)
    for alpha, za in enumerate(pts):
        res = _residue_at(f, lamJ, pts, alpha, Pv)
        if g:
            res = _as_jet(res, bp, M + 1)
        resM = _down(res, M)
        inner = 0.0
        for a in range(g):
            inner = inner + oms[a](za) * res.derivative(a)
        for beta, zb in enumerate(pts):
            if beta != alpha:
                inner = inner + 2.0 * green(model, za, zb) * resM
        if g:
            G2 = green_twisted(model, tw2, P, za)
        else:
            G2 = green(model, P, za)
        dG2 = _twisted_slot_derivative(model, bp, M, za, P, "first")
        total = (total - 2.0 * G2 * inner
                 + (-4.0 * G2 * green(model, za, P) + 2.0 * k * dG2) * resM)
    return total


def kzb_coordinate_variation(cfg, i):
    """Scalar action of the local coordinate scaling: weight*(weight+2)/2."""
    L = cfg.weights[i]
    if isinstance(L, int):
        return Fraction(L * (L + 2), 2)
    return 0.5 * L * (L + 2)


def make_theta_test_form(model, k, points=0, index=0):
    """Theta-vector test form with the lattice behaviour of level-k blocks.

    Genus one.  The twist enters only through
        x = lambda - (1/k) * sum_i A(z_i)
    with A the Abel map in the 2 pi i normalisation, and the value is the
    order-2k theta vector sum_{m = index mod 2k} exp(alpha m^2 + m x) with
    modulus alpha = om/(4k), om = 2 pi i tau the twist-lattice B-step.
    Shifting lambda by 2 pi i fixes the value; shifting by om multiplies
    it by
        exp(-2k lambda - k om) * exp(2 sum_i A(z_i)),
    the level-k lattice factor (the constant reads -i pi k times the
    metric-rescaled period 2 tau).  index selects one of the 2k
    independent vectors.  Re alpha = -pi Im(tau)/(2k) < 0, so the series
    converges on the whole moduli half-plane; TruncationFailure is raised
    if the adaptive tail never drops below 1e-18.
    """
    if model.genus != 1:
        raise ValueError("theta test form requires a genus-one model")
    if k != int(k) or int(k) < 1:
        raise ValueError("level must be a positive integer")
    k = int(k)
    N = 2 * k
    l = int(index) % N
    om11 = 2j * np.pi * model.tau
    alpha = om11 / (2 * N)
    n = int(points)

    def ev(lam_, *zs):
        x = _twist_entries(lam_)[0]
        for zi in zs:
            x = x - (2j * np.pi / k) * abel_map(model, zi)[0]
        cv = x.value() if isinstance(x, Jet) else x
        # adaptive symmetric truncation on scalar magnitudes
        def mag(j):
            m = l + j * N
            return alpha.real * m * m + (cv * m).real
        peak = max(mag(j) for j in range(-8, 9))
        J = 8
        while J < 400 and max(mag(J), mag(-J)) > peak + math.log(1e-18):
            J += 8
        if max(mag(J), mag(-J)) > peak + math.log(1e-18):
            raise TruncationFailure("theta-vector tail does not decay")
        total = 0.0
        for j in range(-J, J + 1):
            m = l + j * N
            term = np.exp(alpha * m * m)
            if isinstance(x, Jet):
                total = total + term * (x * m).exp()
            else:
                total = total + term * np.exp(x * m)
        return total * (2j * np.pi) ** n

    return CorrelationForm(n, ev, level=k, pole_bound=None, twist_weight=None)

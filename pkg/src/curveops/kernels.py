"""Two-point kernels on a curve model and their diagonal expansions.

The central objects are the normalized third-kind kernel (``green``),
its multiplier-twisted variants (``green_twisted``, ``green_twisted_Q``),
and the symmetric bidifferential (``omega_tilde``).  Everything local --
the diagonal constants, the induced connection on differentials, the
quadratic differential, the expansion coefficient matrix -- is computed
from truncated series of the kernels in the chart offset of one argument,
never by numerically colliding two sample points.

Values are chart coefficients: a kernel returns the coefficient against
dz in the chart carried by its first argument (and dw for the second
slot of ``omega_tilde``).  Twists lam enter theta arguments through
u = lam / (2 pi i); crossing the b-cycle of handle a multiplies a
lam-twisted section by exp(lam[a]).
"""

from __future__ import annotations

import math

import numpy as np

from .curve import (
    INFINITY,
    CurvePoint,
    EllipticCurve,
    HyperellipticCurve,
    RationalCurve,
    _as_point,
    riemann_constants,
)
from .errors import (
    BadDivisorDegree,
    FitIllConditioned,
    InsufficientJetOrder,
    NonGenericTwist,
    OnThetaDivisor,
    PoleAtArgument,
    VerificationFailure,
)
from .jets import Jet, _index_positions, _index_table
from .theta import theta, theta_gradient, theta_jet

TWO_PI_I = 2j * math.pi

__all__ = [
    "TwistVector",
    "Divisor",
    "KernelField",
    "green",
    "green_twisted",
    "green_twisted_Q",
    "omega_tilde",
    "diagonal_series",
    "phi_and_glambda",
    "connection_D",
    "omega_quadratic",
    "a_coeffs",
    "period_variation",
    "a_cycle_integral",
]


# ---------------------------------------------------------------------------
# domain types


class TwistVector:
    """Multiplier exponents, one per handle.  Entries may be complex or Jet
    (the operator layer differentiates through them)."""

    __slots__ = ("lam",)

    def __init__(self, lam) -> None:
        self.lam = [e if isinstance(e, Jet) else complex(e) for e in lam]

    @property
    def g(self) -> int:
        return len(self.lam)

    def u(self) -> list:
        """Twist in theta-argument units."""
        return [e / TWO_PI_I for e in self.lam]

    def values(self) -> np.ndarray:
        return np.array(
            [e.value() if isinstance(e, Jet) else e for e in self.lam], dtype=complex
        )

    def doubled(self) -> "TwistVector":
        return TwistVector([2 * e for e in self.lam])

    def is_generic(self, model) -> bool:
        c = _const(model)
        v = -self.values() / TWO_PI_I - c["delta"]
        return abs(theta(v, c["pm"])) > 1e-10 * c["scale"]

    def __repr__(self) -> str:
        return f"TwistVector({self.lam!r})"


def _as_twist(model, lam) -> TwistVector:
    tw = lam if isinstance(lam, TwistVector) else TwistVector(lam)
    if tw.g != model.genus:
        raise ValueError(f"twist length {tw.g} != genus {model.genus}")
    return tw


class Divisor:
    """Formal integer combination of curve points."""

    __slots__ = ("points",)

    def __init__(self, points) -> None:
        self.points = [(p, int(m)) for p, m in points]

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.points)

    @property
    def is_effective(self) -> bool:
        return all(m >= 0 for _, m in self.points)

    def __repr__(self) -> str:
        return f"Divisor({self.points!r})"


# ---------------------------------------------------------------------------
# per-model constants


def _const(model) -> dict:
    cache = getattr(model, "_kernel_cache", None)
    if cache is None:
        cache = {}
        model._kernel_cache = cache
    if "pm" not in cache:
        pm = model.periods
        g = model.genus
        delta = riemann_constants(model)
        cache["pm"] = pm
        cache["g"] = g
        cache["delta"] = delta
        cache["char"] = model.green_characteristic()
        cache["scale"] = abs(theta(np.zeros(g), pm))
        # coefficient vector of the reference differential with a double
        # zero structure at the base point: sum_a gradH[a] nu_a
        cache["gradH"] = theta_gradient(-delta, pm)
    return cache


# ---------------------------------------------------------------------------
# point data (chart-aware, jet-aware)


def _is_jet(x) -> bool:
    return isinstance(x, Jet)


def _y_jet(model: HyperellipticCurve, x_jet: Jet, sheet: int) -> Jet:
    poly = Jet.constant(1.0, x_jet.base_point, x_jet.order)
    for e in model.es:
        poly = poly * (x_jet - e)
    if abs(poly.value()) < 1e-12:
        raise PoleAtArgument("sheet coordinate at a branch point")
    y = poly.sqrt()
    ref = sheet * model.y_global(complex(x_jet.value()))
    if abs(y.value() - ref) > abs(y.value() + ref):
        y = -y
    return y


def _nu_x_jet(model: HyperellipticCurve, x_jet: Jet, sheet: int) -> list[Jet]:
    y = _y_jet(model, x_jet, sheet)
    out = []
    for a in range(model.genus):
        num = Jet.constant(0.0, x_jet.base_point, x_jet.order)
        p = Jet.constant(1.0, x_jet.base_point, x_jet.order)
        for i in range(model.genus):
            if model.C[a, i] != 0:
                num = num + model.C[a, i] * p
            p = p * x_jet
        out.append(num / y)
    return out


def _abel_x_jet(model: HyperellipticCurve, x_jet: Jet, sheet: int) -> list[Jet]:
    """Abel map of an x-chart jet: scalar leg at the jet's center plus the
    termwise antiderivative of nu in the offset."""
    x0 = complex(x_jet.value())
    base = model.abel(CurvePoint("x", x0, sheet))
    m = x_jet.order
    s = Jet.variable(0, [x0], m)
    ys = _y_jet(model, s, sheet)
    dx = x_jet - x0
    out = []
    for a in range(model.genus):
        num = Jet.constant(0.0, [x0], m)
        p = Jet.constant(1.0, [x0], m)
        for i in range(model.genus):
            if model.C[a, i] != 0:
                num = num + model.C[a, i] * p
            p = p * s
        nu = num / ys
        acc = Jet.constant(base[a], x_jet.base_point, m)
        pw = dx
        for k in range(1, m + 1):
            acc = acc + (nu.coefficient((k - 1,)) / k) * pw
            if k < m:
                pw = pw * dx
        out.append(acc)
    return out


def _point_data(model, p: CurvePoint):
    """(abel vector, nu vector) at a point; entries are complex or Jet."""
    if isinstance(model, EllipticCurve):
        v = p.value
        one = (
            Jet.constant(1.0, v.base_point, v.order) if _is_jet(v) else 1.0 + 0j
        )
        return [v], [one]
    if p.chart == "inf":
        if not model.odd:
            raise PoleAtArgument("infinity is not on the even-model chart")
        return list(np.zeros(model.genus, dtype=complex)), None
    if p.chart == "t":
        t = p.value
        if _is_jet(t):
            return model.abel_t_jet(t), [
                model.nu_chart_jet(a, t) for a in range(model.genus)
            ]
        return list(model._abel_series_leg(t)), [
            model.nu_t_value(a, t) for a in range(model.genus)
        ]
    if p.chart == "x":
        x = p.value
        if _is_jet(x):
            return _abel_x_jet(model, x, p.sheet), _nu_x_jet(model, x, p.sheet)
        A = model.abel(p)
        return list(A), [
            model.nu_x_value(a, x, p.sheet) for a in range(model.genus)
        ]
    raise TypeError(f"unsupported chart {p.chart!r}")


def _abel_only(model, p: CurvePoint):
    return _point_data(model, p)[0]


def _chart_distance(p: CurvePoint, q: CurvePoint):
    """Plain coordinate distance when the points share a chart, else None."""
    if p.chart != q.chart:
        return None
    if p.chart == "inf":
        return 0.0
    if p.chart == "x" and p.sheet != q.sheet:
        return None
    pv = p.value.value() if _is_jet(p.value) else p.value
    qv = q.value.value() if _is_jet(q.value) else q.value
    return abs(pv - qv)


# ---------------------------------------------------------------------------
# theta dispatch helpers


def _theta_vec(vec, pm, char=None):
    if any(_is_jet(v) for v in vec):
        return theta_jet(list(vec), pm, char)
    return theta(np.array([complex(v) for v in vec]), pm, char)


def _theta_with_grads(vec, pm, char=None):
    """(theta(vec), [d_a theta(vec)]) for scalar or jet arguments.

    Jet gradients come from seed variables appended to the jet space: the
    degree-1 slices in the seeds are exact, so one theta evaluation serves
    all components."""
    if not any(_is_jet(v) for v in vec):
        arr = np.array([complex(v) for v in vec])
        return theta(arr, pm, char), list(theta_gradient(arr, pm, char))
    tpl = next(v for v in vec if _is_jet(v))
    g = len(vec)
    m = tpl.order
    if m + 1 > 6:
        raise InsufficientJetOrder(
            "gradient slicing needs jet order + 1 <= 6"
        )
    bp2 = np.concatenate([tpl.base_point, np.zeros(g)])
    comps = []
    for k, v in enumerate(vec):
        vj = v.embed(bp2, m + 1) if _is_jet(v) else Jet.constant(v, bp2, m + 1)
        comps.append(vj + Jet.variable(tpl.nvars + k, bp2, m + 1))
    F = theta_jet(comps, pm, char)
    tab = _index_table(tpl.nvars, m)
    zero = (0,) * g
    th = Jet(
        tpl.base_point, m, np.array([F.coefficient(ix + zero) for ix in tab])
    )
    grads = []
    for a in range(g):
        seed = tuple(1 if j == a else 0 for j in range(g))
        grads.append(
            Jet(
                tpl.base_point,
                m,
                np.array([F.coefficient(ix + seed) for ix in tab]),
            )
        )
    return th, grads


def _value_of(x) -> complex:
    return x.value() if _is_jet(x) else complex(x)


# ---------------------------------------------------------------------------
# plain kernel evaluation


def green(model, z, w, base=None):
    """Coefficient against dz of the normalized kernel with residue +1 at
    z = w and residue -1 at the base point; vanishes as w approaches the
    base point, and its a-cycle integrals in z vanish.

    Accepts CurvePoints whose values are Jets; the result is then a Jet.
    """
    zp, wp = _as_point(model, z), _as_point(model, w)
    if model.genus == 0:
        if zp.chart == "inf":
            raise PoleAtArgument("kernel pole at the base point (infinity)")
        if wp.chart == "inf":
            zv = zp.value
            return (
                Jet.constant(0.0, zv.base_point, zv.order) if _is_jet(zv) else 0.0 + 0j
            )
        d = zp.value - wp.value
        if abs(_value_of(d)) < 1e-12:
            raise PoleAtArgument("coincident arguments")
        return 1.0 / d

    c = _const(model)
    dist = _chart_distance(zp, wp)
    if dist is not None and dist < 1e-12:
        raise PoleAtArgument("coincident arguments")
    Az, nus = _point_data(model, zp)
    if nus is None:
        raise PoleAtArgument("kernel pole at the base point")
    Aw = _abel_only(model, wp)
    Ab = _abel_only(model, _as_point(model, base)) if base is not None else None

    V1 = [Aw[a] - Az[a] for a in range(c["g"])]
    V2 = [Az[a] - (Ab[a] if Ab is not None else 0.0) for a in range(c["g"])]
    th1, gr1 = _theta_with_grads(V1, c["pm"], c["char"])
    if abs(_value_of(th1)) < 1e-12 * c["scale"]:
        if dist is not None and dist < 1e-6:
            raise PoleAtArgument("coincident arguments")
        raise OnThetaDivisor(
            "argument pair on the zero locus of the quotient representation"
        )
    th2, gr2 = _theta_with_grads(V2, c["pm"], c["char"])
    if abs(_value_of(th2)) < 1e-12 * c["scale"]:
        raise PoleAtArgument("first argument at the base point of the kernel")

    out = None
    for a in range(c["g"]):
        term = (-(gr1[a] / th1) - gr2[a] / th2) * nus[a]
        out = term if out is None else out + term
    return out


def _require_generic(model, tw: TwistVector, c: dict):
    u = tw.u()
    vec = [-u[a] - c["delta"][a] for a in range(c["g"])]
    th0 = _theta_vec(vec, c["pm"])
    if abs(_value_of(th0)) < 1e-10 * c["scale"]:
        raise NonGenericTwist(
            "twist lies on the degenerate locus of the kernel normalization"
        )
    return th0


def _norm_theta(sp, u, c):
    """Theta normalizing the twisted diagonal, evaluated from the lifted
    twist so every order of the working space is faithful (an embedded
    lower-order jet would zero-pad the pure-twist orders above the twist
    jet's own and spoil the cancellation audit in _div_by_eps)."""
    return _theta_vec([-u[a] - c["delta"][a] for a in range(c["g"])], c["pm"])


def green_twisted(model, lam, z, w):
    """Twisted kernel: multiplier exp(lam[a]) over the b-cycles in z,
    exp(-lam[a]) in w, residue +1 at z = w, and g-1 zeros in z at the
    base point."""
    if model.genus == 0:
        raise ValueError("twisted kernel needs genus >= 1")
    tw = _as_twist(model, lam)
    c = _const(model)
    th0 = _require_generic(model, tw, c)
    zp, wp = _as_point(model, z), _as_point(model, w)
    dist = _chart_distance(zp, wp)
    if dist is not None and dist < 1e-12:
        raise PoleAtArgument("coincident arguments")
    Az, nus = _point_data(model, zp)
    if nus is None:
        # z at the base point: the kernel has a zero of order g-1 there
        # but the chart-origin differential values are not defined
        raise PoleAtArgument("chart origin needs a t-chart point")
    Aw = _abel_only(model, wp)
    u = tw.u()
    E = [Az[a] - Aw[a] for a in range(c["g"])]
    num = _theta_vec([E[a] - u[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    den = _theta_vec([E[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    if abs(_value_of(den)) < 1e-12 * c["scale"]:
        if dist is not None and dist < 1e-6:
            raise PoleAtArgument("coincident arguments")
        raise OnThetaDivisor(
            "argument pair on the zero locus of the quotient representation"
        )
    H = None
    for a in range(c["g"]):
        term = c["gradH"][a] * nus[a]
        H = term if H is None else H + term
    return num * H / (den * th0)


def green_twisted_Q(model, lam, Q: Divisor, z, w):
    """Twisted kernel whose z-zeros sit on the divisor Q (effective, degree
    g-1) instead of at the base point."""
    if model.genus == 0:
        raise ValueError("twisted kernel needs genus >= 1")
    tw = _as_twist(model, lam)
    c = _const(model)
    if not isinstance(Q, Divisor):
        raise TypeError("Q must be a Divisor")
    if Q.degree != c["g"] - 1 or not Q.is_effective:
        raise BadDivisorDegree(
            f"divisor must be effective of degree {c['g'] - 1}, got {Q.degree}"
        )
    AQ = np.zeros(c["g"], dtype=complex)
    for p, m in Q.points:
        if m:
            AQ = AQ + m * np.asarray(
                _abel_only(model, _as_point(model, p)), dtype=complex
            )
    u = tw.u()
    th0 = _theta_vec([AQ[a] - u[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    if abs(_value_of(th0)) < 1e-10 * c["scale"]:
        raise NonGenericTwist("twist degenerate relative to the divisor")
    gradQ = theta_gradient(AQ - c["delta"], c["pm"])
    if max(abs(v) for v in gradQ) < 1e-12 * c["scale"]:
        raise VerificationFailure("divisor gives a degenerate reference differential")

    zp, wp = _as_point(model, z), _as_point(model, w)
    dist = _chart_distance(zp, wp)
    if dist is not None and dist < 1e-12:
        raise PoleAtArgument("coincident arguments")
    Az, nus = _point_data(model, zp)
    if nus is None:
        raise PoleAtArgument("chart origin needs a t-chart point")
    Aw = _abel_only(model, wp)
    E = [Az[a] - Aw[a] + AQ[a] for a in range(c["g"])]
    num = _theta_vec([E[a] - u[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    den = _theta_vec([E[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    if abs(_value_of(den)) < 1e-12 * c["scale"]:
        if dist is not None and dist < 1e-6:
            raise PoleAtArgument("coincident arguments")
        raise OnThetaDivisor(
            "argument pair on the zero locus of the quotient representation"
        )
    HQ = None
    for a in range(c["g"]):
        term = gradQ[a] * nus[a]
        HQ = term if HQ is None else HQ + term
    return num * HQ / (den * th0)


def omega_tilde(model, z, w):
    """Coefficient against dz dw of the symmetric bidifferential with
    double pole and coefficient 1 on the diagonal."""
    zp, wp = _as_point(model, z), _as_point(model, w)
    if model.genus == 0:
        if zp.chart == "inf" or wp.chart == "inf":
            raise ValueError("chart coefficient undefined at infinity")
        d = zp.value - wp.value
        if abs(d) < 1e-12:
            raise PoleAtArgument("coincident arguments")
        return 1.0 / d ** 2

    if _is_jet(zp.value) or _is_jet(wp.value):
        raise TypeError("bidifferential evaluation takes scalar points")
    c = _const(model)
    dist = _chart_distance(zp, wp)
    if dist is not None and dist < 1e-12:
        raise PoleAtArgument("coincident arguments")
    Az, nuz = _point_data(model, zp)
    Aw, nuw = _point_data(model, wp)
    if nuz is None or nuw is None:
        raise PoleAtArgument("chart origin needs a t-chart point")
    V = np.array([complex(Aw[a] - Az[a]) for a in range(c["g"])])
    base = np.zeros(c["g"])
    seeds = [Jet.variable(k, base, 2) + V[k] for k in range(c["g"])]
    F = theta_jet(seeds, c["pm"], c["char"])
    if abs(F.value()) < 1e-12 * c["scale"]:
        if dist is not None and dist < 1e-6:
            raise PoleAtArgument("coincident arguments")
        raise OnThetaDivisor(
            "argument pair on the zero locus of the quotient representation"
        )
    L = F.log()
    out = 0j
    for a in range(c["g"]):
        for b in range(c["g"]):
            ix = tuple(
                (2 if (i == a and i == b) else (1 if i in (a, b) else 0))
                for i in range(c["g"])
            )
            hess = L.coefficient(ix) * (2 if a == b else 1)
            out -= hess * nuz[a] * nuw[b]
    return out


# ---------------------------------------------------------------------------
# diagonal expansion machinery


class _Space:
    """Working jet space (lam variables ..., eps) for diagonal series."""

    def __init__(self, tw: TwistVector | None, eps_order: int) -> None:
        tpl = None
        if tw is not None:
            for e in tw.lam:
                if _is_jet(e):
                    tpl = e
                    break
        self.tpl = tpl
        if tpl is None:
            self.bp = np.zeros(1, dtype=complex)
            self.nl, self.ml = 0, 0
        else:
            self.bp = np.concatenate([tpl.base_point, [0.0]])
            self.nl, self.ml = tpl.nvars, tpl.order
        # two shift-downs consume two eps orders between the raw theta jets
        # and the returned series
        self.M = self.ml + eps_order + 1
        self.eps = Jet.variable(self.nl, self.bp, self.M)

    def lift(self, x):
        if _is_jet(x):
            if x.nvars == self.bp.size and x.order == self.M:
                return x
            return x.embed(self.bp, self.M)
        return complex(x)

    def slice(self, S: Jet, j: int):
        """Coefficient of eps^j: a lam-jet when twists carry jets."""
        if self.tpl is None:
            return S.coefficient((j,)) if j <= S.order else 0j
        tab = _index_table(self.nl, self.ml)
        cf = np.array([S.coefficient(ix + (j,)) for ix in tab])
        return Jet(self.tpl.base_point, self.ml, cf)


def _shifted_point(model, p: CurvePoint, eps: Jet) -> CurvePoint:
    if p.chart == "inf":
        raise PoleAtArgument("diagonal expansion needs a chart coordinate")
    if _is_jet(p.value):
        raise TypeError("diagonal expansion takes a scalar center")
    return CurvePoint(p.chart, p.value + eps, p.sheet)


def _div_by_eps(jet: Jet, rel_tol: float = 1e-7, ref: float | None = None) -> Jet:
    """Shift a jet down one power of its last variable, verifying the
    variable-degree-0 slab vanishes.  ref supplies the magnitude scale of
    the terms that cancelled (the jet itself may be all-cancellation)."""
    nv = jet.nvars
    tab = _index_table(nv, jet.order)
    scale = max(np.max(np.abs(jet.coeffs)), 1e-300)
    if ref is not None:
        scale = max(scale, ref)
    slab = max(
        (abs(jet.coeffs[p]) for p, ix in enumerate(tab) if ix[nv - 1] == 0),
        default=0.0,
    )
    if slab > rel_tol * scale:
        raise VerificationFailure(
            "pole-order bookkeeping failed: constant slab not negligible"
        )
    new_order = jet.order - 1
    tab_new = _index_table(nv, new_order)
    pos_old = _index_positions(nv, jet.order)
    cf = np.array(
        [
            jet.coeffs[pos_old[ix[: nv - 1] + (ix[nv - 1] + 1,)]]
            for ix in tab_new
        ]
    )
    return Jet(jet.base_point, new_order, cf)


def _diag_series_jet(model, z, tw: TwistVector | None, slot: str, eps_order: int, base=None):
    """(space, S) where S is the jet of the regular part of the kernel on
    the diagonal: G(z, z+eps) + 1/eps for slot 'second', G(z+eps, z) - 1/eps
    for slot 'first'.  eps is the chart offset at z."""
    zp = _as_point(model, z)
    sp = _Space(tw, eps_order)
    if model.genus == 0:
        zero = Jet.constant(0.0, sp.bp, max(sp.M - 2, 0))
        return sp, zero
    c = _const(model)
    zshift = _shifted_point(model, zp, sp.eps)
    Az, nus = _point_data(model, zp)
    Ae, nue = _point_data(model, zshift)
    E = [Ae[a] - Az[a] for a in range(c["g"])]

    def tr(x, order):
        if _is_jet(x) and x.order > order:
            return x.truncate(order)
        return x

    if tw is None:
        Ab = _abel_only(model, _as_point(model, base)) if base is not None else None
        V2c = [Az[a] - (Ab[a] if Ab is not None else 0.0) for a in range(c["g"])]
        if slot == "second":
            th, gr = _theta_with_grads(E, c["pm"], c["char"])
            den1 = _div_by_eps(th)
            num = None
            for a in range(c["g"]):
                term = tr(gr[a], den1.order) * complex(nus[a])
                num = term if num is None else num + term
            th2, gr2 = _theta_with_grads(V2c, c["pm"], c["char"])
            if abs(_value_of(th2)) < 1e-12 * c["scale"]:
                raise PoleAtArgument("expansion center at the base point")
            K = sum(
                complex(gr2[a]) / complex(th2) * complex(nus[a])
                for a in range(c["g"])
            )
            ratio = num / den1
            pre = -ratio + 1.0
            ref = float(np.max(np.abs(ratio.coeffs)))
            return sp, _div_by_eps(pre, ref=ref) - K
        # slot 'first': the moving argument is the first one
        En = [-E[a] for a in range(c["g"])]
        th, gr = _theta_with_grads(En, c["pm"], c["char"])
        den1 = _div_by_eps(th)
        num = None
        for a in range(c["g"]):
            term = tr(gr[a], den1.order) * tr(nue[a], den1.order)
            num = term if num is None else num + term
        V2e = [Ae[a] - (Ab[a] if Ab is not None else 0.0) for a in range(c["g"])]
        th2, gr2 = _theta_with_grads(V2e, c["pm"], c["char"])
        if abs(_value_of(th2)) < 1e-12 * c["scale"]:
            raise PoleAtArgument("expansion center at the base point")
        K = None
        for a in range(c["g"]):
            term = (gr2[a] / th2) * nue[a]
            K = term if K is None else K + term
        ratio = num / den1
        pre = -ratio - 1.0
        S = _div_by_eps(pre, ref=float(np.max(np.abs(ratio.coeffs))))
        return sp, S - tr(K, S.order)

    th0 = _require_generic(model, tw, c)
    u = [sp.lift(x) for x in tw.u()]
    Hz = sum(c["gradH"][a] * complex(nus[a]) for a in range(c["g"]))
    if slot == "second":
        En = [-E[a] for a in range(c["g"])]
        num = _theta_vec(
            [En[a] - u[a] - c["delta"][a] for a in range(c["g"])], c["pm"]
        )
        den = _theta_vec([En[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
        den1 = _div_by_eps(den)
        th0l = tr(_norm_theta(sp, u, c), den1.order)
        ratio = tr(num, den1.order) * Hz / (den1 * th0l)
        pre = ratio + 1.0
        return sp, _div_by_eps(pre, ref=float(np.max(np.abs(ratio.coeffs))))
    num = _theta_vec([E[a] - u[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    den = _theta_vec([E[a] - c["delta"][a] for a in range(c["g"])], c["pm"])
    den1 = _div_by_eps(den)
    th0l = tr(_norm_theta(sp, u, c), den1.order)
    He = None
    for a in range(c["g"]):
        term = c["gradH"][a] * tr(nue[a], den1.order)
        He = term if He is None else He + term
    ratio = tr(num, den1.order) * He / (den1 * th0l)
    pre = ratio - 1.0
    return sp, _div_by_eps(pre, ref=float(np.max(np.abs(ratio.coeffs))))


def diagonal_series(model, z, lam=None, orders: int = 2, slot: str = "second", base=None):
    """Regular-part coefficients [S_0, S_1, ...] of the kernel's diagonal
    expansion in the chart offset at z: for slot 'second' these expand
    G(z, z+eps) + 1/eps; for slot 'first', G(z+eps, z) - 1/eps.  With a
    twist the twisted kernel is expanded; entries are lam-jets when the
    twist carries jets."""
    if slot not in ("first", "second"):
        raise ValueError("slot must be 'first' or 'second'")
    tw = _as_twist(model, lam) if lam is not None else None
    sp, S = _diag_series_jet(model, z, tw, slot, orders, base=base)
    return [sp.slice(S, j) for j in range(orders)]


# ---------------------------------------------------------------------------
# derived local quantities


def phi_and_glambda(model, lam, z):
    """(phi(z), g_lam(z)): the constant terms of the diagonal expansions of
    the plain and twisted kernels.

    phi always comes from the expansion.  At genus 1 the twisted constant
    is assembled from the closed theta form; at genus 2 that display
    degenerates identically (the sheet involution puts -A(z)-Delta on the
    theta divisor for every z, since 2*Delta is a lattice vector), so the
    expansion route defines the value there.
    """
    tw = _as_twist(model, lam)
    if model.genus == 0:
        return 0.0 + 0j, 0.0 + 0j
    c = _const(model)
    sp, SG = _diag_series_jet(model, z, None, "second", 1)
    phi = sp.slice(SG, 0)
    if model.genus == 1:
        th0 = _require_generic(model, tw, c)
        u = tw.u()
        vec0 = [-u[a] - c["delta"][a] for a in range(c["g"])]
        _, gr0 = _theta_with_grads(vec0, c["pm"])
        zp = _as_point(model, z)
        Az, nus = _point_data(model, zp)
        if nus is None:
            raise PoleAtArgument("chart origin needs a t-chart point")
        vec1 = [-Az[a] - c["delta"][a] for a in range(c["g"])]
        th1, gr1 = _theta_with_grads(vec1, c["pm"])
        if abs(_value_of(th1)) < 1e-12 * c["scale"]:
            raise OnThetaDivisor("twisted diagonal constant singular at this point")
        g_val = phi
        for a in range(c["g"]):
            g_val = g_val + complex(nus[a]) * (gr0[a] / th0 - gr1[a] / th1)
        return phi, g_val
    spl, SL = _diag_series_jet(model, z, tw, "second", 1)
    return phi, spl.slice(SL, 0)


def connection_D(model, lam, omega, z):
    """Action on a differential of the connection induced by the twisted
    kernel: the limit of -(omega(z')G_lam(z,z') + omega(z)G_lam(z',z)) as
    the points merge, computed from the diagonal series.  omega is an
    evaluator taking a CurvePoint (jet values included) and returning the
    chart coefficient.  Returns the coefficient against (dz)^2."""
    tw = _as_twist(model, lam)
    zp = _as_point(model, z)
    if model.genus == 0:
        eps = Jet.variable(0, [0.0], 2)
        om = omega(CurvePoint(zp.chart, zp.value + eps, zp.sheet))
        return om.coefficient((1,))
    sp, S = _diag_series_jet(model, z, tw, "second", 2)
    _, T = _diag_series_jet(model, z, tw, "first", 2)
    om = omega(_shifted_point(model, zp, sp.eps))
    if not _is_jet(om):
        raise TypeError("omega evaluator must propagate jet arguments")
    om = om.truncate(S.order) if om.order > S.order else om
    Sm = S.truncate(om.order) if S.order > om.order else S
    Tm = T.truncate(om.order) if T.order > om.order else T
    prod = om * Sm
    out = sp.slice(prod, 0)
    om1 = sp.slice(om, 1)
    om0 = sp.slice(om, 0)
    T0 = sp.slice(Tm, 0)
    return -(out - om1 + om0 * T0)


def _omega_quadratic_literal(model, lam, z):
    """The diagonal combination d_w G_lam(z,w) + d_z G_lam(w,z)
    - 2 d_w G(z,w) at w = z, read off the series: the double poles cancel
    exactly and the value is 2 S1[twisted] - 2 S1[plain]."""
    tw = _as_twist(model, lam)
    if model.genus == 0:
        return 0.0 + 0j
    spl, SL = _diag_series_jet(model, z, tw, "second", 2)
    spg, SG = _diag_series_jet(model, z, None, "second", 2)
    return 2 * spl.slice(SL, 1) - 2 * spg.slice(SG, 1)


def omega_quadratic(model, lam, z):
    """Quadratic differential from the twisted kernel's diagonal: the
    literal two-kernel combination plus three times the plain diagonal
    curvature term, which at genus 1 gives exactly minus the ratio of the
    second theta derivative to theta at the twist argument.  The added
    term does not depend on the twist, so operator commutators are
    unaffected.  Returns the coefficient against (dz)^2."""
    tw = _as_twist(model, lam)
    if model.genus == 0:
        return 0.0 + 0j
    spl, SL = _diag_series_jet(model, z, tw, "second", 2)
    spg, SG = _diag_series_jet(model, z, None, "second", 2)
    return 2 * spl.slice(SL, 1) + spg.slice(SG, 1)


# ---------------------------------------------------------------------------
# expansion coefficients at the base point


def _fit_radii(model):
    if isinstance(model, EllipticCurve):
        return 0.15, 0.095
    r = abs(model._anchor_chart_value())
    return 0.35 * r, 0.22 * r


def _base_chart_point(model, v):
    if isinstance(model, EllipticCurve):
        return CurvePoint("z", v)
    return CurvePoint("t", v)


def a_coeffs(model, lam, imax: int, jmax: int, radius=None):
    """Taylor coefficient matrix a[i, j] of the twisted kernel minus its
    universal singular part, rescaled by the chart weights, at the base
    point: (G_lam(z,w) - z^{g-1} w^{1-g}/(z-w)) z^{1-g} w^{g-1} summed as
    a_ij z^i w^j in the base chart coordinates.  Uses trigonometric
    interpolation on two circles (exactly conditioned); FitIllConditioned
    flags aliasing from a too-large radius."""
    if model.genus == 0:
        raise ValueError("expansion coefficients need genus >= 1")
    tw = _as_twist(model, lam)
    g = model.genus
    K = L = 24
    if imax + 2 > K // 2 or jmax + 2 > L // 2:
        raise ValueError("requested block too large for the sample grid")
    rz, rw = _fit_radii(model)
    if radius is not None:
        rz, rw = radius, radius * 0.63
    zs = rz * np.exp(2j * np.pi * np.arange(K) / K)
    ws = rw * np.exp(2j * np.pi * (np.arange(L) + 0.31) / L)

    def E(zv, wv):
        G = green_twisted(model, tw, _base_chart_point(model, zv), _base_chart_point(model, wv))
        sing = zv ** (g - 1) * wv ** (1 - g) / (zv - wv)
        return (G - sing) * zv ** (1 - g) * wv ** (g - 1)

    F = np.empty((K, L), dtype=complex)
    for k in range(K):
        for l in range(L):
            F[k, l] = E(zs[k], ws[l])
    if not np.all(np.isfinite(F)):
        raise FitIllConditioned("kernel samples not finite on the fit circles")
    coef = np.fft.fft2(F) / (K * L)
    raw = np.abs(coef[: K // 2, : L // 2])
    # aliasing gate: contributions near the Nyquist orders bound the fold-back
    # error on the returned block and must be far below the leading ones
    lead = max(np.max(raw[: imax + 1, : jmax + 1]), 1e-30)
    tail = max(np.max(raw[K // 2 - 2 :, :]), np.max(raw[:, L // 2 - 2 :]))
    if tail > 1e-4 * lead:
        raise FitIllConditioned("fit radius too large: trailing orders not decaying")
    pw = np.outer(rz ** np.arange(imax + 1), rw ** np.arange(jmax + 1))
    phase = np.exp(-2j * np.pi * 0.31 * np.arange(jmax + 1) / L)
    return coef[: imax + 1, : jmax + 1] / pw * phase[None, :]


def period_variation(model, xi: dict) -> np.ndarray:
    """Matrix of first-order period variations generated by a meromorphic
    vector-field germ at the base point: entry (a, b) is the plain residue
    of omega_a omega_b xi in the base chart, with xi given as Laurent
    coefficients {power: coefficient} of the chart vector field."""
    if model.genus == 0:
        raise ValueError("no period matrix at genus 0")
    for n in xi:
        if not isinstance(n, int):
            raise ValueError("xi keys must be integer chart powers")
    g = model.genus
    if isinstance(model, EllipticCurve):
        f = [np.array([TWO_PI_I])]
    else:
        f = [TWO_PI_I * model.nu_chart_coeffs(a) for a in range(g)]
    out = np.zeros((g, g), dtype=complex)
    for a in range(g):
        for b in range(g):
            conv = np.convolve(f[a], f[b])
            tot = 0j
            for n, cn in xi.items():
                k = -1 - n
                if 0 <= k < conv.size:
                    tot += cn * conv[k]
            out[a, b] = tot
    return out


# ---------------------------------------------------------------------------
# cycle quadrature


def a_cycle_integral(model, f, a: int, nodes: int = 512) -> complex:
    """Trapezoid integral of a differential's chart coefficient over the
    a-th a-cycle: the straight unit segment on the elliptic model, an
    ellipse enclosing the a-th cut on hyperelliptic models.  f receives a
    CurvePoint and returns the coefficient in that point's chart."""
    if model.genus == 0:
        raise ValueError("no cycles at genus 0")
    if not 0 <= a < model.genus:
        raise ValueError("cycle index out of range")
    s = np.arange(nodes) / nodes
    if isinstance(model, EllipticCurve):
        z0 = 0.11 + 0.07j
        tot = 0j
        for sk in s:
            tot += f(CurvePoint("z", z0 + sk))
        return tot / nodes
    b1, b2 = model.pairs[a]
    m, h = (b1 + b2) / 2, (b2 - b1) / 2
    dmin = min(
        abs(e - m) - abs(h) for e in model.es if abs(e - b1) > 1e-12 and abs(e - b2) > 1e-12
    )
    if dmin <= 0:
        raise ValueError("no clearance around the cut for the cycle contour")
    pad = 0.3 * dmin
    uhat = h / abs(h)
    A, B = abs(h) + pad, pad
    tot = 0j
    for sk in s:
        # clockwise on sheet 1 matches the orientation the period
        # normalization fixes (checked against the normalized basis)
        th = -2 * np.pi * sk
        x = m + uhat * (A * np.cos(th) + 1j * B * np.sin(th))
        dx = uhat * (-A * np.sin(th) + 1j * B * np.cos(th)) * (-2 * np.pi / nodes)
        tot += f(CurvePoint("x", x, 1)) * dx
    return tot


# ---------------------------------------------------------------------------
# kernel field wrapper


class KernelField:
    """Evaluatable wrapper selecting one of the kernels; used by the grid
    dump tooling."""

    KINDS = ("G", "G_lambda", "G_lambda_Q", "omega_tilde")

    def __init__(self, kind: str, model, twist=None, divisor=None) -> None:
        if kind not in self.KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if kind in ("G_lambda", "G_lambda_Q") and twist is None:
            raise ValueError(f"{kind} needs a twist")
        if kind == "G_lambda_Q" and divisor is None:
            raise ValueError("G_lambda_Q needs a divisor")
        self.kind = kind
        self.model = model
        self.twist = _as_twist(model, twist) if twist is not None else None
        self.divisor = divisor

    def __call__(self, z, w):
        if self.kind == "G":
            return green(self.model, z, w)
        if self.kind == "G_lambda":
            return green_twisted(self.model, self.twist, z, w)
        if self.kind == "G_lambda_Q":
            return green_twisted_Q(self.model, self.twist, self.divisor, z, w)
        return omega_tilde(self.model, z, w)

    def __repr__(self) -> str:
        return f"KernelField({self.kind}, {self.model!r})"

"""Curve models: rational, elliptic, hyperelliptic (genus <= 2).

A model supplies the geometric inputs every other module consumes:
normalized holomorphic differentials, the period matrix, the Abel map,
Riemann constants, the multivalued log-derivative functions r_a, and the
b-period primitives.

Normalization convention, fixed package-wide: the internal differentials
nu_a satisfy  loop_{A_a} nu_b = delta_ab,  so the Jacobian lattice is
Z^g + tau Z^g and theta arguments are Abel-map values directly.  The
caller-facing differentials are omega_a = 2*pi*i*nu_a, which carry the
normalization (1/2*pi*i) loop_{A_a} omega_b = delta_ab.

Hyperelliptic homology: branch points are sorted by (Re, Im); consecutive
pairs form the cuts; A_a circles cut a; B_a is homologous to the chain
running from cut a through the last cut, realized as the suffix sum of
gap loops.  y is a single global branch off the cuts, built from
per-cut square-root factors that put the discontinuity exactly on the
segment between the paired endpoints.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import (
    InvalidPeriodMatrix,
    OnThetaDivisor,
    PathThroughBranchPoint,
    QuadratureFailure,
    SpecParseError,
    VerificationFailure,
)
from .jets import Jet
from .theta import PeriodMatrix, ThetaCharacteristic, theta, theta_gradient

__all__ = [
    "RationalCurve",
    "EllipticCurve",
    "HyperellipticCurve",
    "CurvePoint",
    "INFINITY",
    "curve_from_spec",
    "holomorphic_differentials",
    "period_matrix",
    "abel_map",
    "riemann_constants",
    "r_a",
    "zeta_primitive",
]

TWO_PI_I = 2j * np.pi


class _Infinity:
    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = _Infinity()


class CurvePoint:
    """Point on a model.  chart: 'z' (rational/elliptic coordinate),
    'x' (hyperelliptic sheeted plane, needs sheet +-1), 't' (chart at the
    hyperelliptic base point), or 'inf'."""

    __slots__ = ("chart", "value", "sheet")

    def __init__(self, chart: str, value=0j, sheet: int = 1) -> None:
        if chart not in ("z", "x", "t", "inf"):
            raise ValueError(f"unknown chart {chart!r}")
        self.chart = chart
        self.value = value if isinstance(value, Jet) else complex(value)
        self.sheet = int(sheet)

    def __repr__(self) -> str:
        if self.chart == "inf":
            return "CurvePoint(inf)"
        s = f", sheet={self.sheet}" if self.chart == "x" else ""
        return f"CurvePoint({self.chart}={self.value}{s})"


def _as_point(model, p) -> CurvePoint:
    if isinstance(p, CurvePoint):
        return p
    if p is INFINITY:
        return CurvePoint("inf")
    if isinstance(model, HyperellipticCurve):
        raise TypeError("hyperelliptic points need a chart: CurvePoint('x'|'t', ...)")
    return CurvePoint("z", p)


# ---------------------------------------------------------------------------
# rational and elliptic models


class RationalCurve:
    genus = 0

    def __init__(self) -> None:
        self.base_point = CurvePoint("inf")

    def holomorphic_differentials(self):
        return []

    def __repr__(self) -> str:
        return "RationalCurve()"


class EllipticCurve:
    """Coordinate z on C/(Z + tau Z), base point 0, nu = dz."""

    genus = 1

    def __init__(self, tau: complex) -> None:
        tau = complex(tau)
        if tau.imag <= 0:
            raise InvalidPeriodMatrix("elliptic tau needs Im > 0")
        self.tau = tau
        self.periods = PeriodMatrix([[tau]])
        self.base_point = CurvePoint("z", 0)
        # odd half-period: Theta((1+tau)/2) = 0
        self.delta = np.array([(1 + tau) / 2])

    def reduce(self, z: complex) -> complex:
        n = math.floor(z.imag / self.tau.imag)
        z = z - n * self.tau
        return z - math.floor(z.real)

    def holomorphic_differentials(self):
        def omega(p):
            if isinstance(p, CurvePoint) and isinstance(p.value, Jet):
                return Jet.constant(TWO_PI_I, p.value.base_point, p.value.order)
            return TWO_PI_I

        return [omega]

    def nu_value(self, p, a: int = 0):
        return 1.0 + 0j

    def abel(self, p) -> np.ndarray:
        p = _as_point(self, p)
        return np.array([p.value], dtype=object if isinstance(p.value, Jet) else complex)

    def green_characteristic(self) -> ThetaCharacteristic:
        return ThetaCharacteristic(np.array([0.5]), np.array([0.5]))

    def __repr__(self) -> str:
        return f"EllipticCurve(tau={self.tau})"


# ---------------------------------------------------------------------------
# hyperelliptic machinery


def _pair_factor(a: complex, b: complex, x):
    """sqrt-factor for the pair (a, b), discontinuous exactly on [a, b]."""
    m = (a + b) / 2
    h = (b - a) / 2
    return (x - m) * np.sqrt(1 - (h / (x - m)) ** 2)


class HyperellipticCurve:
    """y^2 = prod (x - e_i) for 3..6 distinct finite branch points.

    Odd count: infinity is a branch point and the base point (chart t,
    x = 1/t^2).  Even count: the base point is the lex-last branch point
    (chart u, x = P0 + u^2).
    """

    def __init__(self, branch_points, nodes: int = 256) -> None:
        es = sorted((complex(e) for e in branch_points), key=lambda z: (z.real, z.imag))
        if len(es) < 3 or len(es) > 6:
            raise SpecParseError("need 3..6 distinct branch points")
        if min(abs(a - b) for i, a in enumerate(es) for b in es[i + 1 :]) < 1e-12:
            raise SpecParseError("branch points must be distinct")
        self.es = es
        self.odd = len(es) % 2 == 1
        self.genus = (len(es) - 1) // 2
        self.nodes = nodes
        self.pairs = [(es[2 * k], es[2 * k + 1]) for k in range(len(es) // 2)]
        self.ray = es[-1] if self.odd else None
        self.base_point = (
            CurvePoint("inf") if self.odd else CurvePoint("x", es[-1], 1)
        )

        MA, MB = self._period_integrals(nodes)
        MA2, MB2 = self._period_integrals(nodes // 2 + nodes // 4)
        self.C = np.linalg.inv(MA)  # nu_a = sum_i C[a,i] x^i dx / y
        tau = self.C @ MB
        tau2 = np.linalg.inv(MA2) @ MB2
        if np.max(np.abs(tau - tau2)) > 1e-8:
            raise QuadratureFailure("period quadrature not converged")
        tau = (tau + tau.T) / 2
        self.periods = PeriodMatrix(tau)
        self.tau = self.periods.tau
        self._chart_series()
        self._anchor()
        self._nu_coeff_cache = [self._compute_nu_coeffs(a) for a in range(self.genus)]
        self._constants_cache = None
        self._green_char_cache = None

    # -- global branch ------------------------------------------------
    def y_global(self, x):
        if isinstance(x, Jet):
            # branch choice lives in the scalar value; the jet correction
            # is sqrt of a ratio with value 1, principal branch exact
            x0 = x.value()
            ratio = Jet.constant(1.0, x.base_point, x.order)
            for e in self.es:
                ratio = ratio * ((x - e) / (x0 - e))
            return self.y_global(x0) * ratio.sqrt()
        val = 1.0 + 0j if np.isscalar(x) else np.ones_like(np.asarray(x, complex))
        for a, b in self.pairs:
            val = val * _pair_factor(a, b, x)
        if self.odd:
            val = val * 1j * np.sqrt(self.ray - x)
        return val

    def _rest_for_cut(self, j: int, x):
        """y with the factor of cut j removed (stable on that cut)."""
        val = 1.0 + 0j if np.isscalar(x) else np.ones_like(np.asarray(x, complex))
        for k, (a, b) in enumerate(self.pairs):
            if k != j:
                val = val * _pair_factor(a, b, x)
        if self.odd:
            val = val * 1j * np.sqrt(self.ray - x)
        return val

    # -- periods --------------------------------------------------------
    def _period_integrals(self, N: int):
        es, g = self.es, self.genus
        k = np.arange(1, N + 1)
        s = np.cos((2 * k - 1) * np.pi / (2 * N))
        w = np.pi / N
        nseg = len(es) - 1
        L = np.zeros((g, nseg), dtype=complex)
        for j in range(nseg):
            a, b = es[j], es[j + 1]
            m, h = (a + b) / 2, (b - a) / 2
            x = m + h * s
            if j % 2 == 0:  # cut segment: 2 x top edge, self-factor i*h*sqrt(1-s^2)
                rest = self._rest_for_cut(j // 2, x)
                for i in range(g):
                    L[i, j] = 2 * w * np.sum(x**i / (1j * rest))
            else:  # gap segment: y smooth, plain Gauss-Chebyshev with unfolded weight
                y = self.y_global(x)
                for i in range(g):
                    L[i, j] = 2 * w * np.sum(x**i * h * np.sqrt(1 - s**2) / y)
        MA = L[:, 0::2][:, : g]
        gaps = L[:, 1::2]
        MB = np.cumsum(gaps[:, ::-1], axis=1)[:, ::-1][:, : g]
        return MA, MB

    # -- local chart at the base point -----------------------------------
    def _chart_series(self, terms: int = 60) -> None:
        """Series in the chart coordinate at P0 for 1/y-type data.

        Odd: x = 1/t^2, y = c t^{-(2g+1)} s(t), s(t) = sqrt(prod(1 - e t^2)).
        Even: x = P0 + u^2, y = u * ytil(u), ytil = c * sqrt(prod'(x - e)).
        Stored: inverse series coefficients over even powers of the chart
        coordinate (index k <-> power 2k).
        """
        if self.odd:
            # series of prod(1 - e t^2) in q = t^2, then q-series of s^-1
            poly = np.zeros(terms, dtype=complex)
            poly[0] = 1.0
            for e in self.es:
                shifted = np.zeros_like(poly)
                shifted[1:] = poly[:-1]
                poly = poly - e * shifted
        else:
            b0 = self.es[-1]
            poly = np.zeros(terms, dtype=complex)
            poly[0] = 1.0
            for e in self.es[:-1]:
                shifted = np.zeros_like(poly)
                shifted[1:] = poly[:-1]
                poly = (b0 - e) * poly + shifted
        # inverse square root series: v = poly, r = v^{-1/2} via r' relation
        r = np.zeros(terms, dtype=complex)
        r[0] = poly[0] ** -0.5
        for n in range(1, terms):
            # from (r^2 v) = 1: sum_{i+j+k=n} r_i r_j v_k = 0 for n >= 1
            acc = 0j
            for i in range(n + 1):
                for j in range(n - i + 1):
                    k = n - i - j
                    if i == n and j == 0 and k == 0:
                        continue
                    ri = r[i] if i < n else 0
                    rj = r[j] if j < n else 0
                    acc += ri * rj * poly[k]
            r[n] = -acc / (2 * r[0] * poly[0])
        self._inv_sqrt_series = r  # coefficients over (chart coord)^2

    def _anchor(self) -> None:
        scale = max(abs(e) for e in self.es) + 1.0
        if self.odd:
            # rotate the anchor ray a little: x real > e_last is itself a cut
            self._t0 = cmath.exp(-1j * math.pi / 12) / math.sqrt(4.0 * scale)
            self._x0 = 1.0 / self._t0**2
            s_val = self._even_series_value(self._inv_sqrt_series, self._t0) ** -1
            c = self.y_global(self._x0) * self._t0 ** (2 * self.genus + 1) / s_val
        else:
            b0 = self.es[-1]
            gap = min(abs(b0 - e) for e in self.es[:-1])
            self._t0 = 0.45 * math.sqrt(gap)
            self._x0 = b0 + self._t0**2
            rest_val = self._even_series_value(self._inv_sqrt_series, self._t0) ** -1
            c = self.y_global(self._x0) / (self._t0 * rest_val)
        if abs(abs(c) - 1) > 1e-6:
            raise VerificationFailure(f"chart anchor |c|={abs(c):.3e} not unimodular")
        self.chart_sign = 1.0 if abs(c - 1) < abs(c + 1) else -1.0

    @staticmethod
    def _even_series_value(coeffs: np.ndarray, t: complex) -> complex:
        q = t * t
        tot, p = 0j, 1.0 + 0j
        for ck in coeffs:
            tot += ck * p
            p *= q
        return tot

    def nu_chart_coeffs(self, a: int, terms: int = 60) -> np.ndarray:
        return self._nu_coeff_cache[a]

    def _compute_nu_coeffs(self, a: int, terms: int = 60) -> np.ndarray:
        """Taylor coefficients (over chart powers) of nu_a in the P0 chart."""
        inv = self._inv_sqrt_series
        g = self.genus
        out = np.zeros(2 * terms + 2 * g + 2, dtype=complex)
        if self.odd:
            # nu_a = (-2/c) sum_i C[a,i] t^{2g-2-2i} / s(t) dt
            for i in range(g):
                base = 2 * g - 2 - 2 * i
                for k, ck in enumerate(inv):
                    p = base + 2 * k
                    if p < out.size:
                        out[p] += (-2.0 / self.chart_sign) * self.C[a, i] * ck
        else:
            # nu_a = 2 sum_i C[a,i] (b0+u^2)^i / ytil(u) du
            b0 = self.es[-1]
            for i in range(g):
                # (b0 + u^2)^i coefficients over u^2-powers
                binom = [
                    math.comb(i, r) * b0 ** (i - r) for r in range(i + 1)
                ]
                for r, br in enumerate(binom):
                    for k, ck in enumerate(inv):
                        p = 2 * r + 2 * k
                        if p < out.size:
                            out[p] += (2.0 / self.chart_sign) * self.C[a, i] * br * ck
        return out

    def nu_chart_jet(self, a: int, t_jet: Jet, terms: int = 40) -> Jet:
        coeffs = self.nu_chart_coeffs(a, terms)
        acc = Jet.constant(0, t_jet.base_point, t_jet.order)
        p = Jet.constant(1.0, t_jet.base_point, t_jet.order)
        for k in range(min(coeffs.size, 2 * terms)):
            if coeffs[k] != 0:
                acc = acc + coeffs[k] * p
            p = p * t_jet
        return acc

    def nu_x_value(self, a: int, x: complex, sheet: int = 1) -> complex:
        mono = sum(self.C[a, i] * x**i for i in range(self.genus))
        return mono / (sheet * self.y_global(x))

    # -- Abel map ---------------------------------------------------------
    def _abel_series_leg(self, t: complex) -> np.ndarray:
        """integral_0^t nu (termwise series; |t| within the chart radius)."""
        out = np.zeros(self.genus, dtype=complex)
        for a in range(self.genus):
            coeffs = self.nu_chart_coeffs(a)
            tot, p = 0j, t
            for k in range(coeffs.size):
                if coeffs[k] != 0:
                    tot += coeffs[k] * p / (k + 1)
                p *= t
            out[a] = tot
        return out

    def _cut_segments(self):
        segs = [(a, b) for a, b in self.pairs]
        if self.odd:
            far = self.ray + (abs(self.ray) + self._x0 + 10.0)
            segs.append((self.ray, far))  # finite stand-in for the ray cut
        return segs

    @staticmethod
    def _seg_cross(p1, p2, q1, q2) -> bool:
        d1, d2 = p2 - p1, q2 - q1
        den = (d1.real * d2.imag - d1.imag * d2.real)
        if abs(den) < 1e-14:
            return False
        r = q1 - p1
        t = (r.real * d2.imag - r.imag * d2.real) / den
        u = (r.real * d1.imag - r.imag * d1.real) / den
        eps = 1e-9
        return eps < t < 1 - eps and eps < u < 1 - eps

    def _route(self, target: complex) -> list[complex]:
        """Polyline from the corridor anchor x0 to target, avoiding cuts."""
        x0 = complex(self._x0)
        H = max(max(e.imag for e in self.es) + 1.0, x0.imag + 1.0)
        H = max(H, target.imag + 1.0)
        east = complex(max(e.real for e in self.es) + 2.0, x0.imag)
        starts = [[x0], [x0, east]]
        lanes = [self.es[0].real - 2.0, self.es[-1].real + 2.0]
        for j in range(len(self.es) - 1):
            lanes.append((self.es[j].real + self.es[j + 1].real) / 2)
        candidates = []
        for head in starts:
            top1 = complex(head[-1].real, H)
            top2 = complex(target.real, H)
            candidates.append(head + [top1, top2, target])
            for lane in lanes:
                mid_top = complex(lane, H)
                mid_bot = complex(lane, target.imag)
                candidates.append(head + [top1, mid_top, mid_bot, target])
        cuts = self._cut_segments()
        for path in candidates:
            ok = True
            for p1, p2 in zip(path, path[1:]):
                if abs(p1 - p2) < 1e-13:
                    continue
                for q1, q2 in cuts:
                    if self._seg_cross(p1, p2, q1, q2):
                        ok = False
                        break
                for e in self.es:
                    # branch point strictly inside a segment: reject route
                    d1, d2 = e - p1, p2 - p1
                    if abs(d2) < 1e-13:
                        continue
                    s = (d1.real * d2.real + d1.imag * d2.imag) / abs(d2) ** 2
                    if 1e-9 < s < 1 - 1e-9 and abs(d1 - s * d2) < 1e-9:
                        ok = False
                if not ok:
                    break
            if ok:
                return path
        raise PathThroughBranchPoint(f"no cut-free route to {target}")

    def _integrate_poly(self, path: list[complex], sheet: int) -> np.ndarray:
        """integral of (nu_a) along a straight polyline, fixed sheet."""
        glnodes, glweights = np.polynomial.legendre.leggauss(32)
        out = np.zeros(self.genus, dtype=complex)

        def quad_panel(a, b):
            x = (a + b) / 2 + (b - a) / 2 * glnodes
            jac = (b - a) / 2
            y = sheet * self.y_global(x)
            for i in range(self.genus):
                mono = np.zeros_like(x)
                for m in range(self.genus):
                    mono = mono + self.C[i, m] * x**m
                out[i] += jac * np.sum(glweights * mono / y)

        def split(a, b, depth):
            length = abs(b - a)
            # panels must stay shorter than their clearance from the
            # nearest branch point or the endpoint sqrt wrecks the rule
            clear = min(min(abs(a - e), abs(b - e)) for e in self.es)
            if depth >= 46 or (length <= 0.5 and length <= clear):
                quad_panel(a, b)
                return
            mid = (a + b) / 2
            split(a, mid, depth + 1)
            split(mid, b, depth + 1)

        for p1, p2 in zip(path, path[1:]):
            if abs(p2 - p1) < 1e-13:
                continue
            split(p1, p2, 0)
        return out

    def _integrate_to_branch_point(self, start: complex, e: complex, sheet: int) -> np.ndarray:
        """Straight run start -> e with the endpoint sqrt removed by x = e + s^2 d."""
        glnodes, glweights = np.polynomial.legendre.leggauss(48)
        d = start - e
        s = (glnodes + 1) / 2  # s in (0,1), x(1) = start
        x = e + s**2 * d
        y = sheet * self.y_global(x)
        out = np.zeros(self.genus, dtype=complex)
        for i in range(self.genus):
            mono = np.zeros_like(x)
            for m in range(self.genus):
                mono = mono + self.C[i, m] * x**m
            vals = mono * 2 * s * d / y
            out[i] += np.sum(glweights * vals) / 2
        return out

    def abel(self, p) -> np.ndarray:
        """Abel map from the base point, nu-normalized coordinates."""
        if isinstance(p, CurvePoint) and p.chart == "inf":
            if self.odd:
                return np.zeros(self.genus, dtype=complex)
            raise PathThroughBranchPoint("infinity is not on the even-model chart")
        if not isinstance(p, CurvePoint):
            raise TypeError("hyperelliptic abel needs a CurvePoint")
        if p.chart == "t":
            t = p.value
            if isinstance(t, Jet):
                return np.array(self.abel_t_jet(t), dtype=object)
            return self._abel_series_leg(t)
        if p.chart != "x":
            raise TypeError(f"unsupported chart {p.chart}")
        x, sheet = complex(p.value), p.sheet
        if min(abs(x - e) for e in self.es) < 1e-12:
            return self._abel_to_branch(x, sheet)
        leg0 = self._abel_series_leg(sheet * self._t0)
        path = self._route(x)
        return leg0 + self._integrate_poly(path, sheet)

    def _anchor_chart_value(self) -> complex:
        return self._t0

    def _abel_to_branch(self, e: complex, sheet: int) -> np.ndarray:
        # route to a safe offset above e, then the s^2 substitution run
        off = e + 1j * min(0.5, 0.25 * min(abs(e - f) for f in self.es if abs(e - f) > 1e-12))
        leg0 = self._abel_series_leg(sheet * self._t0)
        path = self._route(off)
        mid = self._integrate_poly(path, sheet)
        tail = self._integrate_to_branch_point(off, e, sheet)
        return leg0 + mid - tail

    def abel_t_jet(self, t_jet: Jet, terms: int = 60) -> list[Jet]:
        """Abel map of a t-chart jet argument: the antiderivative series of
        nu_a evaluated at the jet.  Valid while |t| stays inside the chart."""
        out = []
        for a in range(self.genus):
            coeffs = self.nu_chart_coeffs(a, terms)
            acc = Jet.constant(0, t_jet.base_point, t_jet.order)
            p = t_jet
            for k in range(coeffs.size):
                if coeffs[k] != 0:
                    acc = acc + (coeffs[k] / (k + 1)) * p
                p = p * t_jet
            out.append(acc)
        return out

    def nu_t_value(self, a: int, t: complex) -> complex:
        coeffs = self.nu_chart_coeffs(a)
        tot, p = 0j, 1.0 + 0j
        for k in range(coeffs.size):
            if coeffs[k] != 0:
                tot += coeffs[k] * p
            p *= t
        return tot

    def chart_sample_points(self):
        """Generic small chart values, inside the P0 chart radius."""
        s = self._anchor_chart_value() * 0.8
        return [s * c for c in (0.62 + 0.22j, -0.24 + 0.54j, 0.36 - 0.46j, 0.58j + 0.1)]

    def holomorphic_differentials(self):
        out = []
        for a in range(self.genus):
            def omega(p, a=a):
                p = _as_point(self, p)
                if p.chart == "x":
                    return TWO_PI_I * self.nu_x_value(a, p.value, p.sheet)
                if p.chart == "t":
                    if isinstance(p.value, Jet):
                        return TWO_PI_I * self.nu_chart_jet(a, p.value)
                    return TWO_PI_I * self.nu_t_value(a, p.value)
                raise PathThroughBranchPoint("differential evaluated at the base point chart origin")
            out.append(omega)
        return out

    def riemann_constants(self) -> np.ndarray:
        if self._constants_cache is not None:
            return self._constants_cache
        odd = _odd_half_characteristics(self.genus)
        if self.genus == 1:
            h = np.array([(1 + self.tau[0, 0]) / 2])
            if abs(theta(h, self.periods)) > 1e-8:
                raise VerificationFailure("odd half-period does not lie on the theta divisor")
            self._constants_cache = h
            return h
        samples = [self.abel(CurvePoint("t", t)) for t in self.chart_sample_points()]
        rows = []
        for a_vec, b_vec in odd:
            h = self.tau @ a_vec + b_vec
            vals = [abs(theta(v - h, self.periods)) for v in samples]
            rows.append((max(vals), h))
        scale = max(r[0] for r in rows)
        hits = [h for mx, h in rows if mx < 1e-6 * scale]
        if len(hits) != 1:
            raise VerificationFailure(
                f"base-point constants census found {len(hits)} vanishing odd half-periods"
            )
        self._constants_cache = hits[0]
        return hits[0]

    def green_characteristic(self) -> ThetaCharacteristic:
        """Odd half-characteristic whose theta pullback is not identically
        zero along the curve (needed where the base point is a ramification
        point and the constants vector itself degenerates)."""
        if self._green_char_cache is not None:
            return self._green_char_cache
        odd = _odd_half_characteristics(self.genus)
        if self.genus == 1:
            self._green_char_cache = ThetaCharacteristic(*odd[0])
            return self._green_char_cache
        samples = [self.abel(CurvePoint("t", t)) for t in self.chart_sample_points()]
        best, best_val = None, -1.0
        for a_vec, b_vec in odd:
            h = self.tau @ a_vec + b_vec
            vals = [abs(theta(v - h, self.periods)) for v in samples]
            if min(vals) > best_val:
                best_val, best = min(vals), ThetaCharacteristic(a_vec, b_vec)
        if best is None or best_val <= 0:
            raise VerificationFailure("no usable odd half-characteristic")
        self._green_char_cache = best
        return best

    def __repr__(self) -> str:
        return f"HyperellipticCurve({len(self.es)} branch points, genus {self.genus})"


def _odd_half_characteristics(g: int):
    """All (a, b) in {0, 1/2}^g x {0, 1/2}^g with odd parity."""
    out = []
    for am in range(2**g):
        for bm in range(2**g):
            a = np.array([(am >> i) & 1 for i in range(g)]) / 2.0
            b = np.array([(bm >> i) & 1 for i in range(g)]) / 2.0
            if round(4 * float(a @ b)) % 2 == 1:
                out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# module-level contract surface


def holomorphic_differentials(model):
    """Evaluators for omega_a = 2*pi*i*nu_a, one per handle."""
    return model.holomorphic_differentials()


def period_matrix(model) -> PeriodMatrix:
    if model.genus == 0:
        raise InvalidPeriodMatrix("genus-0 model has no period matrix")
    return model.periods


def abel_map(model, p) -> np.ndarray:
    if model.genus == 0:
        raise ValueError("genus-0 model has no Abel map")
    return model.abel(_as_point(model, p))


def riemann_constants(model) -> np.ndarray:
    if model.genus == 0:
        raise ValueError("genus-0 model has no constants vector")
    if isinstance(model, EllipticCurve):
        return model.delta.copy()
    return model.riemann_constants()


def _generic_shift(model) -> np.ndarray:
    """Deterministic shift c with Theta(c) comfortably nonzero, for the
    log-derivative functions on models where the constants vector itself
    sits on a degenerate orbit."""
    g = model.genus
    pm = model.periods
    base = np.array([0.137 + 0.083j, -0.172 + 0.241j, 0.091 - 0.127j][:g])
    ref = abs(theta(np.zeros(g), pm))
    for k in range(20):
        c = base * (1 + 0.37 * k) + (0.11 * k) * np.ones(g)
        if abs(theta(c, pm)) > 1e-2 * ref:
            return c
    raise VerificationFailure("no generic shift found off the theta divisor")


def _r_shift(model) -> np.ndarray:
    if model.genus == 1:
        return riemann_constants(model)
    return _generic_shift(model)


def r_from_abel(model, v: np.ndarray, a: int) -> complex:
    """(1/2 pi i) d_{v_a} log Theta(v + c) for the model's shift c."""
    c = _r_shift(model)
    arg = np.asarray(v, dtype=complex) + c
    val = theta(arg, model.periods)
    grad = theta_gradient(arg, model.periods)
    ref = abs(theta(np.zeros(model.genus), model.periods))
    if abs(val) < 1e-10 * max(ref, 1e-30):
        raise OnThetaDivisor("log-derivative argument lies on the theta divisor")
    return grad[a] / val / TWO_PI_I


def r_a(model, p, a: int) -> complex:
    if model.genus == 0:
        raise ValueError("genus-0 model has no r functions")
    return r_from_abel(model, abel_map(model, p), a)


def zeta_primitive(model, p, a: int) -> complex:
    """Primitive of the b-period normalized differential 2*pi*i*nu_a,
    vanishing at the base point."""
    if model.genus == 0:
        raise ValueError("genus-0 model has no zeta primitives")
    return TWO_PI_I * abel_map(model, p)[a]


def curve_from_spec(spec: dict):
    """Build a model from the JSON curve description."""
    if not isinstance(spec, dict) or "variant" not in spec:
        raise SpecParseError("curve spec must be a dict with a 'variant' key")
    variant = spec["variant"]
    try:
        if variant == "rational":
            return RationalCurve()
        if variant == "elliptic":
            tau = spec["tau"]
            return EllipticCurve(complex(tau[0], tau[1]))
        if variant == "hyperelliptic":
            pts = [complex(p[0], p[1]) for p in spec["branch_points"]]
            return HyperellipticCurve(pts)
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise SpecParseError(f"bad curve spec: {exc}") from exc
    raise SpecParseError(f"unknown curve variant {variant!r}")

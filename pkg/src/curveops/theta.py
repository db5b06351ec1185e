"""Riemann theta functions on C^g with characteristics and jet arguments.

Conventions, fixed once for the whole package:

    Theta(z | tau)          = sum_n exp(i*pi*n.tau.n + 2*pi*i*n.z)
    Theta[a,b](z | tau)     = sum_n exp(i*pi*(n+a).tau.(n+a) + 2*pi*i*(n+a).(z+b))
    Theta(z + m + tau*n)    = exp(-i*pi*n.tau.n - 2*pi*i*n.z) * Theta(z)

Characteristics are folded into the plain sum through the exact identity
Theta[a,b](z) = exp(i*pi*a.tau.a + 2*pi*i*a.(z+b)) * Theta(z + tau*a + b),
so one truncation/reduction path serves everything, including jets.

Derivatives are never taken by finite differences: a jet argument is
pushed through the lattice sum with per-axis power tables
exp(2*pi*i*delta)^n, which keeps non-affine jet arguments exact too.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidPeriodMatrix, TruncationFailure
from .jets import Jet, _mul_triples

__all__ = [
    "PeriodMatrix",
    "ThetaCharacteristic",
    "theta",
    "theta_jet",
    "theta_gradient",
    "theta1",
    "theta1_jet",
]

_TAIL_TARGET = 1e-13
_RADIUS_CAP = 40


class PeriodMatrix:
    """Symmetric g x g complex matrix with positive definite imaginary part."""

    __slots__ = ("g", "tau", "_Y", "_Yinv", "_lam_min")

    def __init__(self, tau) -> None:
        t = np.atleast_2d(np.asarray(tau, dtype=complex))
        if t.shape[0] != t.shape[1]:
            raise InvalidPeriodMatrix(f"non-square shape {t.shape}")
        if np.max(np.abs(t - t.T)) >= 1e-10:
            raise InvalidPeriodMatrix("tau not symmetric to 1e-10")
        t = (t + t.T) / 2
        Y = t.imag
        eig = np.linalg.eigvalsh(Y)
        if eig.min() <= 0:
            raise InvalidPeriodMatrix("Im(tau) not positive definite")
        self.g = t.shape[0]
        self.tau = t
        self._Y = Y
        self._Yinv = np.linalg.inv(Y)
        self._lam_min = float(eig.min())

    def __repr__(self) -> str:
        return f"PeriodMatrix(g={self.g})"


class ThetaCharacteristic:
    """Pair of real characteristic vectors (a, b)."""

    __slots__ = ("a", "b")

    def __init__(self, a, b) -> None:
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.a.shape != self.b.shape:
            raise ValueError("characteristic halves differ in length")

    @property
    def is_odd(self) -> bool:
        # parity of the half-integer characteristic: 4 a.b mod 2
        return int(round(4 * float(self.a @ self.b))) % 2 == 1

    @staticmethod
    def half(m, n) -> "ThetaCharacteristic":
        """Characteristic (m/2, n/2) from integer vectors."""
        return ThetaCharacteristic(
            np.asarray(m, dtype=float) / 2, np.asarray(n, dtype=float) / 2
        )


def _as_period(tau) -> PeriodMatrix:
    if isinstance(tau, PeriodMatrix):
        return tau
    arr = np.asarray(tau, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    return PeriodMatrix(arr)


def _box_halfwidth(pm: PeriodMatrix) -> int:
    r0 = np.sqrt(-np.log(_TAIL_TARGET) / np.pi) + 1.0
    w = int(np.ceil(r0 / np.sqrt(pm._lam_min))) + 1
    if w > _RADIUS_CAP:
        raise TruncationFailure(
            f"lattice box half-width {w} exceeds cap {_RADIUS_CAP}"
        )
    return w


def _lattice(pm: PeriodMatrix, center: np.ndarray) -> np.ndarray:
    w = _box_halfwidth(pm)
    axes = [
        np.arange(int(np.round(c)) - w, int(np.round(c)) + w + 1) for c in center
    ]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)  # (N, g)


def _reduce_vec(z: np.ndarray, pm: PeriodMatrix):
    """z = z_red + tau*n + m with n, m integer; returns (z_red, n)."""
    n = np.round(pm._Yinv @ z.imag).astype(int)
    zp = z - pm.tau @ n
    m = np.round(zp.real).astype(int)
    return zp - m, n


def _plain_theta(z: np.ndarray, pm: PeriodMatrix) -> complex:
    zr, n = _reduce_vec(z, pm)
    # Theta(z) = exp(-i pi n.tau.n - 2 pi i n.z_red) Theta(z_red)
    log_factor = -1j * np.pi * (n @ pm.tau @ n) - 2j * np.pi * (n @ zr)
    center = -pm._Yinv @ zr.imag
    ns = _lattice(pm, center)
    expo = 1j * np.pi * np.einsum("ki,ij,kj->k", ns, pm.tau, ns) + 2j * np.pi * (
        ns @ zr
    )
    M = expo.real.max()
    return complex(np.exp(M + log_factor) * np.sum(np.exp(expo - M)))


def theta(z, tau, char: ThetaCharacteristic | None = None) -> complex:
    """Riemann theta value; tau may be scalar, matrix, or PeriodMatrix."""
    pm = _as_period(tau)
    zv = np.atleast_1d(np.asarray(z, dtype=complex))
    if zv.size != pm.g:
        raise ValueError(f"argument length {zv.size} != genus {pm.g}")
    if char is None:
        return _plain_theta(zv, pm)
    a, b = char.a, char.b
    pref = np.exp(1j * np.pi * (a @ pm.tau @ a) + 2j * np.pi * (a @ (zv + b)))
    return complex(pref * _plain_theta(zv + pm.tau @ a + b, pm))


def _raw_mul(x: np.ndarray, y: np.ndarray, triples) -> np.ndarray:
    ii, jj, kk = triples
    out = np.zeros_like(x)
    np.add.at(out, kk, x[ii] * y[jj])
    return out


def _jet_components(zs, pm: PeriodMatrix):
    """Split a mixed complex/Jet argument vector into (template, values, deltas)."""
    template = None
    for entry in zs:
        if isinstance(entry, Jet):
            template = entry
            break
    if template is None:
        raise TypeError("theta_jet needs at least one Jet entry")
    vals = np.empty(pm.g, dtype=complex)
    deltas: list[np.ndarray | None] = []
    size = template.coeffs.size
    for k, entry in enumerate(zs):
        if isinstance(entry, Jet):
            template._check(entry)
            vals[k] = entry.coeffs[0]
            d = entry.coeffs.copy()
            d[0] = 0.0
            deltas.append(d if np.any(d) else None)
        else:
            vals[k] = complex(entry)
            deltas.append(None)
    return template, vals, deltas, size


def _exp_raw(coeffs: np.ndarray, order, triples) -> np.ndarray:
    # exp of a jet with zero constant term, on raw coefficient arrays
    acc = np.zeros_like(coeffs)
    acc[0] = 1.0
    term = acc.copy()
    for k in range(1, order + 1):
        term = _raw_mul(term, coeffs, triples) / k
        acc = acc + term
    return acc


def _inv_raw(coeffs: np.ndarray, order, triples) -> np.ndarray:
    c = coeffs[0]
    u = -coeffs / c
    u[0] = 0.0
    acc = np.zeros_like(coeffs)
    acc[0] = 1.0
    term = acc.copy()
    for _ in range(order):
        term = _raw_mul(term, u, triples)
        acc = acc + term
    return acc / c


def theta_jet(zs, tau, char: ThetaCharacteristic | None = None, order: int | None = None) -> Jet:
    """Theta of a vector of jet (or scalar) arguments sharing one base point.

    The returned jet lives in the same variables as the inputs.  Order is
    capped at 6; pass a lower order to truncate the inputs first.
    """
    pm = _as_period(tau)
    zs = list(zs) if isinstance(zs, (list, tuple)) else [zs]
    if len(zs) != pm.g:
        raise ValueError(f"argument length {len(zs)} != genus {pm.g}")
    jet_orders = [e.order for e in zs if isinstance(e, Jet)]
    if not jet_orders:
        raise TypeError("theta_jet needs at least one Jet entry")
    work_order = min(jet_orders) if order is None else order
    if work_order > 6:
        raise ValueError("theta_jet supports order <= 6")
    zs = [e.truncate(work_order) if isinstance(e, Jet) else e for e in zs]
    template = next(e for e in zs if isinstance(e, Jet))

    if char is not None:
        a, b = char.a, char.b
        shifted = [zs[k] + (pm.tau[k] @ a + b[k]) for k in range(pm.g)]
        lin = Jet.constant(
            1j * np.pi * (a @ pm.tau @ a), template.base_point, work_order
        )
        for k in range(pm.g):
            zk = zs[k] if isinstance(zs[k], Jet) else Jet.constant(
                zs[k], template.base_point, work_order
            )
            lin = lin + (2j * np.pi * a[k]) * (zk + b[k])
        return lin.exp() * theta_jet(shifted, pm, None, work_order)

    _, vals, deltas, size = _jet_components(zs, pm)
    triples = _mul_triples(template.nvars, work_order)

    zr, n = _reduce_vec(vals, pm)
    shift = vals - zr  # tau*n + m, a constant vector
    center = -pm._Yinv @ zr.imag
    ns = _lattice(pm, center)
    expo = 1j * np.pi * np.einsum("ki,ij,kj->k", ns, pm.tau, ns) + 2j * np.pi * (
        ns @ zr
    )
    M = expo.real.max()
    weights = np.exp(expo - M)

    # per-axis tables of exp(2 pi i delta_a)^m on raw coefficient arrays
    tables: list[dict[int, np.ndarray] | None] = []
    for k in range(pm.g):
        if deltas[k] is None:
            tables.append(None)
            continue
        E = _exp_raw(2j * np.pi * deltas[k], work_order, triples)
        Einv = _inv_raw(E, work_order, triples)
        lo, hi = int(ns[:, k].min()), int(ns[:, k].max())
        unit = np.zeros(size, dtype=complex)
        unit[0] = 1.0
        tab: dict[int, np.ndarray] = {0: unit}
        cur = tab[0]
        for m in range(1, hi + 1):
            cur = _raw_mul(cur, E, triples)
            tab[m] = cur
        cur = tab[0]
        for m in range(-1, lo - 1, -1):
            cur = _raw_mul(cur, Einv, triples)
            tab[m] = cur
        tables.append(tab)

    jet_axes = [k for k in range(pm.g) if tables[k] is not None]
    acc = np.zeros(size, dtype=complex)
    if not jet_axes:
        acc[0] = weights.sum()
    elif len(jet_axes) == 1:
        (ax,) = jet_axes
        tab = tables[ax]
        for m in np.unique(ns[:, ax]):
            acc += weights[ns[:, ax] == m].sum() * tab[int(m)]
    else:
        # group by the last jet axis; accumulate raw rows, then one mul per group
        last = jet_axes[-1]
        rest = jet_axes[:-1]
        for m in np.unique(ns[:, last]):
            sel = ns[:, last] == m
            row = np.zeros(size, dtype=complex)
            for idx in np.nonzero(sel)[0]:
                term = None
                for ax in rest:
                    t = tables[ax][int(ns[idx, ax])]
                    term = t if term is None else _raw_mul(term, t, triples)
                row += weights[idx] * term
            acc += _raw_mul(row, tables[last][int(m)], triples)

    reduced = Jet(template.base_point, work_order, acc)

    # exp(M) * exp(-i pi n.tau.n - 2 pi i n.(z - shift)) with jet-valued z
    log_factor = Jet.constant(
        M - 1j * np.pi * (n @ pm.tau @ n) + 2j * np.pi * (n @ shift),
        template.base_point,
        work_order,
    )
    for k in range(pm.g):
        if n[k] == 0:
            continue
        zk = zs[k] if isinstance(zs[k], Jet) else Jet.constant(
            zs[k], template.base_point, work_order
        )
        log_factor = log_factor + (-2j * np.pi * n[k]) * zk
    return log_factor.exp() * reduced


def theta_gradient(z, tau, char: ThetaCharacteristic | None = None) -> np.ndarray:
    """Vector of first partials dTheta/dz_a at a plain complex argument."""
    pm = _as_period(tau)
    zv = np.atleast_1d(np.asarray(z, dtype=complex))
    base = np.zeros(pm.g)
    # each seed is (z_k + eps_k): offsets live in fresh directions about 0
    seeds = [Jet.variable(k, base, 1) + zv[k] for k in range(pm.g)]
    jet = theta_jet(seeds, pm, char, order=1)
    unit = lambda k: tuple(1 if i == k else 0 for i in range(pm.g))
    return np.array([jet.coefficient(unit(k)) for k in range(pm.g)])


_HALF_CHAR_1 = ThetaCharacteristic([0.5], [0.5])


def theta1(x, tau) -> complex:
    """Genus-1 odd Jacobi theta; theta1(x) = -Theta[1/2,1/2](x|tau)."""
    return -theta([complex(x)], tau, _HALF_CHAR_1)


def theta1_jet(x_jet: Jet, tau, order: int | None = None) -> Jet:
    return -theta_jet([x_jet], tau, _HALF_CHAR_1, order)

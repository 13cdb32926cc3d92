"""Regularization operators for oscillatory integrals.

The full operator P = u.grad_xi + v.grad_x + w satisfies tP e^{i phi} =
e^{i phi} and trades one phase order per application: P maps SG^(m,mu) into
SG^(m-n, mu-nu).  The xi-only operator Q and the (x,p)-dependent operator Qp
regularize on cone supports where |grad_xi phi|^2 (resp. |grad_x phi - p|^2)
stays elliptic.  Components are exact jet expressions; the adjoint identities
are verified numerically, never formed symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .compactify import (
    AsymptoticCutoff,
    CompactPoint,
    SphereGaussian,
    bump_profile_jet,
    smoothstep_jet,
)
from .jets import Jet, jet_variables, norm2_jet
from .phase import PhaseFn, require_admissible
from .symbols import (
    DEFAULT_PROTOCOL,
    ScanProtocol,
    SymbolFn,
    cross_sides,
    order_pair,
    side_grid,
)


class RegularizerRefused(ValueError):
    """Construction rejected: the required ellipticity fails on the support."""


def _point_values(jets: Sequence[Jet], batch: int) -> np.ndarray:
    if not jets:
        return np.zeros((0, batch))
    return np.stack([j.value.real for j in jets])


def _sumsq(js):
    acc = js[0] * js[0]
    for j in js[1:]:
        acc = acc + j * j
    return acc


# -- smooth selectors -----------------------------------------------------------


class SpatialCutoff:
    """Smooth localizer around a compact point: a scaled bump for finite
    centers, an asymptotic cutoff with a gaussian sphere factor for
    directions."""

    def __init__(self, center: CompactPoint, width: float = 1.0, radius: float = 8.0):
        self.center = center
        self.width = float(width)
        if center.is_boundary:
            self._cut = AsymptoticCutoff(
                sphere_fn=SphereGaussian(center.array, width), radius=radius, dim=center.dim
            )

    def jet_from_vars(self, xj: Sequence[Jet]) -> Jet:
        if self.center.is_boundary:
            return self._cut.jet_from_vars(xj)
        c = self.center.array
        shifted = [xj[i] - c[i] for i in range(len(xj))]
        r0 = np.sqrt(
            np.sum(np.stack([j.value.real**2 for j in shifted]), axis=0)
        )
        sp = xj[0].space
        out = np.zeros((sp.ncoef, xj[0].batch), dtype=complex)
        flat = r0 <= 0.25 * self.width
        out[0, flat] = 1.0
        live = ~flat
        if np.any(live):
            sub = [j.columns(live) for j in shifted]
            r = norm2_jet(sub).sqrt()
            out[:, live] = bump_profile_jet(r * (1.0 / self.width)).c
        return Jet(sp, out)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return self.jet_from_vars(jet_variables(0, x)).value


# -- the operator P ----------------------------------------------------------------


@dataclass
class RegularizerP:
    """P = u.grad_xi + v.grad_x + w for an admissible phase.

    chi is a radial profile, identically 1 for sqrt(|x|^2+|xi|^2) <= R (which
    covers |x|+|xi| <= R, where eta may vanish) and 0 beyond R+1."""

    phi: PhaseFn
    R: float
    protocol: ScanProtocol

    def chi_jet(self, vars_: Sequence[Jet]) -> Jet:
        sp = vars_[0].space
        batch = vars_[0].batch
        t0 = np.sqrt(np.sum(np.stack([v.value.real**2 for v in vars_]), axis=0))
        out = np.zeros((sp.ncoef, batch), dtype=complex)
        ones = t0 <= self.R
        out[0, ones] = 1.0
        live = (t0 > self.R) & (t0 < self.R + 1.0)
        if np.any(live):
            sub = [v.columns(live) for v in vars_]
            t = norm2_jet(sub).sqrt()
            out[:, live] = smoothstep_jet(t, self.R, self.R + 1.0).c
        return Jet(sp, out)

    def component_jets(self, x: np.ndarray, xi: np.ndarray, order: int):
        """u (s jets), v (d jets), w and chi at the requested order."""
        d, s = self.phi.d, self.phi.s
        vhigh = jet_variables(order + 1, x, xi)
        pj = self.phi.jet(x, xi, order + 2)
        gx = [pj.derivative(i) for i in range(d)]  # order+1
        gk = [pj.derivative(d + i) for i in range(s)]
        bx2 = 1.0 + _sumsq(vhigh[:d])
        bk2 = 1.0 + _sumsq(vhigh[d:])
        eta_j = _sumsq(gx) * bx2 + _sumsq(gk) * bk2
        chi_hi = self.chi_jet(vhigh)
        t0 = np.sqrt(np.sum(x * x, axis=0) + (np.sum(xi * xi, axis=0) if s else 0.0))
        live = t0 > self.R
        sp_hi = vhigh[0].space
        batch = vhigh[0].batch

        def masked(term_builder):
            out = np.zeros((sp_hi.ncoef, batch), dtype=complex)
            if np.any(live):
                out[:, live] = term_builder(live).c
            return Jet(sp_hi, out)

        def one_minus_chi_einv(mask):
            eta_l = eta_j.columns(mask)
            if np.any(np.abs(eta_l.value) < 1e-12):
                raise RegularizerRefused(
                    "eta vanishes outside the chi=1 region; enlarge R"
                )
            return (1.0 - chi_hi.columns(mask)) * eta_l.recip()

        u = [
            masked(
                lambda m, j=j: one_minus_chi_einv(m)
                * bk2.columns(m)
                * gk[j].columns(m)
                * 1j
            )
            for j in range(s)
        ]
        v = [
            masked(
                lambda m, k=k: one_minus_chi_einv(m)
                * bx2.columns(m)
                * gx[k].columns(m)
                * 1j
            )
            for k in range(d)
        ]
        w = chi_hi.truncate(order)
        for j in range(s):
            w = w + u[j].derivative(d + j)
        for k in range(d):
            w = w + v[k].derivative(k)
        u = [uj.truncate(order) for uj in u]
        v = [vk.truncate(order) for vk in v]
        return u, v, w, chi_hi.truncate(order)

    def apply_jet(self, g: Jet, u, v, w) -> Jet:
        """P(g) = u.grad_xi g + v.grad_x g + w g, one order lower than g."""
        d, s = self.phi.d, self.phi.s
        acc = w * g
        for j in range(s):
            acc = acc + u[j] * g.derivative(d + j)
        for k in range(d):
            acc = acc + v[k] * g.derivative(k)
        return acc


def build_P(
    phi: PhaseFn, R: Optional[float] = None, protocol: ScanProtocol = DEFAULT_PROTOCOL
) -> RegularizerP:
    """Construct P for an admissible phase; chi's plateau radius defaults to
    the admissibility report radius plus one."""
    report = require_admissible(phi, protocol)
    if R is None:
        R = report.radius + 1.0
    elif R < report.radius:
        raise ValueError(
            f"R={R} below the verified admissibility radius {report.radius}"
        )
    return RegularizerP(phi=phi, R=float(R), protocol=protocol)


def apply_P_r(P: RegularizerP, a: SymbolFn, f=None, r: int = 1) -> SymbolFn:
    """P^r(a(x,xi) f(x)) as a SymbolFn of order (m - r n, mu - r nu)."""
    phi = P.phi
    if r < 0:
        raise ValueError("r must be nonnegative")
    n, nu = phi.order
    m, mu = a.order
    from .symbols import order_shift

    out_order = order_shift((m, mu), -r * n, -r * nu)

    def jet_fn(xj, kj):
        batch = (xj + kj)[0].batch
        order = (xj + kj)[0].order
        x = _point_values(xj, batch)
        xi = _point_values(kj, batch)
        g = a.jet(x, xi, order + r)
        if f is not None:
            vars_hi = jet_variables(order + r, x, xi)
            g = g * f.jet_from_vars(vars_hi[: phi.d])
        if r == 0:
            return g
        u, v, w, _ = P.component_jets(x, xi, order + r - 1)
        for _t in range(r):
            g = P.apply_jet(g, u, v, w)
        return g

    src = f"P^{r}[({a.source})" + (f"*{getattr(f, 'source', 'f')}(x)]" if f is not None else "]")
    return SymbolFn(phi.d, phi.s, out_order, jet_fn, src)


def residual_P(P: RegularizerP, x, xi) -> np.ndarray:
    """|tP e^{i phi} - e^{i phi}| at batched points (relative; |e^{i phi}|=1)."""
    phi = P.phi
    d, s = phi.d, phi.s
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if xi.ndim == 1:
        xi = xi[:, None]
    u, v, w, _ = P.component_jets(x, xi, 1)
    E = (phi.jet(x, xi, 2) * 1j).exp().truncate(1)
    acc = w.value * E.value
    for j in range(s):
        acc = acc - (u[j] * E).derivative(d + j).value
    for k in range(d):
        acc = acc - (v[k] * E).derivative(k).value
    return np.abs(acc - E.value)


# -- the xi-only operator Q ---------------------------------------------------------


@dataclass
class ConeLocalizer:
    """Cone-shaped support description: a boundary (or finite) pair plus the
    scan protocol that generates its sample cloud."""

    x_part: CompactPoint
    xi_part: CompactPoint

    def support_samples(self, d: int, s: int, protocol: ScanProtocol):
        gx = side_grid(self.x_part, d, protocol)
        gk = side_grid(self.xi_part, s, protocol)
        X, K, valid = cross_sides(gx, gk)
        return X, K, valid


@dataclass
class RegularizerQ:
    """Q = b.grad_xi + c with b = i |grad_xi phi|^-2 grad_xi phi, valid on a
    cone support where |grad_xi phi|^2 keeps its ellipticity."""

    phi: PhaseFn
    localizer: ConeLocalizer
    min_ratio: float
    protocol: ScanProtocol

    def apply(self, a: SymbolFn) -> SymbolFn:
        phi = self.phi
        d, s = phi.d, phi.s
        n, nu = phi.order
        from .symbols import order_shift

        def jet_fn(xj, kj):
            batch = (xj + kj)[0].batch
            order = (xj + kj)[0].order
            x = _point_values(xj, batch)
            xi = _point_values(kj, batch)
            pj = phi.jet(x, xi, order + 2)
            gk = [pj.derivative(d + i) for i in range(s)]  # order+1
            g2 = _sumsq(gk)
            if np.any(np.abs(g2.value) < 1e-14):
                raise RegularizerRefused("grad_xi phi vanishes on a sample")
            binv = g2.recip()
            b = [1j * binv * gk[j] for j in range(s)]
            aj = a.jet(x, xi, order + 1)
            acc = None
            for j in range(s):
                term = b[j] * aj.derivative(d + j) + b[j].derivative(d + j) * aj
                acc = term if acc is None else acc + term
            return acc.truncate(order)

        return SymbolFn(
            d, s, order_shift(a.order, -n, -nu), jet_fn, f"Q[{a.source}]"
        )

    def residual(self, x, xi) -> np.ndarray:
        """|tQ e^{i phi} - e^{i phi}| on the cone support (tQ f = -b.grad f)."""
        phi = self.phi
        d, s = phi.d, phi.s
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if xi.ndim == 1:
            xi = xi[:, None]
        gk = phi.grad_xi(x, xi)
        g2 = np.sum(gk * gk, axis=0)
        E = np.exp(1j * phi.value(x, xi))
        tQE = np.sum((-1j * gk / g2) * (1j * gk), axis=0) * E
        return np.abs(tQE - E)


def build_Q(
    phi: PhaseFn,
    localizer: ConeLocalizer,
    protocol: ScanProtocol = DEFAULT_PROTOCOL,
) -> RegularizerQ:
    """Refuses construction when |grad_xi phi|^2 is not elliptic at order
    (2n, 2nu-2) over the localizer's cone support."""
    require_admissible(phi, protocol)
    n, nu = phi.order
    from .phase import grad_xi_sq_symbol
    from .symbols import scaled_ratio

    X, K, valid = localizer.support_samples(phi.d, phi.s, protocol)
    ratios = scaled_ratio(grad_xi_sq_symbol(phi), (2 * n, 2 * nu - 2), X, K)
    mn = float(np.min(np.where(valid, ratios, math.inf)))
    if mn < protocol.c0:
        raise RegularizerRefused(
            f"|grad_xi phi|^2 loses ellipticity on the localizer (min ratio {mn:.3g})"
        )
    return RegularizerQ(phi=phi, localizer=localizer, min_ratio=mn, protocol=protocol)


# -- the (x, p) operator Qp -----------------------------------------------------------


@dataclass
class RegularizerQp:
    """Q = b.grad_x + c with b = i eta_p^-1 psi_y (grad_x phi - p), for p in a
    region around the target covariable."""

    phi: PhaseFn
    y: CompactPoint
    q: CompactPoint
    psi_y: SpatialCutoff
    min_ratio: float
    protocol: ScanProtocol

    def eta_p(self, x, xi, p) -> np.ndarray:
        g = self.phi.grad_x(x, xi).real
        return np.sum((g - p) ** 2, axis=0)

    def residual(self, x, xi, p) -> np.ndarray:
        """|tQ e^{i(phi - x.p)} - psi_y e^{i(phi - x.p)}|."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        p = np.asarray(p, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if xi.ndim == 1:
            xi = xi[:, None]
        if p.ndim == 1:
            p = p[:, None]
        g = self.phi.grad_x(x, xi).real
        etap = np.sum((g - p) ** 2, axis=0)
        psi = self.psi_y.value(x).real
        E = np.exp(1j * (self.phi.value(x, xi) - np.sum(x * p, axis=0)))
        # tQ f = -b.grad_x f with b = i etap^-1 psi (g - p)
        tQE = np.sum((-1j * psi[None, :] * (g - p) / etap) * (1j * (g - p)), axis=0) * E
        return np.abs(tQE - psi * E)


def build_Qp(
    phi: PhaseFn,
    y: CompactPoint,
    q: CompactPoint,
    xi_region: CompactPoint,
    protocol: ScanProtocol = DEFAULT_PROTOCOL,
    cutoff_width: float = 1.0,
) -> RegularizerQp:
    """Refuses construction unless eta_p(x, xi) = |grad_x phi - p|^2 dominates
    (<x>^(n-1) <xi>^nu + |p|)^2 on the sampled cone support."""
    require_admissible(phi, protocol)
    n, nu = phi.order
    from .compactify import japanese_bracket

    gx = side_grid(y, phi.d, protocol)
    gk = side_grid(xi_region, phi.s, protocol)
    X, K, valid = cross_sides(gx, gk)
    g = phi.grad_x(X, K).real
    worst = math.inf
    if q.is_boundary:
        # exact infimum over the covariable cone (projection onto the ray),
        # plus the recorded dyadic sweep
        from .phase import _dist_to_cone

        dist, pnorm = _dist_to_cone(g, q.array, protocol.delta, 1.0)
        denom = japanese_bracket(X) ** (n - 1.0) * japanese_bracket(K) ** nu + pnorm
        worst = float(np.min(np.where(valid, dist / denom, math.inf)))
        ps = [rho * q.array for rho in (2.0 ** np.arange(0, 11))]
    else:
        from .compactify import euclidean_ball

        ps = list(euclidean_ball(q.array, protocol.finite_radius))
    for p in ps:
        dist = np.linalg.norm(g - np.asarray(p)[:, None], axis=0)
        denom = japanese_bracket(X) ** (n - 1.0) * japanese_bracket(K) ** nu + np.linalg.norm(p)
        ratio = np.where(valid, dist / denom, math.inf)
        worst = min(worst, float(np.min(ratio)))
    if worst < protocol.c0:
        raise RegularizerRefused(
            f"eta_p bound fails on the cone support (min ratio {worst:.3g})"
        )
    return RegularizerQp(
        phi=phi,
        y=y,
        q=q,
        psi_y=SpatialCutoff(y, width=cutoff_width),
        min_ratio=worst,
        protocol=protocol,
    )

"""Space-time nonlocal limit model: dispersion residual and band tracing.

The equation of motion combines a centered second difference over the
temporal horizon T0 with Gaussian spatial kernels C1, C2 and a unit time
kernel on [0, 1]:

  (u(t-T0) - 2u(t) + u(t+T0)) / (2 T0^2)
  + int_y int_0^1 C1(y) K(tau) [Dtau u(x) - Dtau u(x+y)] dtau dy
  = int_y C2(y) (u(x+y) - u(x)) dy,       Dtau u = u(t-tau) - 2u(t) + u(t+tau)

With C1 = a e^{-y^2}/sqrt(pi), C2 = b e^{-y^2}/sqrt(pi), a plane wave
e^{i(w t - k x)} turns every term into a closed form; the default
constants (T0 = 0.8, a = 0.01, b = 2) give the residual

  sin(w)/(50 w) (1 - e^{-k^2/4}) - (25/8) sin^2(0.4 w) + (99/50)(1 - e^{-k^2/4})
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "NonlocalParams",
    "nlt_residual",
    "nlt_bands",
    "nlt_integral_dispersion_check",
]


@dataclass(frozen=True)
class NonlocalParams:
    """Temporal horizon and Gaussian kernel amplitudes."""

    t0: float = 0.8
    c1_amp: float = 0.01
    c2_amp: float = 2.0
    time_kernel_on: bool = True   # K(tau) = 1 on [0, 1]

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.c1_amp < 0 or self.c2_amp < 0:
            raise ValueError("kernel amplitudes must be nonnegative")


def _sinc(x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) < 1e-8, 1.0 - x * x / 6.0,
                   np.sin(np.where(x == 0, 1.0, x)) / np.where(x == 0, 1.0, x))
    return out if out.ndim else float(out)


def nlt_residual(params: NonlocalParams, k: float, omega: float) -> float:
    """Closed-form plane-wave residual of the nonlocal equation of motion.

    Even in both k and omega; the omega -> 0 limit uses sinc continuity.
    """
    gk = math.exp(-k * k / 4.0)           # Gaussian transform e^{-k^2/4}
    # discrete time term: -4 sin^2(w T0 / 2) / (2 T0^2)
    term_t = -2.0 * (math.sin(0.5 * omega * params.t0) ** 2
                     if omega != 0.0 else 0.0) / params.t0 ** 2
    # temporal kernel integral over [0, 1]: int (2cos(w tau) - 2) dtau
    if params.time_kernel_on:
        kern = 2.0 * float(_sinc(omega)) - 2.0
    else:
        kern = 0.0
    term_c1 = params.c1_amp * (1.0 - gk) * kern
    term_c2 = params.c2_amp * (1.0 - gk)
    return term_t + term_c1 + term_c2


def nlt_bands(params: NonlocalParams, k_grid, omega_max: float,
              n_scan: int = 2000) -> list[np.ndarray]:
    """Dispersion branches omega_n(k) traced by per-k frequency scans.

    Returns a list of curves, each an array aligned with ``k_grid`` (NaN
    where a branch leaves the window).  Tangent double roots (as at k = 0,
    where the residual touches zero at omega = 2.5 pi n) are recovered
    from near-zero extrema.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    all_roots: list[list[float]] = []
    for k in k_grid:
        def f(w):
            return nlt_residual(params, k, w)

        ws = np.linspace(1e-9, omega_max, n_scan)
        vals = np.array([f(w) for w in ws])
        roots = []
        for i in range(1, n_scan):
            if vals[i - 1] == 0.0:
                roots.append(ws[i - 1])
            elif vals[i - 1] * vals[i] < 0.0:
                roots.append(brentq(f, ws[i - 1], ws[i], xtol=1e-12))
        for i in range(1, n_scan - 1):
            v0, v1, v2 = vals[i - 1], vals[i], vals[i + 1]
            if v0 * v1 < 0 or v1 * v2 < 0 or v1 == 0.0:
                continue
            if abs(v1) < abs(v0) and abs(v1) <= abs(v2) and abs(v1) < 1e-3:
                res = minimize_scalar(lambda w: f(w) ** 2,
                                      bounds=(ws[i - 1], ws[i + 1]),
                                      method="bounded",
                                      options={"xatol": 1e-13})
                w_star = float(res.x)
                if abs(f(w_star)) < 1e-10:
                    roots.append(w_star)
                elif f(w_star) * v1 < 0.0:
                    roots.append(brentq(f, ws[i - 1], w_star, xtol=1e-12))
                    roots.append(brentq(f, w_star, ws[i + 1], xtol=1e-12))
        all_roots.append(sorted(roots))

    n_bands = max(len(r) for r in all_roots)
    curves = []
    for n in range(n_bands):
        curve = np.full(k_grid.shape, np.nan)
        for i, roots in enumerate(all_roots):
            if n < len(roots):
                curve[i] = roots[n]
        curves.append(curve)
    return curves


def nlt_integral_dispersion_check(params: NonlocalParams, k: float,
                                  omega: float, n_tau: int = 64,
                                  n_y: int = 200) -> tuple[float, float]:
    """(quadrature residual, closed-form residual) for a plane wave.

    The kernels are integrated by Gauss-Legendre quadrature, tau over the
    unit kernel support and y over +-8 standard deviations of the
    Gaussians; the pair must agree to quadrature accuracy.
    """
    gn_t, gw_t = leggauss(n_tau)
    tau = 0.5 * (gn_t + 1.0)
    w_tau = 0.5 * gw_t
    gn_y, gw_y = leggauss(n_y)
    half_width = 8.0 / math.sqrt(2.0)   # 8 std devs of e^{-y^2}
    y = half_width * gn_y
    w_y = half_width * gw_y

    gauss = np.exp(-y * y) / math.sqrt(math.pi)
    # spatial factor int C(y) (1 - e^{-i k y}) dy, real part by symmetry
    spatial = np.sum(w_y * gauss * (1.0 - np.cos(k * y)))

    term_t = (2.0 * math.cos(omega * params.t0) - 2.0) / (2.0 * params.t0 ** 2)
    if params.time_kernel_on:
        kern = float(np.sum(w_tau * (2.0 * np.cos(omega * tau) - 2.0)))
    else:
        kern = 0.0
    # residual = LHS - RHS; the C2 side contributes -c2 (gk - 1) = +c2*spatial
    quad = term_t + params.c1_amp * kern * spatial + params.c2_amp * spatial
    closed = nlt_residual(params, k, omega)
    return float(quad), float(closed)

"""Rational-function approximation of laminate dispersion bands.

A single band is approximated by

    w^2(k^2) = (N_1 k^2 + ... + N_n k^{2n}) / (D_0 + D_1 k^2 + ... + D_n k^{2n})

with nonnegative coefficients, D_0 pinned to the mean density and N_1 to
the static (harmonic-mean) modulus so the long-wavelength speed is exact.
Two bands combine an acoustic branch of that form with an optic branch
w^2 = wb^2 - p k^2/(1 + q k^2); their product gives a single dispersion
polynomial of degree two in w^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar, nnls

from lamwave.laminate import UnitCell, band_edges_1d, dispersion_rhs_1d, dispersion_rhs_2d

__all__ = [
    "RationalBranch1D",
    "TensorBranch2D",
    "OpticBranch",
    "MultibandModel",
    "PAPER_MASKS",
    "band1_omega_of_k",
    "band_omega_grid_2d",
    "fit_branch_1d",
    "fit_branch_2d",
    "fit_two_band",
    "derive_multiband_coeffs",
]

# free coefficients per order, reproducing the reference sparsity patterns
PAPER_MASKS = {
    22: ("D1",),
    44: ("N2", "D2"),
    66: ("N3", "D1", "D3"),
    88: ("N4", "D1", "D4"),
}

_ORDER_DEGREE = {22: 1, 44: 2, 66: 3, 88: 4}


@dataclass(frozen=True)
class RationalBranch1D:
    """Scalar rational branch; num[i] multiplies k^{2(i+1)}, den[i] k^{2i}."""

    num: tuple[float, ...]
    den: tuple[float, ...]
    mask: tuple[str, ...] = ()
    rms_misfit: float = float("nan")

    def __post_init__(self):
        if any(c < 0 for c in self.num) or any(c < 0 for c in self.den):
            raise ValueError("rational branch coefficients must be nonnegative")
        if len(self.num) != len(self.den) - 1:
            raise ValueError("numerator must have one fewer entry than denominator")

    @property
    def order(self) -> int:
        return len(self.num)

    def omega_sq(self, k):
        k2 = np.asarray(k, dtype=float) ** 2
        num = np.zeros_like(k2)
        den = np.zeros_like(k2)
        for i, c in enumerate(self.num):
            num = num + c * k2 ** (i + 1)
        for i, c in enumerate(self.den):
            den = den + c * k2 ** i
        return num / den

    def omega(self, k):
        return np.sqrt(self.omega_sq(k))

    def cap_sq(self) -> float:
        """Large-k limit of w^2 (inf when the top denominator entry is 0)."""
        n_top, d_top = self.num[-1], self.den[-1]
        return n_top / d_top if d_top > 0 else float("inf")


@dataclass(frozen=True)
class TensorBranch2D:
    """Acoustic tensor branch w^2 = N:KK / (D0 + D:KK), diagonal tensors."""

    n_diag: tuple[float, float]
    d_diag: tuple[float, float]
    d0: float = 1.0
    rms_misfit: float = float("nan")

    def __post_init__(self):
        if min(self.n_diag) < 0 or min(self.d_diag) < 0 or self.d0 <= 0:
            raise ValueError("tensor branch requires PSD tensors and D0 > 0")

    def omega_sq(self, k1, k2):
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        num = self.n_diag[0] * k1 ** 2 + self.n_diag[1] * k2 ** 2
        den = self.d0 + self.d_diag[0] * k1 ** 2 + self.d_diag[1] * k2 ** 2
        return num / den


@dataclass(frozen=True)
class OpticBranch:
    """Second band w^2 = wb^2 - P:KK/(1 + Q:KK); x2 entries unused in 1-d.

    Rational branches (Q > 0) need nonnegative P to stay singularity-free.
    The degenerate polynomial family (Q = 0) has no denominator and may
    carry negative P entries, which it needs to follow a band that rises
    with the normal wavenumber.
    """

    omega_b: float
    p_diag: tuple[float, float]
    q_diag: tuple[float, float]
    rms_misfit: float = float("nan")

    def __post_init__(self):
        if self.omega_b <= 0:
            raise ValueError("omega_b must be positive")
        if min(self.q_diag) < 0:
            raise ValueError("optic branch Q must be nonnegative")
        if max(self.q_diag) > 0 and min(self.p_diag) < 0:
            raise ValueError("rational optic branch requires nonnegative P")

    def omega_sq(self, k1, k2=0.0):
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        num = self.p_diag[0] * k1 ** 2 + self.p_diag[1] * k2 ** 2
        den = 1.0 + self.q_diag[0] * k1 ** 2 + self.q_diag[1] * k2 ** 2
        return self.omega_b ** 2 - num / den

    def floor_sq(self, direction: int = 0) -> float:
        """Large-k limit of w^2 along the given axis."""
        p, q = self.p_diag[direction], self.q_diag[direction]
        if q > 0:
            return self.omega_b ** 2 - p / q
        return self.omega_b ** 2 if p == 0 else -float("inf")


@dataclass(frozen=True)
class MultibandModel:
    """Acoustic + optic branch pair with the derived PDE coefficients.

    The A coefficients come from expanding the product dispersion
    (w^2 - wa^2)(w^2 - wb^2) = 0 in even powers of w and k:
    A1 = q + d, A2 = q d, A3 = -wb^2 d q + p d - n q,
    A4 = p - wb^2 (q + d) - n, A5 = wb^2, A6 = wb^2 n, A7 = wb^2 n q - n p;
    per-axis tensor products of the diagonals in 2-d.
    """

    acoustic: RationalBranch1D | TensorBranch2D
    optic: OpticBranch
    coeffs: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return 2 if isinstance(self.acoustic, TensorBranch2D) else 1


def band1_omega_of_k(cell: UnitCell, k_grid, band: int = 1) -> np.ndarray:
    """Invert the exact 1-d dispersion for omega on a Bloch wavenumber grid."""
    h = cell.period
    lo, hi = band_edges_1d(cell, band)
    lo = max(lo, 1e-9)
    k_grid = np.atleast_1d(np.asarray(k_grid, dtype=float))
    out = np.empty_like(k_grid)
    for i, k in enumerate(k_grid):
        target = math.cos(k * h)

        def f(w):
            return dispersion_rhs_1d(cell, w) - target

        a, b = lo, hi
        if f(a) * f(b) > 0:
            a, b = lo * (1 - 1e-9), hi * (1 + 1e-9)
        out[i] = brentq(f, a, b, xtol=1e-13, rtol=1e-15)
    return out


def band_omega_grid_2d(cell: UnitCell, k1_grid, k2_grid,
                       band: int = 1) -> np.ndarray:
    """omega over a (k1, k2) grid for the requested band (lowest = 1)."""
    h = cell.period
    k1_grid = np.asarray(k1_grid, dtype=float)
    k2_grid = np.asarray(k2_grid, dtype=float)
    out = np.empty((k1_grid.size, k2_grid.size))
    cmax = max(cell.layer_a.wave_speed, cell.layer_b.wave_speed)
    for j, k2 in enumerate(k2_grid):
        s = k2 * k2
        w_hi = 1.5 * (band + 1) * math.pi * cmax / h + cmax * abs(k2)
        for i, k1 in enumerate(k1_grid):
            # zone-center/edge values are tangencies for gapless cells;
            # evaluate a hair inside the zone instead
            if abs(math.sin(k1 * h)) < 1e-5:
                k1 = (1e-5 / h) if math.cos(k1 * h) > 0 else (math.pi - 1e-5) / h
            target = math.cos(k1 * h)

            def f(w):
                return dispersion_rhs_2d(cell, w, s) - target

            n_scan = 500 * (band + 1)
            ws = np.linspace(1e-9, w_hi, n_scan)
            vals = np.asarray(dispersion_rhs_2d(cell, ws, s)) - target
            roots: list[float] = []
            for idx in range(1, n_scan):
                v0, v1 = vals[idx - 1], vals[idx]
                if v0 == 0.0:
                    roots.append(ws[idx - 1])
                elif v0 * v1 < 0.0:
                    roots.append(brentq(f, ws[idx - 1], ws[idx],
                                        xtol=1e-12, rtol=1e-14))
                elif (idx < n_scan - 1 and abs(v1) < 1e-3
                      and abs(v1) < abs(v0) and abs(v1) <= abs(vals[idx + 1])
                      and v1 * vals[idx + 1] > 0.0):
                    # near-zero local extremum: a band tangency or a close
                    # root pair hiding between grid points
                    res = minimize_scalar(lambda w: f(w) ** 2,
                                          bounds=(ws[idx - 1], ws[idx + 1]),
                                          method="bounded",
                                          options={"xatol": 1e-13})
                    w_star = float(res.x)
                    if f(w_star) * v1 < 0.0:
                        roots.append(brentq(f, ws[idx - 1], w_star,
                                            xtol=1e-12, rtol=1e-14))
                        roots.append(brentq(f, w_star, ws[idx + 1],
                                            xtol=1e-12, rtol=1e-14))
                    elif abs(f(w_star)) < 1e-8:
                        roots.extend([w_star, w_star])
                if len(roots) >= band:
                    break
            if len(roots) < band:
                raise RuntimeError(f"band {band} not found at (k1={k1}, k2={k2})")
            out[i, j] = sorted(roots)[band - 1]
    return out


def _nnls_fit(columns: list[np.ndarray], rhs: np.ndarray) -> np.ndarray:
    if not columns:
        return np.zeros(0)
    a = np.column_stack(columns)
    scale = np.max(np.abs(a), axis=0)
    scale[scale == 0] = 1.0
    x, _ = nnls(a / scale, rhs)
    return x / scale


def fit_branch_1d(cell: UnitCell, order: int = 22,
                  samples: np.ndarray | None = None,
                  mask: tuple[str, ...] | None = None,
                  cap_floor: float | str | None = None) -> RationalBranch1D:
    """Nonnegative least squares on w^2 den(k^2) - num(k^2) over band 1.

    D0 (mean density) and N1 (harmonic-mean modulus) are pinned so the
    static limit is exact; the free coefficients are the ``mask`` names
    (defaults to the per-order reference patterns).

    ``cap_floor`` keeps the large-k limit sqrt(N_top/D_top) at or above
    the given frequency ("edge" = the exact band-1 top).  The
    unconstrained optimum can cap below the band edge, which plants
    spurious propagating modes inside the pass band and litters slab
    solutions with artificial resonances; branches used to build
    scattering media should be fitted with the floor on.
    """
    if order not in _ORDER_DEGREE:
        raise ValueError(f"order must be one of {sorted(_ORDER_DEGREE)}")
    n_ord = _ORDER_DEGREE[order]
    mask = tuple(mask if mask is not None else PAPER_MASKS[order])
    for name in mask:
        idx = int(name[1:])
        if name[0] not in "ND" or not (1 <= idx <= n_ord) or name in ("N1", "D0"):
            raise ValueError(f"invalid free coefficient {name!r} for RF{order}")

    h = cell.period
    if samples is None:
        samples = np.linspace(math.pi / (200 * h), math.pi / h, 200)
    k = np.asarray(samples, dtype=float)
    w = band1_omega_of_k(cell, k)
    w2, k2 = w * w, k * k

    d0 = cell.mean_density
    n1 = cell.harmonic_modulus
    rhs = w2 * d0 - n1 * k2

    top_n, top_d = f"N{n_ord}", f"D{n_ord}"
    cap2 = None
    if cap_floor is not None and top_n in mask and top_d in mask and n_ord > 1:
        edge = band_edges_1d(cell, 1)[1] if cap_floor == "edge" else float(cap_floor)
        cap2 = edge * edge

    cols, names = [], []
    for name in mask:
        i = int(name[1:])
        if cap2 is not None and name == top_n:
            # parametrize N_top = cap2*beta + gamma, D_top = beta with
            # beta, gamma >= 0: encodes N_top/D_top >= cap2 exactly
            cols.append(k2 ** i)
            names.append("_gamma")
        elif cap2 is not None and name == top_d:
            cols.append(k2 ** n_ord * (cap2 - w2))
            names.append("_beta")
        else:
            cols.append(k2 ** i if name[0] == "N" else -w2 * k2 ** i)
            names.append(name)
    x = _nnls_fit(cols, rhs)

    values = dict(zip(names, x))
    if cap2 is not None:
        beta = float(values.pop("_beta", 0.0))
        gamma = float(values.pop("_gamma", 0.0))
        values[top_d] = beta
        values[top_n] = cap2 * beta + gamma

    num = [0.0] * n_ord
    den = [0.0] * (n_ord + 1)
    num[0], den[0] = n1, d0
    for name, val in values.items():
        i = int(name[1:])
        if name[0] == "N":
            num[i - 1] = float(val)
        else:
            den[i] = float(val)
    branch = RationalBranch1D(tuple(num), tuple(den), mask)
    w_fit = branch.omega(k)
    rms = float(np.sqrt(np.mean((w_fit - w) ** 2)) / np.sqrt(np.mean(w ** 2)))
    return replace(branch, rms_misfit=rms)


def fit_branch_2d(cell: UnitCell,
                  k1_grid: np.ndarray | None = None,
                  k2_grid: np.ndarray | None = None) -> TensorBranch2D:
    """Diagonal tensor fit of band 1 over a (k1, k2) grid, D0 = 1.

    No static pinning here: the least squares balances the whole fitted
    region, which is what the reference tensor coefficients reflect.
    """
    h = cell.period
    if k1_grid is None:
        k1_grid = np.linspace(math.pi / (30 * h), math.pi / h, 30)
    if k2_grid is None:
        # band 1 is sampled out to 1.5 pi/h normal to the laminae; there is
        # no Brillouin folding in that direction
        k2_grid = np.linspace(1.5 * math.pi / (30 * h), 1.5 * math.pi / h, 30)
    w = band_omega_grid_2d(cell, k1_grid, k2_grid)
    k1m, k2m = np.meshgrid(k1_grid, k2_grid, indexing="ij")
    w2 = (w * w).ravel()
    a1, a2 = (k1m ** 2).ravel(), (k2m ** 2).ravel()

    d0 = 1.0
    cols = [a1, a2, -w2 * a1, -w2 * a2]
    x = _nnls_fit(cols, w2 * d0)
    branch = TensorBranch2D((float(x[0]), float(x[1])),
                            (float(x[2]), float(x[3])), d0)
    w_fit = np.sqrt(branch.omega_sq(k1m, k2m)).ravel()
    rms = float(np.sqrt(np.mean((w_fit - w.ravel()) ** 2))
                / np.sqrt(np.mean(w2)))
    return replace(branch, rms_misfit=rms)


def _fit_optic_1d(cell: UnitCell, pin_gap: bool) -> OpticBranch:
    h = cell.period
    lo2, hi2 = band_edges_1d(cell, 2)
    k = np.linspace(math.pi / (200 * h), math.pi / h, 200)
    w = band1_omega_of_k(cell, k, band=2)
    w2, k2 = w * w, k * k
    omega_b = hi2  # exact band-2 frequency at k = 0
    if pin_gap:
        # the branch floor is pinned onto the exact band-2 lower edge
        # (p = gamma q); the remaining scalar minimizes the frequency
        # residual itself rather than a denominator-weighted proxy
        gamma = omega_b ** 2 - lo2 ** 2

        def misfit(qv):
            w_fit2 = omega_b ** 2 - gamma * qv * k2 / (1.0 + qv * k2)
            return float(np.mean((w_fit2 - w2) ** 2))

        res = minimize_scalar(misfit, bounds=(0.0, 1e3), method="bounded",
                              options={"xatol": 1e-12})
        q = float(res.x)
        p = gamma * q
    else:
        x = _nnls_fit([k2, (omega_b ** 2 - w2) * k2], omega_b ** 2 - w2)
        p, q = float(x[0]), float(x[1])
    branch = OpticBranch(omega_b, (p, p), (q, q))
    w_fit = np.sqrt(np.maximum(branch.omega_sq(k), 0.0))
    rms = float(np.sqrt(np.mean((w_fit - w) ** 2)) / np.sqrt(np.mean(w ** 2)))
    return replace(branch, rms_misfit=rms)


def _fit_optic_2d(cell: UnitCell, k1_grid, k2_grid) -> OpticBranch:
    """Optic tensor branch: in-plane part from the gap-pinned axis fit,
    normal part from a scalar frequency-residual fit.

    The exact band 2 grows with k2 without bound while the branch form
    saturates at omega_b, so P22 is structurally zero and Q22 alone sets
    the k2 response; it is fitted on the region the form can represent
    (omega <= omega_b).
    """
    h = cell.period
    if k1_grid is None:
        k1_grid = np.linspace(math.pi / (30 * h), math.pi / h, 30)
    if k2_grid is None:
        k2_grid = np.linspace(1.5 * math.pi / (30 * h), 1.5 * math.pi / h, 30)
    axis = _fit_optic_1d(cell, pin_gap=True)
    p11, q11 = axis.p_diag[0], axis.q_diag[0]
    omega_b = axis.omega_b

    w = band_omega_grid_2d(cell, k1_grid, k2_grid, band=2)
    k1m, k2m = np.meshgrid(k1_grid, k2_grid, indexing="ij")
    w2 = (w * w).ravel()
    a1, a2 = (k1m ** 2).ravel(), (k2m ** 2).ravel()
    keep = w2 <= omega_b ** 2
    w2, a1, a2 = w2[keep], a1[keep], a2[keep]

    def misfit(q22):
        w_fit2 = omega_b ** 2 - p11 * a1 / (1.0 + q11 * a1 + q22 * a2)
        return float(np.mean((w_fit2 - w2) ** 2))

    res = minimize_scalar(misfit, bounds=(0.0, 50.0), method="bounded",
                          options={"xatol": 1e-10})
    q22 = float(res.x)
    branch = OpticBranch(omega_b, (p11, 0.0), (q11, q22))
    w_fit = np.sqrt(np.maximum(
        branch.omega_sq(np.sqrt(a1), np.sqrt(a2)), 0.0))
    rms = float(np.sqrt(np.mean((w_fit - np.sqrt(w2)) ** 2))
                / np.sqrt(np.mean(w2)))
    return replace(branch, rms_misfit=rms)


def fit_two_band(cell: UnitCell, dimension: int = 1, pin_gap: bool = True,
                 k1_grid=None, k2_grid=None,
                 family: str = "rational") -> MultibandModel:
    """Two-band model: RF22-type acoustic branch plus an optic branch.

    1-d with ``pin_gap``: the acoustic saturation frequency sqrt(n/d) sits
    exactly on the band-1 top edge and the optic floor on the band-2
    bottom edge, so the model's stop band equals the exact gap.

    ``family="polynomial"`` drops all denominators (D = Q = 0), the
    strain-gradient-style comparison model; its coefficients come from
    plain least squares on w^2 (axis first, then the normal response).
    """
    if family == "polynomial":
        return _fit_two_band_polynomial(cell, dimension, k1_grid, k2_grid)
    if family != "rational":
        raise ValueError("family must be 'rational' or 'polynomial'")
    if dimension == 1:
        d0 = cell.mean_density
        n = cell.harmonic_modulus / d0
        if pin_gap:
            edge1 = band_edges_1d(cell, 1)[1]
            d = n / edge1 ** 2
        else:
            h = cell.period
            k = np.linspace(math.pi / (200 * h), math.pi / h, 200)
            w = band1_omega_of_k(cell, k)
            x = _nnls_fit([-(w * w) * k * k], w * w - n * k * k)
            d = float(x[0])
        acoustic = RationalBranch1D((n,), (1.0, d))
        k = np.linspace(math.pi / (200 * cell.period), math.pi / cell.period, 200)
        w_ex = band1_omega_of_k(cell, k)
        rms = float(np.sqrt(np.mean((acoustic.omega(k) - w_ex) ** 2))
                    / np.sqrt(np.mean(w_ex ** 2)))
        acoustic = replace(acoustic, rms_misfit=rms)
        optic = _fit_optic_1d(cell, pin_gap)
    elif dimension == 2:
        acoustic = fit_branch_2d(cell, k1_grid, k2_grid)
        optic = _fit_optic_2d(cell, k1_grid, k2_grid)
    else:
        raise ValueError("dimension must be 1 or 2")
    model = MultibandModel(acoustic, optic)
    return replace(model, coeffs=derive_multiband_coeffs(model))


def _fit_two_band_polynomial(cell: UnitCell, dimension: int,
                             k1_grid, k2_grid) -> MultibandModel:
    h = cell.period
    k = np.linspace(math.pi / (200 * h), math.pi / h, 200)
    w1sq = band1_omega_of_k(cell, k) ** 2
    w2sq = band1_omega_of_k(cell, k, band=2) ** 2
    omega_b = band_edges_1d(cell, 2)[1]
    k2s = k * k
    n11 = float(np.dot(k2s, w1sq) / np.dot(k2s, k2s))
    p11 = float(np.dot(k2s, omega_b ** 2 - w2sq) / np.dot(k2s, k2s))
    if dimension == 1:
        acoustic = RationalBranch1D((n11,), (1.0, 0.0))
        optic = OpticBranch(omega_b, (p11, p11), (0.0, 0.0))
    else:
        if k1_grid is None:
            k1_grid = np.linspace(math.pi / (30 * h), math.pi / h, 30)
        if k2_grid is None:
            k2_grid = np.linspace(1.5 * math.pi / (30 * h),
                                  1.5 * math.pi / h, 30)
        wg1 = band_omega_grid_2d(cell, k1_grid, k2_grid) ** 2
        wg2 = band_omega_grid_2d(cell, k1_grid, k2_grid, band=2) ** 2
        k1m, k2m = np.meshgrid(k1_grid, k2_grid, indexing="ij")
        a1, a2 = (k1m ** 2).ravel(), (k2m ** 2).ravel()
        # acoustic: joint LS; optic: axis P11 above, normal response by LS
        x = _nnls_fit([a1, a2], wg1.ravel())
        acoustic = TensorBranch2D((float(x[0]), float(x[1])), (0.0, 0.0), 1.0)
        resid = omega_b ** 2 - wg2.ravel() - p11 * a1
        p22 = float(np.dot(a2, resid) / np.dot(a2, a2))
        optic = OpticBranch(omega_b, (p11, p22), (0.0, 0.0))
    model = MultibandModel(acoustic, optic)
    return replace(model, coeffs=derive_multiband_coeffs(model))


def derive_multiband_coeffs(model: MultibandModel) -> dict:
    """A-coefficients of the product dispersion.

    Scalars in 1-d; in 2-d, A1/A4/A6 are per-axis pairs and A2/A3/A7 are
    2x2 arrays of diagonal products indexed (gradient axis, gradient axis).
    """
    wb2 = model.optic.omega_b ** 2
    if model.dimension == 1:
        if not isinstance(model.acoustic, RationalBranch1D) or \
                model.acoustic.order != 1:
            raise TypeError("1-d two-band model needs an RF22 acoustic branch")
        n = model.acoustic.num[0] / model.acoustic.den[0]
        d = model.acoustic.den[1] / model.acoustic.den[0]
        p, q = model.optic.p_diag[0], model.optic.q_diag[0]
        return {
            "A1": q + d,
            "A2": q * d,
            "A3": -wb2 * d * q + p * d - n * q,
            "A4": p - wb2 * q - wb2 * d - n,
            "A5": wb2,
            "A6": wb2 * n,
            "A7": wb2 * n * q - n * p,
        }
    ac: TensorBranch2D = model.acoustic
    n = np.array(ac.n_diag) / ac.d0
    d = np.array(ac.d_diag) / ac.d0
    p = np.array(model.optic.p_diag)
    q = np.array(model.optic.q_diag)
    return {
        "A1": q + d,
        "A2": np.outer(d, q),
        "A3": -wb2 * np.outer(d, q) + np.outer(d, p) - np.outer(n, q),
        "A4": -wb2 * (q + d) + p - n,
        "A5": wb2,
        "A6": wb2 * n,
        "A7": wb2 * np.outer(n, q) - np.outer(n, p),
    }

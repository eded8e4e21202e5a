"""Scattering with the higher-order homogenized media.

Each medium has piecewise-constant coefficients, so time-harmonic fields
are superpositions of exponential modes; the continuity conditions come
in (natural, essential) pairs generated by the variational structure:

  single band, order m:   g_j paired with [[d^j u]], j = 0..m-1,
      g_j = sum_{i>j} (-1)^{i-j-1} d^{i-j-1}( T_i d^i u ),  T_i = N_i - w^2 D_i
  two bands:              (g_0, [[u]]) and (g_1, [[du]]),
      g_0 = H du - d(G d^2 u),  g_1 = G d^2 u,
      H = w^4 A1 + w^2 A4 + A6,  G = w^4 A2 + w^2 A3 + A7

At an interface where one side has no coefficient entering a pair with
j >= 1, that pair contributes the single one-sided natural condition;
the j = 0 pair (displacement and total traction) always contributes two
equations.  This keeps every system square.

Time-harmonic convention u = u_hat e^{i w t}, rightward factor e^{-i k x};
in 2-d all fields share e^{-i k1 x1} and x2 plays the role of x.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from lamwave.finescale import ScatteringSolution
from lamwave.ratfit import MultibandModel, RationalBranch1D, TensorBranch2D

__all__ = [
    "HomogenizedMedium",
    "InterfaceStack",
    "Mode",
    "ModeSet",
    "classical_1d",
    "classical_2d",
    "single_band_1d",
    "single_band_2d",
    "two_band_1d",
    "two_band_2d",
    "char_roots",
    "assemble_interface_system",
    "solve_scattering_hom",
    "energy_flux_hom",
    "energy_density_hom",
    "displacement_field_hom",
    "particle_energy_demo",
]

_COEF_TOL = 1e-12


@dataclass(frozen=True)
class HomogenizedMedium:
    """One homogenized material: kind tag, coefficient container, provenance."""

    kind: str
    coeffs: object
    provenance: str = "fitted"

    def __post_init__(self):
        kinds = ("single_band_1d", "single_band_2d", "two_band_1d", "two_band_2d")
        if self.kind not in kinds:
            raise ValueError(f"kind must be one of {kinds}")

    @property
    def bands(self) -> int:
        return 2 if self.kind.startswith("two_band") else 1

    @property
    def dimension(self) -> int:
        return 2 if self.kind.endswith("2d") else 1


def classical_1d(modulus: float, density: float = 1.0) -> HomogenizedMedium:
    branch = RationalBranch1D((modulus,), (density, 0.0))
    return HomogenizedMedium("single_band_1d", branch, "classical-limit")


def classical_2d(modulus: float, density: float = 1.0) -> HomogenizedMedium:
    branch = TensorBranch2D((modulus, modulus), (0.0, 0.0), density)
    return HomogenizedMedium("single_band_2d", branch, "classical-limit")


def single_band_1d(branch: RationalBranch1D,
                   provenance: str = "fitted") -> HomogenizedMedium:
    return HomogenizedMedium("single_band_1d", branch, provenance)


def single_band_2d(branch: TensorBranch2D,
                   provenance: str = "fitted") -> HomogenizedMedium:
    return HomogenizedMedium("single_band_2d", branch, provenance)


def two_band_1d(model: MultibandModel,
                provenance: str = "fitted") -> HomogenizedMedium:
    if model.dimension != 1:
        raise ValueError("expected a 1-d multiband model")
    return HomogenizedMedium("two_band_1d", model, provenance)


def two_band_2d(model: MultibandModel,
                provenance: str = "fitted") -> HomogenizedMedium:
    if model.dimension != 2:
        raise ValueError("expected a 2-d multiband model")
    return HomogenizedMedium("two_band_2d", model, provenance)


@dataclass(frozen=True)
class Mode:
    """One exponential mode e^{-i k x} with its transport classification."""

    k: complex
    kind: str               # prop+ | prop- | evan+ | evan-
    vg: float | None = None
    branch: str = "rf"

    @property
    def outgoing_right(self) -> bool:
        return self.kind in ("prop+", "evan+")

    @property
    def outgoing_left(self) -> bool:
        return self.kind in ("prop-", "evan-")


@dataclass(frozen=True)
class ModeSet:
    omega: float
    k1: float | None
    modes: tuple[Mode, ...]

    def select(self, *kinds: str) -> list[Mode]:
        return [m for m in self.modes if m.kind in kinds]


# ---------------------------------------------------------------------------
# characteristic polynomials
# ---------------------------------------------------------------------------

def _single_band_T(branch, omega: float, k1: float | None):
    """(T_i for i = 1..m, constant term) of the polynomial in s = k^2."""
    w2 = omega * omega
    if isinstance(branch, RationalBranch1D):
        m = branch.order
        t = [branch.num[i - 1] - w2 * branch.den[i] for i in range(1, m + 1)]
        const = -w2 * branch.den[0]
        return t, const
    t = [branch.n_diag[1] - w2 * branch.d_diag[1]]
    const = (branch.n_diag[0] - w2 * branch.d_diag[0]) * k1 * k1 - w2 * branch.d0
    return t, const


def _two_band_GH(model: MultibandModel, omega: float):
    """G(w), H(w); scalars in 1-d, (2x2, 2-vector) arrays in 2-d.

    The fourth-order tensors are used through their (mn)<->(pq) symmetric
    part: the quadratic Lagrangian only sees that part, and the raw outer
    products would break interface flux conservation.
    """
    a = model.coeffs
    w2, w4 = omega ** 2, omega ** 4
    g = w4 * np.asarray(a["A2"]) + w2 * np.asarray(a["A3"]) + np.asarray(a["A7"])
    h = w4 * np.asarray(a["A1"]) + w2 * np.asarray(a["A4"]) + np.asarray(a["A6"])
    if np.ndim(g) == 2:
        g = 0.5 * (g + g.T)
    return g, h


def _char_poly(medium: HomogenizedMedium, omega: float,
               k1: float | None) -> np.ndarray:
    """Coefficients in descending powers of s = k^2 (k2^2 in 2-d)."""
    w2 = omega * omega
    if medium.bands == 1:
        t, const = _single_band_T(medium.coeffs, omega, k1)
        return np.array(list(reversed(t)) + [const], dtype=float)
    model: MultibandModel = medium.coeffs
    g, h = _two_band_GH(model, omega)
    a5 = model.coeffs["A5"]
    if medium.dimension == 1:
        return np.array([g, h, omega ** 4 - w2 * a5], dtype=float)
    k1sq = k1 * k1
    c2 = g[1, 1]
    c1 = (g[0, 1] + g[1, 0]) * k1sq + h[1]
    c0 = g[0, 0] * k1sq ** 2 + h[0] * k1sq + omega ** 4 - w2 * a5
    return np.array([c2, c1, c0], dtype=float)


def _dispersion_deriv(medium: HomogenizedMedium, omega: float, s: float,
                      k1: float | None):
    """(dP/ds, dP/domega) of the characteristic polynomial at (omega, s)."""
    ds = 1e-7 * max(1.0, abs(s))
    dw = 1e-7 * max(1.0, omega)

    def p(w, sv):
        return float(np.polyval(_char_poly(medium, w, k1), sv))

    p_s = (p(omega, s + ds) - p(omega, s - ds)) / (2 * ds)
    p_w = (p(omega + dw, s) - p(omega - dw, s)) / (2 * dw)
    return p_s, p_w


def _branch_tag(medium: HomogenizedMedium, omega: float, s: complex,
                k1: float | None) -> str:
    if medium.bands == 1:
        return "rf"
    model: MultibandModel = medium.coeffs
    w2 = omega * omega
    if medium.dimension == 1:
        ac: RationalBranch1D = model.acoustic
        n = ac.num[0] / ac.den[0]
        d = ac.den[1] / ac.den[0]
        wa = n * s / (1.0 + d * s)
        p, q = model.optic.p_diag[0], model.optic.q_diag[0]
        wb = model.optic.omega_b ** 2 - p * s / (1.0 + q * s)
    else:
        ac2: TensorBranch2D = model.acoustic
        k1sq = k1 * k1
        wa = (ac2.n_diag[0] * k1sq + ac2.n_diag[1] * s) / (
            ac2.d0 + ac2.d_diag[0] * k1sq + ac2.d_diag[1] * s)
        op = model.optic
        wb = op.omega_b ** 2 - (op.p_diag[0] * k1sq + op.p_diag[1] * s) / (
            1.0 + op.q_diag[0] * k1sq + op.q_diag[1] * s)
    return "acoustic" if abs(wa - w2) <= abs(wb - w2) else "optic"


def char_roots(medium: HomogenizedMedium, omega: float,
               k1: float | None = None) -> ModeSet:
    """Full mode multiset of the medium at omega (and k1 in 2-d).

    The characteristic polynomial in s = k^2 is solved by companion-matrix
    eigenvalues; a vanishing leading coefficient reduces the degree (root
    at infinity dropped).  Each finite root yields a +/- mode pair,
    propagating modes signed by analytic group velocity and evanescent
    ones by decay direction.  Repeated roots (1e-8 relative) raise.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if medium.dimension == 2 and k1 is None:
        raise ValueError("2-d medium needs the conserved k1")
    coeffs = _char_poly(medium, omega, k1)
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        raise ValueError("degenerate medium: characteristic polynomial is zero")
    trimmed = np.array(coeffs)
    while len(trimmed) > 1 and abs(trimmed[0]) <= _COEF_TOL * scale:
        trimmed = trimmed[1:]
    roots = np.roots(trimmed) if len(trimmed) > 1 else np.array([])

    for i, si in enumerate(roots):
        for sj in roots[i + 1:]:
            if abs(si - sj) <= 1e-8 * max(abs(si), abs(sj), 1e-30):
                raise ValueError(f"repeated characteristic root s = {si}")

    modes: list[Mode] = []
    for s in roots:
        branch = _branch_tag(medium, omega, s, k1)
        if abs(s.imag) <= 1e-10 * max(abs(s), 1.0) and s.real > 0:
            k = math.sqrt(s.real)
            p_s, p_w = _dispersion_deriv(medium, omega, s.real, k1)
            vg = -2.0 * k * p_s / p_w
            modes.append(Mode(complex(k), "prop+" if vg > 0 else "prop-",
                              vg, branch))
            modes.append(Mode(complex(-k), "prop-" if vg > 0 else "prop+",
                              -vg, branch))
        else:
            k = cmath.sqrt(complex(s))
            if k.imag > 0:
                k = -k
            modes.append(Mode(k, "evan+", None, branch))
            modes.append(Mode(-k, "evan-", None, branch))
    return ModeSet(omega, k1, tuple(modes))


# ---------------------------------------------------------------------------
# natural conditions, fluxes, densities
# ---------------------------------------------------------------------------

def _pair_orders(medium: HomogenizedMedium, omega: float,
                 k1: float | None) -> list[int]:
    """Essential orders j whose natural g_j is structurally present."""
    if medium.bands == 1:
        t, _ = _single_band_T(medium.coeffs, omega, k1)
        scale = max(max(abs(v) for v in t), 1e-300)
        return [j for j in range(len(t))
                if any(abs(t[i]) > _COEF_TOL * scale for i in range(j, len(t)))]
    g, _ = _two_band_GH(medium.coeffs, omega)
    scale = float(np.max(np.abs(np.asarray(g))))
    return [0, 1] if scale > 0 else [0]


def _mode_derivs(k: complex, order: int, x_rel: float) -> np.ndarray:
    """(d/dx)^r of e^{-i k (x - anchor)} at x_rel = x - anchor."""
    base = np.exp(-1j * k * x_rel)
    return np.array([(-1j * k) ** r * base for r in range(order + 1)])


def _natural_values(medium: HomogenizedMedium, omega: float, k1: float | None,
                    derivs: np.ndarray, a5_jump: bool = False) -> dict[int, complex]:
    """g_j values from the derivative trace of a field.

    Two-band naturals follow the sign of the published jump conditions,
    i.e. minus the raw variational boundary terms; ``a5_jump`` adds the
    -w^2 A5 u term the 1-d listing carries (absent from its 2-d analogue
    and from the flux, and zero-mean in the time average either way).
    """
    out: dict[int, complex] = {}
    if medium.bands == 1:
        t, _ = _single_band_T(medium.coeffs, omega, k1)
        m = len(t)
        for j in range(m):
            val = 0.0 + 0.0j
            for i in range(j + 1, m + 1):
                val += (-1.0) ** (i - j - 1) * t[i - 1] * derivs[2 * i - j - 1]
            out[j] = val
        return out
    g, h = _two_band_GH(medium.coeffs, omega)
    a5 = medium.coeffs.coeffs["A5"]
    w2 = omega * omega
    if medium.dimension == 1:
        out[0] = g * derivs[3] - h * derivs[1]
        out[1] = -g * derivs[2]
        if a5_jump:
            out[0] = out[0] - w2 * a5 * derivs[0]
        return out
    k1sq = k1 * k1
    # G_{22pq} d_pq u: the d11 block turns into -k1^2 per e^{-i k1 x1},
    # while the d22 block stays a plain normal derivative
    g_second = -g[1, 0] * k1sq * derivs[0] + g[1, 1] * derivs[2]
    dg_second = -g[1, 0] * k1sq * derivs[1] + g[1, 1] * derivs[3]
    out[0] = dg_second - h[1] * derivs[1]
    out[1] = -g_second
    if a5_jump:
        out[0] = out[0] - w2 * a5 * derivs[0]
    return out


def _max_deriv_order(medium: HomogenizedMedium) -> int:
    if medium.bands == 1:
        branch = medium.coeffs
        m = branch.order if isinstance(branch, RationalBranch1D) else 1
        return max(2 * m - 1, 1)
    return 3


def energy_flux_hom(medium: HomogenizedMedium, trace: np.ndarray, omega: float,
                    k1: float | None = None) -> float:
    """Time-averaged energy flux along +x (+x2 in 2-d) of a field trace.

    ``trace[r]`` is the r-th normal derivative of u_hat at the point; each
    natural g_j pairs with the velocity of its essential quantity:
    F = -1/2 Re sum_j conj(i w trace[j]) g_j.
    """
    trace = np.asarray(trace, dtype=complex)
    naturals = _natural_values(medium, omega, k1, trace)
    return sum(-0.5 * float(np.real(np.conj(1j * omega * trace[j]) * g))
               for j, g in naturals.items())


def energy_density_hom(medium: HomogenizedMedium, trace: np.ndarray,
                       omega: float, k1: float | None = None) -> float:
    """Time-averaged energy density of a field trace."""
    trace = np.asarray(trace, dtype=complex)
    w2 = omega * omega
    if medium.bands == 1:
        branch = medium.coeffs
        if isinstance(branch, RationalBranch1D):
            num = (0.0,) + branch.num
            den = branch.den
            total = 0.25 * den[0] * w2 * abs(trace[0]) ** 2
            for j in range(1, len(num)):
                total += 0.25 * (num[j] + w2 * den[j]) * abs(trace[j]) ** 2
            return float(total)
        k1sq = k1 * k1
        n1, n2 = branch.n_diag
        d1, d2 = branch.d_diag
        return float(0.25 * (branch.d0 * w2 + (n1 + w2 * d1) * k1sq)
                     * abs(trace[0]) ** 2
                     + 0.25 * (n2 + w2 * d2) * abs(trace[1]) ** 2)
    if medium.dimension != 1:
        raise NotImplementedError("density evaluation is provided in 1-d")
    a = medium.coeffs.coeffs
    w4 = omega ** 4
    e0 = (0.75 * w4 - 0.25 * a["A5"] * w2) * abs(trace[0]) ** 2
    e1 = (0.75 * a["A1"] * w4 + 0.25 * a["A4"] * w2
          - 0.25 * a["A6"]) * abs(trace[1]) ** 2
    e2 = (0.75 * a["A2"] * w4 + 0.25 * a["A3"] * w2
          - 0.25 * a["A7"]) * abs(trace[2]) ** 2
    return float(e0 + e1 + e2)


# ---------------------------------------------------------------------------
# interface stacks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterfaceStack:
    """Left-to-right media with interface positions; incidence from the left.

    The incident wave is the unit-amplitude rightward propagating mode of
    the leftmost medium (the acoustic branch for two-band media).
    """

    media: tuple[HomogenizedMedium, ...]
    boundaries: tuple[float, ...]
    omega: float
    k1: float | None = None

    def __post_init__(self):
        if len(self.media) < 2:
            raise ValueError("a stack needs at least two media")
        if len(self.boundaries) != len(self.media) - 1:
            raise ValueError("need exactly one boundary per adjacent pair")
        if any(b2 <= b1 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly increasing")
        if len({m.bands for m in self.media}) > 1:
            raise ValueError(
                "mixing single-band and two-band media at an interface is "
                "not defined; model the homogeneous side as an artificial "
                "laminate with the same band count")
        dims = {m.dimension for m in self.media}
        if len(dims) > 1 or (2 in dims) != (self.k1 is not None):
            raise ValueError("media dimensionality must match presence of k1")


class _Region:
    def __init__(self, medium: HomogenizedMedium, x_left, x_right,
                 omega: float, k1):
        self.medium = medium
        self.x_left = x_left
        self.x_right = x_right
        self.omega = omega
        self.k1 = k1
        self.mode_set = char_roots(medium, omega, k1)
        self.modes: list[Mode] = []
        self.anchors: list[float] = []
        self.incident: Mode | None = None

    def add_mode(self, mode: Mode):
        # anchor decaying modes at their largest end to avoid overflow
        if mode.kind in ("prop+", "evan+"):
            anchor = self.x_left if self.x_left is not None else self.x_right
        else:
            anchor = self.x_right if self.x_right is not None else self.x_left
        self.modes.append(mode)
        self.anchors.append(anchor)

    def derivs_at(self, x: float, order: int) -> np.ndarray:
        rows = [_mode_derivs(m.k, order, x - a)
                for m, a in zip(self.modes, self.anchors)]
        return np.array(rows) if rows else np.zeros((0, order + 1), complex)

    def incident_derivs(self, x: float, order: int) -> np.ndarray:
        if self.incident is None:
            return np.zeros(order + 1, dtype=complex)
        return _mode_derivs(self.incident.k, order, x - self.x_right)


def _build_regions(stack: InterfaceStack) -> list[_Region]:
    regions: list[_Region] = []
    n = len(stack.media)
    for i, medium in enumerate(stack.media):
        x_left = stack.boundaries[i - 1] if i > 0 else None
        x_right = stack.boundaries[i] if i < n - 1 else None
        reg = _Region(medium, x_left, x_right, stack.omega, stack.k1)
        if i == 0:
            candidates = reg.mode_set.select("prop+")
            if not candidates:
                raise ValueError("leftmost medium carries no incoming wave "
                                 f"at omega = {stack.omega}")
            acoustic = [m for m in candidates if m.branch in ("acoustic", "rf")]
            reg.incident = max(acoustic or candidates, key=lambda m: m.vg)
            for m in reg.mode_set.modes:
                if m.outgoing_left:
                    reg.add_mode(m)
        elif i == n - 1:
            for m in reg.mode_set.modes:
                if m.outgoing_right:
                    reg.add_mode(m)
        else:
            for m in reg.mode_set.modes:
                reg.add_mode(m)
        regions.append(reg)
    return regions


def assemble_interface_system(stack: InterfaceStack, a5_jump: bool = False):
    """Square linear system (matrix, rhs, regions, pairing ledger).

    One row per active continuity condition per interface; raises with the
    pairing ledger when the count cannot be made square.
    """
    regions = _build_regions(stack)
    omega, k1 = stack.omega, stack.k1
    n_unknowns = sum(len(r.modes) for r in regions)
    offsets = np.cumsum([0] + [len(r.modes) for r in regions])

    rows, rhs_entries, ledger = [], [], []
    for b_idx, x_b in enumerate(stack.boundaries):
        left, right = regions[b_idx], regions[b_idx + 1]
        pairs_l = set(_pair_orders(left.medium, omega, k1))
        pairs_r = set(_pair_orders(right.medium, omega, k1))
        d_l = left.derivs_at(x_b, _max_deriv_order(left.medium))
        d_r = right.derivs_at(x_b, _max_deriv_order(right.medium))
        inc = left.incident_derivs(x_b, _max_deriv_order(left.medium))

        nat_l = [_natural_values(left.medium, omega, k1, d_l[i], a5_jump)
                 for i in range(len(left.modes))]
        nat_r = [_natural_values(right.medium, omega, k1, d_r[i], a5_jump)
                 for i in range(len(right.modes))]
        nat_inc = _natural_values(left.medium, omega, k1, inc, a5_jump) \
            if left.incident is not None else {}

        for j in sorted(pairs_l | pairs_r):
            both = j in pairs_l and j in pairs_r
            ledger.append((b_idx, j, "two-sided" if both else "one-sided"))
            row = np.zeros(n_unknowns, dtype=complex)
            rhs_v = 0.0 + 0.0j
            if j in pairs_l:
                for i in range(len(left.modes)):
                    row[offsets[b_idx] + i] += nat_l[i][j]
                rhs_v -= nat_inc.get(j, 0.0)
            if j in pairs_r:
                for i in range(len(right.modes)):
                    row[offsets[b_idx + 1] + i] -= nat_r[i][j]
            rows.append(row)
            rhs_entries.append(rhs_v)
            if both or j == 0:
                row = np.zeros(n_unknowns, dtype=complex)
                for i in range(len(left.modes)):
                    row[offsets[b_idx] + i] += d_l[i][j]
                for i in range(len(right.modes)):
                    row[offsets[b_idx + 1] + i] -= d_r[i][j]
                rows.append(row)
                rhs_entries.append(-inc[j] if left.incident is not None else 0.0)

    a = np.array(rows) if rows else np.zeros((0, n_unknowns), complex)
    b = np.array(rhs_entries, dtype=complex)
    if a.shape[0] != n_unknowns:
        detail = "; ".join(f"boundary {i}: j={j} {kind}"
                           for i, j, kind in ledger)
        raise ValueError(
            f"non-square interface system: {a.shape[0]} equations for "
            f"{n_unknowns} unknowns ({detail})")
    return a, b, regions, ledger


def _total_trace(region: _Region, amps: np.ndarray, x: float,
                 include_incident: bool) -> np.ndarray:
    order = _max_deriv_order(region.medium)
    d = region.derivs_at(x, order)
    total = amps @ d if len(amps) else np.zeros(order + 1, dtype=complex)
    if include_incident and region.incident is not None:
        total = total + region.incident_derivs(x, order)
    return total


def solve_scattering_hom(stack: InterfaceStack, a5_jump: bool = False) -> ScatteringSolution:
    """Solve the stack; energies from the time-averaged flux.

    T_E is exactly zero when the rightmost medium has no propagating
    outgoing mode; in pass bands R_E + T_E = 1 to solver precision.
    """
    a, b, regions, ledger = assemble_interface_system(stack, a5_jump)
    row_scale = np.max(np.abs(a), axis=1)
    row_scale[row_scale == 0.0] = 1.0
    a_s = a / row_scale[:, None]
    cond = float(np.linalg.cond(a_s))
    x = np.linalg.solve(a_s, b / row_scale)

    offsets = np.cumsum([0] + [len(r.modes) for r in regions])
    first, last = regions[0], regions[-1]
    amps_first = x[offsets[0]:offsets[1]]
    amps_last = x[offsets[-2]:offsets[-1]]

    flux_inc = energy_flux_hom(
        first.medium, first.incident_derivs(first.x_right,
                                            _max_deriv_order(first.medium)),
        stack.omega, stack.k1)
    # signed ratios: R_E is the fraction of incident transport sent back,
    # T_E the fraction carried on; flux continuity makes them sum to one
    # even where a branch carries indefinite-sign modal energy
    refl_trace = _total_trace(first, amps_first, first.x_right, False)
    r_e = -energy_flux_hom(first.medium, refl_trace, stack.omega,
                           stack.k1) / flux_inc

    if any(m.kind == "prop+" for m in last.modes):
        trans_trace = _total_trace(last, amps_last, last.x_left, False)
        t_e = energy_flux_hom(last.medium, trans_trace, stack.omega,
                              stack.k1) / flux_inc
    else:
        t_e = 0.0

    residual = np.max(np.abs(a @ x - b)) / (np.max(np.abs(b)) or 1.0)
    diag = {
        "condition_number": cond,
        "pair_ledger": ledger,
        "incident_mode": first.incident,
        "amplitudes": x,
        "mode_offsets": offsets,
        "continuity_residual": float(residual),
    }
    if cond > 1e12:
        diag["ill_conditioned"] = True
    reflected = [(m.k, complex(c)) for m, c in zip(first.modes, amps_first)]
    transmitted = [(m.k, complex(c)) for m, c in zip(last.modes, amps_last)]
    return ScatteringSolution(reflected, transmitted, float(r_e), float(t_e),
                              diag)


def displacement_field_hom(stack: InterfaceStack, solution: ScatteringSolution,
                           grid: np.ndarray) -> np.ndarray:
    """Complex displacement on a 1-d grid along the stack axis.

    In 2-d this is the profile at x1 = 0; multiply by e^{-i k1 x1} for
    other lateral positions.
    """
    regions = _build_regions(stack)
    x = solution.diagnostics["amplitudes"]
    offsets = solution.diagnostics["mode_offsets"]
    bounds = (-math.inf,) + tuple(stack.boundaries) + (math.inf,)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.shape, dtype=complex)
    for i, reg in enumerate(regions):
        mask = (grid >= bounds[i]) & (grid < bounds[i + 1])
        if not mask.any():
            continue
        amps = x[offsets[i]:offsets[i + 1]]
        xs = grid[mask]
        val = np.zeros(xs.shape, dtype=complex)
        for m, anchor, c in zip(reg.modes, reg.anchors, amps):
            val += c * np.exp(-1j * m.k * (xs - anchor))
        if reg.incident is not None:
            val += np.exp(-1j * reg.incident.k * (xs - reg.x_right))
        out[mask] = val
    return out


# ---------------------------------------------------------------------------
# Ostrogradsky particle demo
# ---------------------------------------------------------------------------

def particle_energy_demo(c_coef: float, initial_state=None,
                         dt: float | None = None, steps: int | None = None,
                         periods: float = 100.0, stiffness_sign: float = 1.0,
                         allow_unstable: bool = False) -> float:
    """Energy drift of the particle model u'''' + C u'' + sign * u = 0.

    The conserved energy is
    E = |u''|^2/2 - C |u'|^2/2 - u' u''' - sign |u|^2/2.
    With sign = +1 and C >= 2 all four characteristic roots i*w are purely
    imaginary (marginal stability); roots with a real part are rejected
    unless ``allow_unstable`` (sign = -1 reproduces the w^4 - C w^2 - 1 = 0
    mode family, which always carries a growing pair).  Default initial
    data is the plane mode cos(w t) on the largest oscillatory root.
    Returns max |E(t) - E(0)| / |E(0)| (absolute drift if E(0) ~ 0).
    """
    roots = np.roots([1.0, 0.0, c_coef, 0.0, stiffness_sign])
    growing = np.max(np.abs(roots.real)) > 1e-9 * np.max(np.abs(roots))
    if growing and not allow_unstable:
        raise ValueError(f"unstable characteristic roots {roots}")
    imag_mags = np.abs(roots.imag[np.abs(roots.real)
                                  < 1e-9 * np.max(np.abs(roots))])
    if imag_mags.size:
        w_mode = float(np.max(imag_mags))
    else:
        w_mode = math.sqrt(float(np.max(np.roots([1.0, -c_coef,
                                                  -stiffness_sign]).real)))
    if initial_state is None:
        initial_state = [1.0, 0.0, -w_mode ** 2, 0.0]
    y0 = np.asarray(initial_state, dtype=float)
    period = 2.0 * math.pi / w_mode
    dt = dt if dt is not None else period / 200.0
    t_end = steps * dt if steps is not None else periods * period

    def rhs(_, y):
        return [y[1], y[2], y[3], -c_coef * y[2] - stiffness_sign * y[0]]

    def energy(y):
        return (0.5 * y[2] ** 2 - 0.5 * c_coef * y[1] ** 2 - y[1] * y[3]
                - 0.5 * stiffness_sign * y[0] ** 2)

    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", max_step=dt,
                    rtol=1e-12, atol=1e-12,
                    t_eval=np.linspace(0.0, t_end, max(int(t_end / dt), 2)))
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    e = np.array([energy(y) for y in sol.y.T])
    drift = float(np.max(np.abs(e - e[0])))
    return drift / abs(e[0]) if abs(e[0]) > 1e-12 else drift

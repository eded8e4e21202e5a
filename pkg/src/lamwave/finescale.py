"""Exact fine-scale scattering at laminate boundaries.

1-d problems use the 2x2 transfer matrix of the state (u, E u');
the 2-d antiplane interface problem expands the transmitted field in
Bloch modes and the reflected field in plane-wave harmonics, matched by
Galerkin projection over one period.  Time convention u = u_hat(x) e^{i w t},
with e^{-i k x} the rightward factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from lamwave.laminate import (
    Layer,
    UnitCell,
    bloch_mode_shape,
    bloch_wavenumber_1d,
    cos_sqrt,
    k2_roots,
    sinc_sqrt,
)

__all__ = [
    "ScatteringProblem1D",
    "ScatteringProblem2D",
    "ScatteringSolution",
    "transfer_matrix",
    "scatter_1d",
    "scatter_2d",
    "field_1d",
    "field_2d",
]


@dataclass(frozen=True)
class ScatteringProblem1D:
    """Plane wave from a homogeneous half-space onto a laminate.

    ``single_boundary``: semi-infinite metamaterial at x > 0.
    ``double_boundary``: slab of ``slab_cells`` cells between two identical
    homogeneous half-spaces.
    """

    geometry: str
    cell: UnitCell
    omega: float
    hom_modulus: float
    hom_density: float = 1.0
    ordering: str = "a_first"
    slab_cells: int = 10

    def __post_init__(self):
        if self.geometry not in ("single_boundary", "double_boundary"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.ordering not in ("a_first", "b_first"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.slab_cells < 1:
            raise ValueError("slab_cells must be >= 1")
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def oriented_cell(self) -> UnitCell:
        return self.cell if self.ordering == "a_first" else self.cell.swapped()


@dataclass(frozen=True)
class ScatteringProblem2D:
    """Oblique incidence on a laminate whose laminae are normal to the boundary.

    The interface is x2 = 0; the laminate fills x2 > 0 with lamination
    along x1.  ``theta`` is measured from the interface tangent, so
    theta = pi/2 is normal incidence; alternatively fix the conserved k1.
    """

    cell: UnitCell
    omega: float
    hom_modulus: float
    hom_density: float = 1.0
    theta: float | None = None
    k1: float | None = None
    truncation: int = 8
    auto_truncation: bool = True
    defect_tol: float = 1e-3
    max_truncation: int = 96

    def __post_init__(self):
        if (self.theta is None) == (self.k1 is None):
            raise ValueError("specify exactly one of theta, k1")
        if self.theta is not None and not (0.0 < self.theta <= math.pi / 2):
            raise ValueError("theta must lie in (0, pi/2]")
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def k0(self) -> float:
        return self.omega * math.sqrt(self.hom_density / self.hom_modulus)

    @property
    def conserved_k1(self) -> float:
        if self.k1 is not None:
            return self.k1
        return self.k0 * math.cos(self.theta)


@dataclass
class ScatteringSolution:
    """Reflected/transmitted mode amplitudes plus energy fractions."""

    reflected: list[tuple[complex, complex]]
    transmitted: list[tuple[complex, complex]]
    R_E: float
    T_E: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def energy_defect(self) -> float:
        return abs(self.R_E + self.T_E - 1.0)


def transfer_matrix(cell_or_layer, omega: float, k2sq: float = 0.0,
                    ordering: str = "a_first") -> np.ndarray:
    """Propagator of (u, E u') across a layer or one full cell."""
    if isinstance(cell_or_layer, Layer):
        lay = cell_or_layer
        alpha2 = omega * omega * lay.density / lay.modulus - k2sq
        c = cos_sqrt(alpha2, lay.thickness)
        s = sinc_sqrt(alpha2, lay.thickness)
        return np.array([[c, s / lay.modulus],
                         [-lay.modulus * alpha2 * s, c]], dtype=float)
    cell: UnitCell = cell_or_layer
    if ordering == "b_first":
        cell = cell.swapped()
    m_a = transfer_matrix(cell.layer_a, omega, k2sq)
    m_b = transfer_matrix(cell.layer_b, omega, k2sq)
    return m_b @ m_a


def _flux_1d(omega: float, u: complex, sigma: complex) -> float:
    """Time-averaged rightward energy flux of the state (u, sigma=E u')."""
    return -0.5 * omega * float(np.imag(sigma * np.conj(u)))


def _bloch_eigvec(m_cell: np.ndarray, lam: complex) -> np.ndarray:
    v1 = np.array([m_cell[0, 1], lam - m_cell[0, 0]], dtype=complex)
    v2 = np.array([lam - m_cell[1, 1], m_cell[1, 0]], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    n = np.linalg.norm(v)
    if n < 1e-300:
        raise np.linalg.LinAlgError("defective cell matrix at a band edge")
    return v / n


def _transmitted_bloch_state(cell: UnitCell, omega: float):
    """Outgoing or decaying Bloch eigenstate (u, sigma) at the slab entrance.

    Returns (state, eigenvalue, propagating).  Band-edge degeneracies are
    nudged off by a 1e-12 relative frequency perturbation.
    """
    for bump in (0.0, 1e-12, -1e-12, 3e-12):
        w = omega * (1.0 + bump)
        m_cell = transfer_matrix(cell, w)
        kb = bloch_wavenumber_1d(cell, w)
        h = cell.period
        lam_plus = np.exp(-1j * kb * h)
        lam_minus = np.exp(1j * kb * h)
        if abs(lam_plus - lam_minus) < 1e-13:
            continue
        if abs(kb.imag) > 1e-12 * max(abs(kb.real), 1.0 / h):
            lam = lam_plus if abs(lam_plus) < 1.0 else lam_minus
            return _bloch_eigvec(m_cell, lam), lam, False
        for lam in (lam_plus, lam_minus):
            v = _bloch_eigvec(m_cell, lam)
            if _flux_1d(w, v[0], v[1]) > 0.0:
                return v, lam, True
    raise np.linalg.LinAlgError("no transporting Bloch state found (band edge?)")


def scatter_1d(problem: ScatteringProblem1D) -> ScatteringSolution:
    """Exact steady-state reflection/transmission for the 1-d geometries."""
    w = problem.omega
    eh, rh = problem.hom_modulus, problem.hom_density
    kh = w * math.sqrt(rh / eh)
    z = 1j * kh * eh
    cell = problem.oriented_cell

    if problem.geometry == "single_boundary":
        v, lam, propagating = _transmitted_bloch_state(cell, w)
        # match u and E u' at x=0: 1 + R = T v_u ; -z (1 - R) = T v_s
        a = np.array([[v[0], -1.0], [v[1], -z]], dtype=complex)
        b = np.array([1.0, -z], dtype=complex)
        t_amp, r_amp = np.linalg.solve(a, b)
        flux_in = 0.5 * w * kh * eh
        t_e = abs(t_amp) ** 2 * _flux_1d(w, v[0], v[1]) / flux_in if propagating else 0.0
        refl = [(complex(kh), complex(r_amp))]
        trans = [(complex(-1j * np.log(lam) / cell.period), complex(t_amp))]
        diag = {"bloch_eigenvalue": lam, "propagating": propagating}
        return ScatteringSolution(refl, trans, abs(r_amp) ** 2, float(t_e), diag)

    m_slab = np.linalg.matrix_power(transfer_matrix(cell, w),
                                    problem.slab_cells).astype(complex)
    left_in = np.array([1.0, -z])
    left_r = np.array([1.0, z])
    right_t = np.array([1.0, -z])
    a = np.column_stack([m_slab @ left_r, -right_t])
    b = -(m_slab @ left_in)
    r_amp, t_amp = np.linalg.solve(a, b)
    refl = [(complex(kh), complex(r_amp))]
    trans = [(complex(kh), complex(t_amp))]
    diag = {"slab_condition": float(np.linalg.cond(a))}
    return ScatteringSolution(refl, trans, abs(r_amp) ** 2, abs(t_amp) ** 2, diag)


def _partial_cell_matrix(cell: UnitCell, omega: float, xi: float) -> np.ndarray:
    """Propagator across the first xi (<= period) of a cell."""
    ha = cell.layer_a.thickness
    if xi <= 0.0:
        return np.eye(2)
    if xi <= ha:
        return transfer_matrix(Layer(cell.layer_a.modulus, cell.layer_a.density, xi),
                               omega)
    m_a = transfer_matrix(cell.layer_a, omega)
    rest = Layer(cell.layer_b.modulus, cell.layer_b.density, xi - ha)
    return transfer_matrix(rest, omega) @ m_a


def field_1d(problem: ScatteringProblem1D, solution: ScatteringSolution,
             x: np.ndarray) -> np.ndarray:
    """Complex displacement profile of the solved 1-d problem."""
    w = problem.omega
    eh, rh = problem.hom_modulus, problem.hom_density
    kh = w * math.sqrt(rh / eh)
    cell = problem.oriented_cell
    h = cell.period
    r_amp = solution.reflected[0][1]
    t_amp = solution.transmitted[0][1]
    x = np.asarray(x, dtype=float)
    flat = np.empty(x.size, dtype=complex)

    if problem.geometry == "single_boundary":
        v, lam, _ = _transmitted_bloch_state(cell, w)
        state0 = t_amp * v
        for i, xi in enumerate(x.ravel()):
            if xi < 0:
                flat[i] = np.exp(-1j * kh * xi) + r_amp * np.exp(1j * kh * xi)
            else:
                n, loc = divmod(xi, h)
                state = (lam ** int(n)) * (_partial_cell_matrix(cell, w, loc) @ state0)
                flat[i] = state[0]
        return flat.reshape(x.shape)

    length = problem.slab_cells * h
    state0 = np.array([1.0 + r_amp, -1j * kh * eh * (1.0 - r_amp)])
    m_cell = transfer_matrix(cell, w).astype(complex)
    for i, xi in enumerate(x.ravel()):
        if xi < 0:
            flat[i] = np.exp(-1j * kh * xi) + r_amp * np.exp(1j * kh * xi)
        elif xi >= length:
            flat[i] = t_amp * np.exp(-1j * kh * (xi - length))
        else:
            n, loc = divmod(xi, h)
            state = _partial_cell_matrix(cell, w, loc) @ \
                np.linalg.matrix_power(m_cell, int(n)) @ state0
            flat[i] = state[0]
    return flat.reshape(x.shape)


class _ModeTable:
    """Bloch modes and their Fourier data shared by the 2-d Galerkin solve."""

    def __init__(self, cell: UnitCell, omega: float, k1: float, count: int,
                 n_quad: int):
        self.cell = cell
        self.omega = omega
        self.k1 = k1
        self.k2 = k2_roots(cell, omega, k1, count)
        self.modes = [bloch_mode_shape(cell, omega, k1, k2, tol=1e-6)
                      for k2 in self.k2]
        h = cell.period
        nodes, weights = [], []
        for x0, x1 in ((0.0, cell.layer_a.thickness), (cell.layer_a.thickness, h)):
            xg, wg = leggauss(n_quad)
            nodes.append(0.5 * (x1 - x0) * xg + 0.5 * (x0 + x1))
            weights.append(0.5 * (x1 - x0) * wg)
        self.x = np.concatenate(nodes)
        self.w = np.concatenate(weights)
        self.mu = cell.modulus_at(self.x)
        self.profiles = np.array([m.periodic_part(self.x) for m in self.modes])

    def fourier(self, orders: np.ndarray):
        """(c, d): c[n,p] = <U_n e^{i 2 pi p x/h}>/h, d weighted by mu(x)."""
        h = self.cell.period
        phase = np.exp(1j * 2.0 * math.pi * np.outer(orders, self.x) / h)
        base = self.profiles * self.w / h
        return base @ phase.T, (base * self.mu) @ phase.T

    def mode_flux(self):
        """Per-mode x2 flux factor K2 <mu|U|^2>/h (zero for evanescent)."""
        out = []
        for k2, prof in zip(self.k2, self.profiles):
            if abs(k2.imag) > 1e-12 * max(1.0, abs(k2)):
                out.append(0.0)
            else:
                out.append(k2.real * float(np.sum(self.w * self.mu *
                                                  np.abs(prof) ** 2)) / self.cell.period)
        return np.array(out)


def _effective_k1(problem: ScatteringProblem2D) -> float:
    """Conserved k1, nudged off exact normal/folded incidence.

    At cos(k1 h) = +-1 the Bloch eigenproblem degenerates; the solution is
    continuous there, so it is evaluated at a slightly off-axis k1.
    """
    h = problem.cell.period
    k1 = problem.conserved_k1
    if abs(math.sin(k1 * h)) < 1e-3:
        return (1e-3 / h) if math.cos(k1 * h) > 0 else (math.pi - 1e-3) / h
    return k1


def _solve_2d_at_m(problem: ScatteringProblem2D, m: int) -> ScatteringSolution:
    w = problem.omega
    mu_h = problem.hom_modulus
    h = problem.cell.period
    k0 = problem.k0
    k1 = _effective_k1(problem)
    kappa20 = math.sqrt(max(k0 * k0 - k1 * k1, 0.0))
    if kappa20 == 0.0:
        raise ValueError("grazing incidence carries no incoming flux")

    orders = np.arange(-m, m + 1)
    xi = k1 + 2.0 * math.pi * orders / h
    s_ref = k0 * k0 - xi * xi
    kappa2 = np.where(s_ref >= 0.0, np.sqrt(np.abs(s_ref)) + 0j,
                      -1j * np.sqrt(np.abs(s_ref)))

    n_modes = 2 * m + 1
    n_quad = max(96, 8 * m + 64)
    table = _ModeTable(problem.cell, w, k1, n_modes, n_quad)
    c, d = table.fourier(orders)

    k2_arr = np.array(table.k2)
    a = mu_h * kappa2[None, :] * c + k2_arr[:, None] * d
    rhs = np.zeros(n_modes, dtype=complex)
    rhs[m] = 2.0 * mu_h * kappa20
    row_scale = np.max(np.abs(a), axis=0)
    row_scale[row_scale == 0.0] = 1.0
    t_amp = np.linalg.solve((a / row_scale).T, rhs / row_scale)
    cond = float(np.linalg.cond((a / row_scale).T))
    r_amp = t_amp @ c
    r_amp[m] -= 1.0

    prop_ref = s_ref > 0.0
    r_e = float(np.sum(kappa2[prop_ref].real * np.abs(r_amp[prop_ref]) ** 2)
                / kappa20)
    flux = table.mode_flux()
    t_e = float(np.sum(flux * np.abs(t_amp) ** 2) / (mu_h * kappa20))

    refl = list(zip(map(complex, kappa2), map(complex, r_amp)))
    trans = list(zip(map(complex, table.k2), map(complex, t_amp)))
    diag = {
        "M": m,
        "condition_number": cond,
        "k1": k1,
        "kappa2": kappa2,
        "harmonic_orders": orders,
        "propagating_transmitted": int(np.sum(flux > 0.0)),
    }
    return ScatteringSolution(refl, trans, r_e, t_e, diag)


def scatter_2d(problem: ScatteringProblem2D) -> ScatteringSolution:
    """Bloch modal-expansion solution of the 2-d interface problem.

    With ``auto_truncation`` the harmonic count doubles until the energy
    balance defect drops below ``defect_tol``; the convergence history is
    kept in the diagnostics.
    """
    m = problem.truncation
    history = []
    best = None
    while True:
        sol = _solve_2d_at_m(problem, m)
        history.append((m, sol.energy_defect))
        if best is None or sol.energy_defect < best.energy_defect:
            best = sol
        if not problem.auto_truncation or sol.energy_defect < problem.defect_tol:
            break
        if 2 * m > problem.max_truncation:
            break
        m *= 2
    best.diagnostics["convergence"] = history
    return best


def field_2d(problem: ScatteringProblem2D, solution: ScatteringSolution,
             x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Complex displacement on the tensor grid x1 (periodic dir) x x2."""
    w = problem.omega
    k1 = solution.diagnostics["k1"]
    kappa2 = solution.diagnostics["kappa2"]
    orders = solution.diagnostics["harmonic_orders"]
    h = problem.cell.period
    k0 = problem.k0
    kappa20 = math.sqrt(max(k0 * k0 - k1 * k1, 0.0))
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = np.zeros((x1.size, x2.size), dtype=complex)
    xi = k1 + 2.0 * math.pi * orders / h

    below = x2 < 0
    if below.any():
        out[:, below] += np.exp(-1j * k1 * x1)[:, None] * \
            np.exp(-1j * kappa20 * x2[below])[None, :]
        for (kap, r), x_m in zip(solution.reflected, xi):
            out[:, below] += r * np.exp(-1j * x_m * x1)[:, None] * \
                np.exp(1j * kap * x2[below])[None, :]
    above = ~below
    if above.any():
        for k2, t in solution.transmitted:
            mode = bloch_mode_shape(problem.cell, w, k1, k2, tol=1e-6)
            prof = mode.periodic_part(x1) * np.exp(-1j * k1 * x1)
            out[:, above] += t * prof[:, None] * \
                np.exp(-1j * k2 * x2[above])[None, :]
    return out

"""Implicit finite-difference integrator for the 2D belt heat equation.

The belt temperature field u(t, x, y) obeys

    du/dt = alpha * (d2u/dx2 + d2u/dy2) + f(t, x, y)

with Dirichlet boundaries held at the ambient temperature u_inf on all four
edges. Backward-Euler time stepping with central differences in space turns
each step into the linear system

    (1 + 2(F_x + F_y)) u[i,j] - F_x (u[i-1,j] + u[i+1,j])
                              - F_y (u[i,j-1] + u[i,j+1]) = u_prev[i,j] + f[i,j] dt

over the interior, where F_x = alpha dt / dx^2 and F_y = alpha dt / dy^2 are
the Fourier numbers. The operator is symmetric positive definite and
penta-diagonal with constant coefficients, so three solvers are provided:

* ``dst``   -- exact diagonalization by the type-I discrete sine transform
               (the default; constant coefficients + homogeneous Dirichlet
               data after subtracting u_inf make it exact to roundoff),
* ``cg``    -- matrix-free conjugate gradients to 1e-8 relative residual,
* ``dense`` -- dense LU for tiny grids, used as a cross-check in tests.

The forcing term models underside cooling-water jets: inside each wetted
region the sink is proportional to (u - u_W), zero elsewhere.
"""

from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import InvalidParameterError, InvalidRegionError, NumericFailureError

# Half-open cell-index rectangle (i0, i1, j0, j1) on the (N_x, N_y) grid.
Region = tuple[int, int, int, int]

CG_TOL = 1e-8
CG_MAX_ITER = 20_000


@dataclass
class ThermalField:
    """Discretized belt temperature grid.

    ``u`` has shape (N_x, N_y): axis 0 spans the belt width, axis 1 the belt
    length. Boundary cells are conformed to ``u_inf`` on construction and
    held there by every step. ``alpha == 0`` disables diffusion (the step
    degenerates to u += f dt), which the cooling-relaxation tests rely on.
    """

    u: np.ndarray
    alpha: float
    dx: float = 1.0
    dy: float = 1.0
    u_inf: float = 72.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 2 or self.u.shape[0] < 3 or self.u.shape[1] < 3:
            raise InvalidParameterError(
                f"grid must be 2D with at least 3 cells per axis, got {self.u.shape}"
            )
        if self.alpha < 0:
            raise InvalidParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.dx <= 0 or self.dy <= 0:
            raise InvalidParameterError("mesh spacings dx, dy must be positive")
        self._conform_boundary()

    def _conform_boundary(self):
        self.u[0, :] = self.u_inf
        self.u[-1, :] = self.u_inf
        self.u[:, 0] = self.u_inf
        self.u[:, -1] = self.u_inf

    @property
    def nx(self) -> int:
        return self.u.shape[0]

    @property
    def ny(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "ThermalField":
        return replace(self, u=self.u.copy())


def ambient_field(nx, ny, alpha, dx=1.0, dy=1.0, u_inf=72.0) -> ThermalField:
    """Field initialized to the ambient temperature everywhere."""
    return ThermalField(np.full((nx, ny), float(u_inf)), alpha, dx, dy, u_inf)


@dataclass
class CoolingConfig:
    """Cooling-water jet system sprayed on the belt underside.

    ``wetted_regions`` holds one half-open index rectangle per jet row; the
    sink coefficient inside region r is

        q * water_rate * cp_water / (area_r * belt_thickness * belt_density * cp_belt)

    with area_r the region's cell count times the cell area.
    """

    rows: int
    jets_per_row: int
    water_rate: float
    wetted_regions: list = dc_field(default_factory=list)
    water_temp: float = 72.0
    belt_thickness: float = 1.0
    belt_density: float = 2.0
    cp_water: float = 1.0
    cp_belt: float = 1.0

    def __post_init__(self):
        for name in ("jets_per_row", "water_rate", "belt_thickness",
                     "belt_density", "cp_water", "cp_belt"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.rows != len(self.wetted_regions):
            raise InvalidParameterError(
                f"rows={self.rows} but {len(self.wetted_regions)} wetted regions given"
            )

    def validate_for(self, nx, ny):
        """Check every region sits in the grid interior and none overlap."""
        for r, (i0, i1, j0, j1) in enumerate(self.wetted_regions):
            if not (1 <= i0 < i1 <= nx - 1 and 1 <= j0 < j1 <= ny - 1):
                raise InvalidRegionError(
                    f"region {r} {(i0, i1, j0, j1)} outside interior of {nx}x{ny} grid"
                )
        for a in range(len(self.wetted_regions)):
            for b in range(a + 1, len(self.wetted_regions)):
                ia0, ia1, ja0, ja1 = self.wetted_regions[a]
                ib0, ib1, jb0, jb1 = self.wetted_regions[b]
                if ia0 < ib1 and ib0 < ia1 and ja0 < jb1 and jb0 < ja1:
                    raise InvalidRegionError(f"regions {a} and {b} overlap")

    def scaled(self, factor) -> "CoolingConfig":
        """Copy with the water rate scaled (episode cooling-intensity draws)."""
        if factor <= 0:
            raise InvalidParameterError("cooling scale factor must be positive")
        return replace(self, water_rate=self.water_rate * factor)


def spaced_cooling_regions(nx, ny, rows, length, j_start, j_end) -> list:
    """Evenly spaced full-width cooling bands between j_start and j_end."""
    if rows < 1 or length < 1:
        raise InvalidParameterError("rows and region length must be >= 1")
    span = j_end - j_start - length
    if span < 0 or j_start < 1 or j_end > ny - 1:
        raise InvalidRegionError("cooling band layout does not fit on the belt")
    starts = [j_start + (span * r) // max(rows - 1, 1) for r in range(rows)]
    if rows == 1:
        starts = [j_start + span // 2]
    regions = [(1, nx - 1, s, s + length) for s in starts]
    for a in range(rows - 1):
        if starts[a] + length > starts[a + 1]:
            raise InvalidRegionError("cooling bands overlap; reduce length or rows")
    return regions


def fourier_numbers(alpha, dt, dx, dy):
    """Dimensionless diffusion numbers (alpha dt / dx^2, alpha dt / dy^2)."""
    if alpha <= 0 or dt <= 0 or dx <= 0 or dy <= 0:
        raise InvalidParameterError(
            f"fourier_numbers requires positive inputs, got "
            f"alpha={alpha}, dt={dt}, dx={dx}, dy={dy}"
        )
    return alpha * dt / dx**2, alpha * dt / dy**2


def forcing_grid(field: ThermalField, cooling: CoolingConfig) -> np.ndarray:
    """Source-term grid (degF per unit time): jet sinks inside wetted regions, 0 elsewhere."""
    cooling.validate_for(field.nx, field.ny)
    f = np.zeros_like(field.u)
    cell_area = field.dx * field.dy
    for (i0, i1, j0, j1) in cooling.wetted_regions:
        area = (i1 - i0) * (j1 - j0) * cell_area
        coef = (cooling.jets_per_row * cooling.water_rate * cooling.cp_water) / (
            area * cooling.belt_thickness * cooling.belt_density * cooling.cp_belt
        )
        f[i0:i1, j0:j1] = -coef * (field.u[i0:i1, j0:j1] - cooling.water_temp)
    return f


@lru_cache(maxsize=8)
def _dst_eigenvalues(m, n, fx, fy):
    """Eigenvalues of the implicit operator on the m x n interior (sine modes)."""
    lam_x = 1.0 - np.cos(np.pi * np.arange(1, m + 1) / (m + 1))
    lam_y = 1.0 - np.cos(np.pi * np.arange(1, n + 1) / (n + 1))
    return 1.0 + 2.0 * fx * lam_x[:, None] + 2.0 * fy * lam_y[None, :]


def _apply_operator(w, fx, fy):
    """Matrix-free product A w on the interior, zero beyond the edges."""
    out = (1.0 + 2.0 * (fx + fy)) * w
    out[1:, :] -= fx * w[:-1, :]
    out[:-1, :] -= fx * w[1:, :]
    out[:, 1:] -= fy * w[:, :-1]
    out[:, :-1] -= fy * w[:, 1:]
    return out


def _solve_dst(b, fx, fy):
    m, n = b.shape
    bhat = scipy.fft.dstn(b, type=1)
    bhat /= _dst_eigenvalues(m, n, fx, fy)
    return scipy.fft.idstn(bhat, type=1)


def _solve_cg(b, fx, fy, tol=CG_TOL):
    w = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(np.vdot(r, r))
    b_inf = float(np.max(np.abs(b)))
    if b_inf == 0.0:
        return w
    target = tol * b_inf
    for _ in range(CG_MAX_ITER):
        if float(np.max(np.abs(r))) <= target:
            return w
        ap = _apply_operator(p, fx, fy)
        alpha = rs / float(np.vdot(p, ap))
        w += alpha * p
        r -= alpha * ap
        rs_new = float(np.vdot(r, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    residual = float(np.max(np.abs(r))) / b_inf
    raise NumericFailureError(
        f"conjugate gradients did not reach {tol} relative residual "
        f"after {CG_MAX_ITER} iterations", residual=residual,
    )


@lru_cache(maxsize=4)
def _dense_operator(m, n, fx, fy):
    def lap1d(k):
        d = 2.0 * np.eye(k)
        off = -np.eye(k, k=1) - np.eye(k, k=-1)
        return d + off

    a = (np.eye(m * n)
         + fx * np.kron(lap1d(m), np.eye(n))
         + fy * np.kron(np.eye(m), lap1d(n)))
    return a


def _solve_dense(b, fx, fy):
    m, n = b.shape
    a = _dense_operator(m, n, fx, fy)
    return np.linalg.solve(a, b.ravel()).reshape(m, n)


_SOLVERS = {"dst": _solve_dst, "cg": _solve_cg, "dense": _solve_dense}


def step_implicit(field: ThermalField, forcing: np.ndarray, dt,
                  solver: str = "auto") -> ThermalField:
    """Advance the field one backward-Euler step under the given forcing.

    The forcing is evaluated at the current step (time-lagged), so the
    update stays linear in the unknown field. Boundary cells are reset to
    u_inf exactly. Returns a new ThermalField; the input is not mutated.
    """
    forcing = np.asarray(forcing, dtype=float)
    if forcing.shape != field.u.shape:
        raise InvalidParameterError(
            f"forcing shape {forcing.shape} does not match grid {field.u.shape}"
        )
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if solver == "auto":
        solver = "dst"
    if solver not in _SOLVERS:
        raise InvalidParameterError(f"unknown solver {solver!r}")

    u_new = np.full_like(field.u, field.u_inf)
    rhs = field.u[1:-1, 1:-1] + forcing[1:-1, 1:-1] * dt

    if field.alpha == 0.0:
        # Diffusion disabled: F_x = F_y = 0 and the system is the identity.
        u_new[1:-1, 1:-1] = rhs
    else:
        fx, fy = fourier_numbers(field.alpha, dt, field.dx, field.dy)
        b = rhs - field.u_inf
        w = _SOLVERS[solver](b, fx, fy)
        u_new[1:-1, 1:-1] = w + field.u_inf

    return replace(field, u=u_new)

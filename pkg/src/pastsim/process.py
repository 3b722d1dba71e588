"""Pastillation dynamics on the conveyor belt.

A rotating shell with K nozzle rows (h nozzles per row) deposits a fresh
pastille row every round(2*pi / (omega K dt)) steps. Individual nozzles clog
at random: each nozzle carries a propensity (heterogeneous by default, drawn
from a Beta prior once per episode; optionally loaded from an empirical
table, or driven from the observed leading-row temperature via the scaled
law P = 1 - (u - u_inf)/(u_max - u_inf)). A clog persists for a geometric
number of deposition events.

Deposited rows ride the belt: their fractional position advances by
v_B dt / dy per step, and the thermal imprint is advected with them by
integer cell shifts (a shared accumulator carries the fraction). Rows past
the end of the belt are dropped. The instantaneous production rate is
(Theta / L_y) * v_B with Theta the pastille count currently on the belt.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidParameterError, NoLeadingRowError
from .field import (CoolingConfig, ThermalField, ambient_field, forcing_grid,
                    step_implicit)


@dataclass
class ProcessConfig:
    """Geometry and kinematics of the rotating shell and belt."""

    shell_speed: float = 2.0 * math.pi / 16.0   # rad per time unit
    rows_on_shell: int = 4
    nozzles_per_row: int = 8
    deposit_temp: float = 212.0
    belt_width: int = 65
    belt_length: int = 637
    speed_bounds: tuple = (2.0, 12.0)
    pastille_footprint: int = 1
    deposit_offset: int = 2     # interior j index where fresh rows land

    def __post_init__(self):
        if self.nozzles_per_row < 1 or self.rows_on_shell < 1:
            raise InvalidParameterError("need at least one nozzle row and one nozzle")
        if self.shell_speed <= 0:
            raise InvalidParameterError("shell speed must be positive")
        if self.belt_width < 3 or self.belt_length < 3:
            raise InvalidParameterError("belt grid must be at least 3x3 cells")
        lo, hi = self.speed_bounds
        if not lo < hi:
            raise InvalidParameterError("speed bounds must be ordered")
        if self.pastille_footprint < 0:
            raise InvalidParameterError("pastille footprint must be >= 0")

    @property
    def total_nozzles(self) -> int:
        return self.rows_on_shell * self.nozzles_per_row

    def deposition_period(self, dt) -> int:
        """Steps between row deposits: round(2 pi / (omega K dt)), at least 1."""
        return max(1, round(2.0 * math.pi / (self.shell_speed * self.rows_on_shell * dt)))

    def nozzle_centers(self) -> np.ndarray:
        """Fractional x positions (k + 0.5) L_x / h, evenly spaced with half-gap margins."""
        h = self.nozzles_per_row
        return (np.arange(h) + 0.5) * self.belt_width / h

    def nozzle_cells(self) -> np.ndarray:
        """Integer cell indices of the nozzle centers, clipped to the interior."""
        return np.clip(self.nozzle_centers().astype(int), 1, self.belt_width - 2)


@dataclass
class ClogModel:
    """Stochastic nozzle-clog model.

    ``base_propensity`` is one probability per nozzle; leave it None to draw
    from Beta(beta_a, beta_b) when the episode state is built. An
    ``empirical_table`` (length h) overrides the base propensities. With
    ``temperature_driven`` set, the per-event probability comes from the
    scaled leading-row temperature instead.
    """

    base_propensity: np.ndarray = None
    persistence: float = 3.0
    empirical_table: np.ndarray = None
    u_max: float = 212.0
    temperature_driven: bool = False
    beta_a: float = 2.0
    beta_b: float = 8.0

    def __post_init__(self):
        if self.persistence < 1:
            raise InvalidParameterError("mean clog duration must be >= 1 event")
        for name in ("base_propensity", "empirical_table"):
            tab = getattr(self, name)
            if tab is not None:
                tab = np.asarray(tab, dtype=float)
                if np.any(tab < 0) or np.any(tab > 1):
                    raise InvalidParameterError(f"{name} entries must lie in [0, 1]")
                setattr(self, name, tab)

    def propensities(self, h, leading_temp=None, u_inf=72.0) -> np.ndarray:
        if self.temperature_driven and leading_temp is not None:
            p = clog_probability(leading_temp, u_inf, self.u_max)
            return np.full(h, p)
        table = self.empirical_table if self.empirical_table is not None else self.base_propensity
        if table is None:
            raise InvalidParameterError("clog propensities not initialized for this episode")
        if len(table) != h:
            raise InvalidParameterError(
                f"clog table has {len(table)} entries for {h} nozzles"
            )
        return table


def load_clog_table(path) -> np.ndarray:
    """Read a per-nozzle clog-probability table (one float per line, # comments)."""
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                values.append(float(line))
    table = np.asarray(values, dtype=float)
    if table.size == 0 or np.any(table < 0) or np.any(table > 1):
        raise InvalidParameterError(f"clog table {path} must hold probabilities in [0, 1]")
    return table


@dataclass
class PastilleRow:
    """One deposited row tracked while it rides the belt."""

    mask: np.ndarray
    position: float
    deposit_step: int
    pixel_j: int
    row_id: int

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.mask))


@dataclass
class StepReport:
    step: int
    speed: float
    theta: int
    flow_rate: float
    leading_row_temp: float   # NaN when the belt holds no measurable row
    exited: int               # rows that left the belt this step
    deposited: int = 0        # pastilles deposited this step
    exited_pastilles: int = 0


STEP_CSV_COLUMNS = ("step", "speed", "theta", "flow_rate", "leading_row_temp", "exited")


def clog_probability(u_row, u_inf, u_max) -> float:
    """Scaled-temperature clog probability 1 - (u - u_inf)/(u_max - u_inf), clamped to [0, 1]."""
    if u_max <= u_inf:
        raise InvalidParameterError(f"u_max ({u_max}) must exceed u_inf ({u_inf})")
    p = 1.0 - (u_row - u_inf) / (u_max - u_inf)
    return float(min(max(p, 0.0), 1.0))


def sample_deposit_mask(clog: ClogModel, remaining: np.ndarray,
                        rng: np.random.Generator, step: int = 0,
                        propensities=None) -> np.ndarray:
    """Draw the deposit mask for one row (True = pastille placed).

    Nozzles inside a persistent clog stay blocked and their remaining
    duration decrements. Free nozzles clog with their propensity; a fresh
    clog blocks this event and a geometric(1/persistence) - 1 further events.
    """
    h = remaining.shape[0]
    p = np.asarray(propensities if propensities is not None
                   else clog.propensities(h), dtype=float)
    persist = remaining > 0
    draws = rng.random(h)
    fresh = ~persist & (draws < p)
    remaining[persist] -= 1
    n_fresh = int(np.count_nonzero(fresh))
    if n_fresh:
        durations = rng.geometric(1.0 / clog.persistence, size=n_fresh)
        remaining[fresh] = durations - 1
    return ~(persist | fresh)


def deposit_row(field: ThermalField, rows: list, mask: np.ndarray,
                config: ProcessConfig, step: int, row_id: int = None):
    """Append a fresh row at j = 0 and imprint deposit_temp at its pastille cells."""
    if row_id is None:
        row_id = len(rows)
    j0 = config.deposit_offset
    rows.append(PastilleRow(mask=np.asarray(mask, dtype=bool).copy(), position=0.0,
                            deposit_step=step, pixel_j=j0, row_id=row_id))
    r = config.pastille_footprint
    cells = config.nozzle_cells()
    u = field.u
    for c in cells[np.asarray(mask, dtype=bool)]:
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                if di * di + dj * dj <= r * r:
                    i = min(max(c + di, 1), field.nx - 2)
                    j = min(max(j0 + dj, 1), field.ny - 2)
                    u[i, j] = config.deposit_temp
    return field, rows


def advance_rows(rows: list, v_b, dt, dy, belt_length):
    """Move every row by v_b dt / dy and drop rows past the end of the belt."""
    if v_b < 0:
        raise InvalidParameterError("belt speed must be non-negative")
    step = v_b * dt / dy
    kept, exited = [], []
    for row in rows:
        row.position += step
        (kept if row.position <= belt_length else exited).append(row)
    return kept, exited


def flow_rate(theta, belt_length, v_b) -> float:
    """Average production rate (Theta / L_y) v_B in pastilles per time step."""
    if belt_length <= 0:
        raise InvalidParameterError(f"belt length must be positive, got {belt_length}")
    return (theta / belt_length) * v_b


@dataclass
class SimulationState:
    """Full mutable state of one pastillation episode."""

    field: ThermalField
    process: ProcessConfig
    cooling: CoolingConfig
    clog: ClogModel
    dt: float
    rng: np.random.Generator
    rows: list = dc_field(default_factory=list)
    clog_remaining: np.ndarray = None
    step_count: int = 0
    shift_accumulator: float = 0.0
    rows_deposited: int = 0
    first_row_exit_step: int = None
    solver: str = "auto"

    @property
    def theta(self) -> int:
        return sum(row.popcount for row in self.rows)


def make_state(process: ProcessConfig, cooling: CoolingConfig,
               clog: ClogModel = None, alpha=0.05, dt=1.0, u_inf=72.0,
               seed=0, rng=None, initial_field=None, solver="auto") -> SimulationState:
    """Build a seeded episode state; draws Beta propensities if the clog model has none."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if clog is None:
        clog = ClogModel()
    if (clog.base_propensity is None and clog.empirical_table is None
            and not clog.temperature_driven):
        clog = ClogModel(
            base_propensity=rng.beta(clog.beta_a, clog.beta_b, size=process.nozzles_per_row),
            persistence=clog.persistence, empirical_table=None, u_max=clog.u_max,
            temperature_driven=False, beta_a=clog.beta_a, beta_b=clog.beta_b,
        )
    field = initial_field if initial_field is not None else ambient_field(
        process.belt_width, process.belt_length, alpha=alpha, u_inf=u_inf)
    cooling.validate_for(field.nx, field.ny)
    return SimulationState(
        field=field, process=process, cooling=cooling, clog=clog, dt=dt, rng=rng,
        clog_remaining=np.zeros(process.nozzles_per_row, dtype=np.int64),
        solver=solver,
    )


@dataclass
class SimSetup:
    """Episode configuration bundle shared by imaging, control, and tuning.

    Immutable description of one simulator variant; ``build`` produces a
    fresh seeded episode state.
    """

    process: ProcessConfig
    cooling: CoolingConfig
    clog: ClogModel = None
    alpha: float = 0.05
    dt: float = 1.0
    u_inf: float = 72.0
    solver: str = "auto"
    initial_speed: float = 7.0

    def build(self, seed=0, rng=None) -> SimulationState:
        return make_state(self.process, self.cooling, clog=self.clog,
                          alpha=self.alpha, dt=self.dt, u_inf=self.u_inf,
                          seed=seed, rng=rng, solver=self.solver)


def leading_row_temp(state: SimulationState) -> float:
    """Mean field temperature at the pastille centers of the furthest row.

    Only rows that hold pastilles and whose thermal imprint is still on the
    grid qualify (a row's heat pattern shifts off the camera a couple of
    cells before its Eq-style position bookkeeping drops it). Raises
    NoLeadingRowError when no such row exists.
    """
    ny = state.field.ny
    best = None
    for row in state.rows:
        if (row.popcount and row.pixel_j <= ny - 2
                and (best is None or row.position > best.position)):
            best = row
    if best is None:
        raise NoLeadingRowError("no measurable row with deposited pastilles")
    cells = state.process.nozzle_cells()[best.mask]
    return float(np.mean(state.field.u[cells, max(best.pixel_j, 1)]))


def leading_row_pixel(state: SimulationState):
    """Frame row index (axis 0 of the rendered frame) of the leading row.

    Returns None when no measurable row exists; same qualification rule as
    leading_row_temp.
    """
    ny = state.field.ny
    best = None
    for row in state.rows:
        if (row.popcount and row.pixel_j <= ny - 2
                and (best is None or row.position > best.position)):
            best = row
    return None if best is None else max(best.pixel_j, 1)


def _shift_field(field: ThermalField, k: int):
    """Advect the interior k cells down-belt, refilling upstream with ambient."""
    u = field.u
    interior = field.ny - 2
    if k >= interior:
        u[1:-1, 1:-1] = field.u_inf
        return
    u[1:-1, 1 + k:-1] = u[1:-1, 1:-1 - k]
    u[1:-1, 1:1 + k] = field.u_inf


def simulate_step(state: SimulationState, speed_command) -> StepReport:
    """Advance the episode one step at the commanded belt speed.

    Order per step: deposit (on deposition steps), advect the thermal
    pattern with the rows, evaluate jet forcing, implicit heat step, advance
    row bookkeeping. The caller is responsible for keeping the speed inside
    the process bounds.
    """
    v = float(speed_command)
    deposited = 0
    if state.step_count % state.process.deposition_period(state.dt) == 0:
        lead = None
        if state.clog.temperature_driven:
            try:
                lead = leading_row_temp(state)
            except NoLeadingRowError:
                lead = None
        p = state.clog.propensities(state.process.nozzles_per_row,
                                    leading_temp=lead, u_inf=state.field.u_inf)
        mask = sample_deposit_mask(state.clog, state.clog_remaining, state.rng,
                                   state.step_count, propensities=p)
        deposit_row(state.field, state.rows, mask, state.process,
                    state.step_count, row_id=state.rows_deposited)
        state.rows_deposited += 1
        deposited = int(np.count_nonzero(mask))

    state.shift_accumulator += v * state.dt / state.field.dy
    k = int(state.shift_accumulator)
    if k:
        state.shift_accumulator -= k
        _shift_field(state.field, k)
        for row in state.rows:
            row.pixel_j += k

    f = forcing_grid(state.field, state.cooling)
    state.field = step_implicit(state.field, f, state.dt, solver=state.solver)

    state.rows, exited = advance_rows(state.rows, v, state.dt, state.field.dy,
                                      state.process.belt_length)
    if state.first_row_exit_step is None and any(r.row_id == 0 for r in exited):
        state.first_row_exit_step = state.step_count

    theta = state.theta
    try:
        lead_temp = leading_row_temp(state)
    except NoLeadingRowError:
        lead_temp = float("nan")
    report = StepReport(
        step=state.step_count, speed=v, theta=theta,
        flow_rate=flow_rate(theta, state.process.belt_length, v),
        leading_row_temp=lead_temp, exited=len(exited), deposited=deposited,
        exited_pastilles=sum(r.popcount for r in exited),
    )
    state.step_count += 1
    return report


def run_open_loop(state: SimulationState, steps: int, speed) -> list:
    """Run at a fixed commanded speed; returns the StepReport sequence."""
    return [simulate_step(state, speed) for _ in range(steps)]


def write_step_reports_csv(path, reports):
    """Dump StepReports to CSV with round-trippable float formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(STEP_CSV_COLUMNS) + "\n")
        for r in reports:
            fh.write("%d,%r,%d,%r,%r,%d\n" % (
                r.step, float(r.speed), r.theta, float(r.flow_rate),
                float(r.leading_row_temp), r.exited))

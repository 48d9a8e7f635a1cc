"""First-iteration Schrodinger-Newton phases for a spin-1/2 particle in a Stern-Gerlach field.

A particle in the spinor state (alpha, beta) is split by spin-dependent forces
F_up(t), F_down(t) into two Gaussian branches that follow the classical paths
u_up, u_down. In each branch's comoving frame the packet feels the
self-gravity potential

    U_up(z)   = |alpha|^2 Ut(z)      + |beta|^2 Ut(z + du)
    U_down(z) = |alpha|^2 Ut(z - du) + |beta|^2 Ut(z)

with du = u_up - u_down and Ut the free packet density convolved with the
softened pair kernel  -G m^2 / sqrt(d^2 + R^2).  The potential is expanded to
second order around z = 0, which keeps the packet Gaussian; its moments
(<z>, <p>, A = Var z, B = <zp + pz> - 2<z><p>) then obey closed ODEs:

    d<z>/dt = <p>/m
    d<p>/dt = -U1 - U2 <z>
    dA/dt   = B/m
    dB/dt   = (hbar^2 + B^2) / (2 m A) - 2 U2 A

where U0, U1, U2 are the value, slope and curvature at z = 0. They are
integrated with RK4, and the global phase

    f = -<z><p>/2 - hbar^2/(4m) int dt/A - int (U0 + U1 <z>/2) dt

is accumulated by the trapezoid rule on the same grid.  The reported branch
phase is the phase at the packet centre, (<p><z> + f)/hbar.

Only the z direction and only the first iteration are modelled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..errors import ConfigError, GridTooCoarse, NonPositiveVariance, ValidationError
from ..qstate import BlochState, wrap_angle

G_NEWTON = 6.67430e-11
HBAR = 1.054571817e-34
EPS_SN_CONV = 1e-6
_GH_NODES, _GH_WEIGHTS = hermegauss(300)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SNConfig:
    """Physical parameters (SI units) and piecewise-constant force profiles.

    ``F_up[k]`` and ``F_down[k]`` act on the interval [times[k], times[k+1]);
    the last sample is unused.
    """

    mass: float
    hbar: float
    G_N: float
    R: float
    A0: float
    times: np.ndarray = field(repr=False)
    F_up: np.ndarray = field(repr=False)
    F_down: np.ndarray = field(repr=False)
    B0: float = 0.0

    def __post_init__(self):
        for name in ("mass", "hbar", "R", "A0"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"field '{name}' must be positive, got {val}")
        if not (math.isfinite(float(self.G_N)) and self.G_N >= 0):
            raise ConfigError(f"field 'G_N' must be non-negative, got {self.G_N}")
        if not math.isfinite(float(self.B0)):
            raise ConfigError("field 'B0' must be finite")
        times = np.asarray(self.times, dtype=float)
        f_up = np.asarray(self.F_up, dtype=float)
        f_down = np.asarray(self.F_down, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise ConfigError("field 'times' needs at least two grid points")
        if f_up.shape != times.shape or f_down.shape != times.shape:
            raise ConfigError("fields 'F_up' and 'F_down' must align with the time grid")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(f_up)) and np.all(np.isfinite(f_down))):
            raise ConfigError("time grid and forces must be finite")
        steps = np.diff(times)
        dt = steps.mean()
        if not np.all(steps > 0):
            raise ConfigError("field 'times' must be strictly increasing")
        if np.max(np.abs(steps - dt)) > 1e-12 * dt + 4 * np.finfo(float).eps * np.max(np.abs(times)):
            raise ConfigError("field 'times' must be a uniform grid")
        for name, arr in (("times", times), ("F_up", f_up), ("F_down", f_down)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("mass", "hbar", "G_N", "R", "A0", "B0"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def refined(self) -> "SNConfig":
        """Same forces on a grid with half the step."""
        n = len(self.times)
        t0 = self.times[0]
        times = t0 + np.arange(2 * n - 1) * (self.dt / 2)
        times[-1] = self.times[-1]
        idx = np.arange(2 * n - 1) // 2
        return replace(self, times=times, F_up=self.F_up[idx], F_down=self.F_down[idx])

    def swapped(self) -> "SNConfig":
        return replace(self, F_up=self.F_down, F_down=self.F_up)

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("times", "F_up", "F_down"):
            d[k] = [float(x) for x in getattr(self, k)]
        return d

    @classmethod
    def from_json(cls, obj) -> "SNConfig":
        """Build from a JSON object.

        Either ``times`` or ``dt`` (with ``t0``) fixes the grid. Forces are
        given as ``F_up``/``F_down`` arrays or by a ``pulse`` block
        (see :func:`loop_pulse`).
        """
        if not isinstance(obj, dict):
            raise ConfigError("SN config must be a JSON object")
        known = {"mass", "hbar", "G_N", "R", "A0", "B0", "times", "dt", "t0", "F_up", "F_down", "pulse"}
        extra = sorted(set(obj) - known)
        if extra:
            raise ConfigError(f"unknown SN config field '{extra[0]}'")
        scalars = {}
        for name in ("mass", "hbar", "G_N", "R", "A0", "B0"):
            if name not in obj:
                if name == "B0":
                    continue
                if name == "hbar":
                    scalars[name] = HBAR
                    continue
                raise ConfigError(f"field '{name}' is required")
            val = obj[name]
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"field '{name}' must be a number")
            scalars[name] = float(val)
        if "pulse" in obj:
            p = obj["pulse"]
            if not isinstance(p, dict):
                raise ConfigError("field 'pulse' must be an object")
            try:
                kwargs = {k: float(p[k]) for k in ("separation", "duration", "dt")}
            except KeyError as exc:
                raise ConfigError(f"field 'pulse.{exc.args[0]}' is required") from None
            except (TypeError, ValueError):
                raise ConfigError("field 'pulse' entries must be numbers") from None
            times, f_up, f_down = loop_pulse(mass=scalars["mass"], **kwargs)
            return cls(times=times, F_up=f_up, F_down=f_down, **scalars)
        for name in ("F_up", "F_down"):
            if name not in obj:
                raise ConfigError(f"field '{name}' is required")
            if not isinstance(obj[name], list):
                raise ConfigError(f"field '{name}' must be an array")
        n = len(obj["F_up"])
        if "times" in obj:
            times = obj["times"]
            if not isinstance(times, list):
                raise ConfigError("field 'times' must be an array")
        elif "dt" in obj:
            dt = obj["dt"]
            if isinstance(dt, bool) or not isinstance(dt, (int, float)) or not dt > 0:
                raise ConfigError("field 'dt' must be a positive number")
            times = float(obj.get("t0", 0.0)) + dt * np.arange(n)
        else:
            raise ConfigError("field 'times' (or 'dt') is required")
        try:
            return cls(times=np.asarray(times, dtype=float), F_up=np.asarray(obj["F_up"], dtype=float),
                       F_down=np.asarray(obj["F_down"], dtype=float), **scalars)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed SN arrays: {exc}") from None


def loop_pulse(mass: float, separation: float, duration: float, dt: float):
    """Symmetric closed-loop force profile.

    The branches accelerate apart for a quarter of ``duration``, reverse for
    half, and accelerate back for the last quarter, so they leave and return
    to a common point at rest. Their maximum separation, reached at
    ``duration / 2``, is ``separation``. Returns (times, F_up, F_down).
    """
    n_steps = int(round(duration / dt))
    if n_steps < 1 or abs(n_steps * dt - duration) > 1e-9 * duration:
        raise ConfigError("field 'pulse.duration' must be a whole number of 'pulse.dt' steps")
    # each branch reaches a * (T/4)^2 from the axis
    accel = separation / 2.0 / (duration / 4.0) ** 2
    times = np.arange(n_steps + 1) * dt
    frac = times / duration
    sign = np.where((frac < 0.25) | (frac >= 0.75), 1.0, -1.0)
    f_up = mass * accel * sign
    return times, f_up, -f_up


def default_sn_config(
    G_N: float = G_NEWTON,
    dt: float = 1e-3,
    duration: float = 1.0,
    separation: float = 1e-6,
) -> SNConfig:
    """m = 1e-17 kg, R = 1e-7 m, A0 = 1e-14 m^2, loop pulse separating the branches by 1 um."""
    mass = 1e-17
    times, f_up, f_down = loop_pulse(mass, separation, duration, dt)
    return SNConfig(mass=mass, hbar=HBAR, G_N=G_N, R=1e-7, A0=1e-14, times=times, F_up=f_up, F_down=f_down)


@dataclass(frozen=True)
class SNPhaseResult:
    times: np.ndarray
    phi_up: np.ndarray
    phi_down: np.ndarray
    z_up: np.ndarray
    z_down: np.ndarray
    p_up: np.ndarray
    p_down: np.ndarray
    A_up: np.ndarray
    A_down: np.ndarray
    B_up: np.ndarray
    B_down: np.ndarray
    f_up: np.ndarray
    f_down: np.ndarray
    delta_u: np.ndarray

    @property
    def relative_phase(self) -> np.ndarray:
        """phi_down - phi_up: phase picked up by the |1> component relative to |0>."""
        return self.phi_down - self.phi_up

    def phases_at(self, t: float) -> tuple[float, float]:
        k = grid_index(self.times, t)
        return float(self.phi_up[k]), float(self.phi_down[k])

    CSV_COLUMNS = ("t", "phi_up", "phi_down", "z_up", "z_down", "A_up", "A_down",
                   "B_up", "B_down", "f_up", "f_down")

    def rows(self):
        cols = [self.times, self.phi_up, self.phi_down, self.z_up, self.z_down, self.A_up,
                self.A_down, self.B_up, self.B_down, self.f_up, self.f_down]
        return zip(*cols)


def grid_index(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    step = (times[-1] - times[0]) / max(len(times) - 1, 1)
    if abs(times[k] - t) > 1e-9 * step:
        raise ValidationError(f"time {t} is not on the configuration's time grid")
    return k


def branch_paths(cfg: SNConfig, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Classical positions u_up(t), u_down(t) at arbitrary times, both starting at rest at 0.

    The forces are constant on each grid interval, so the motion is exactly
    piecewise quadratic.
    """
    grid = cfg.times
    dt_grid = np.diff(grid)
    out = []
    for force in (cfg.F_up, cfg.F_down):
        a = force[:-1] / cfg.mass
        v = np.concatenate([[0.0], np.cumsum(a * dt_grid)])
        u = np.concatenate([[0.0], np.cumsum(v[:-1] * dt_grid + 0.5 * a * dt_grid**2)])
        k = np.clip(np.searchsorted(grid, times, side="right") - 1, 0, len(grid) - 2)
        s = times - grid[k]
        out.append(u[k] + v[k] * s + 0.5 * a[k] * s**2)
    return out[0], out[1]


def free_variance(cfg: SNConfig, t: np.ndarray) -> np.ndarray:
    """Variance of the force-free packet: A0 + B0 t/m + Var(p) t^2/m^2."""
    var_p = (cfg.hbar**2 + cfg.B0**2) / (4.0 * cfg.A0)
    s = t - cfg.times[0]
    return cfg.A0 + cfg.B0 * s / cfg.mass + var_p * s**2 / cfg.mass**2


def self_potential(cfg: SNConfig, z: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Value, slope and curvature of the smeared self-potential at displacement ``z``.

    Returns an array of shape (3, *z.shape): Gaussian (variance ``var``)
    averages of the softened kernel and its first two derivatives.
    """
    z = np.asarray(z, dtype=float)[..., None]
    sd = np.sqrt(np.asarray(var, dtype=float))[..., None]
    d = z - sd * _GH_NODES
    r2 = d * d + cfg.R**2
    gm2 = cfg.G_N * cfg.mass**2
    k0 = -gm2 / np.sqrt(r2)
    k1 = gm2 * d / r2**1.5
    k2 = gm2 * (cfg.R**2 - 2.0 * d * d) / r2**2.5
    return np.stack([k0 @ _GH_WEIGHTS, k1 @ _GH_WEIGHTS, k2 @ _GH_WEIGHTS])


def _branch_coefficients(cfg: SNConfig, alpha2: float, times: np.ndarray):
    """Expansion coefficients (U0, U1, U2) at z = 0 for both branches, each shape (3, len(times))."""
    beta2 = 1.0 - alpha2
    u_up, u_down = branch_paths(cfg, times)
    du = u_up - u_down
    var = free_variance(cfg, times)
    at_zero = self_potential(cfg, np.zeros_like(times), var)
    # Ut is even, so Ut(z - du) at 0 equals Ut(-du)
    plus = self_potential(cfg, du, var)
    minus = self_potential(cfg, -du, var)
    up = alpha2 * at_zero + beta2 * plus
    down = alpha2 * minus + beta2 * at_zero
    return up, down, du


def _rhs(y, c, m, hbar):
    z, p, a, b = y
    return np.array([
        p / m,
        -c[1] - c[2] * z,
        b / m,
        (hbar * hbar + b * b) / (2.0 * m * a) - 2.0 * c[2] * a,
    ])


def _integrate_branch(cfg: SNConfig, coeff_grid, coeff_mid, label: str):
    """RK4 over the grid; coefficients supplied at grid points and interval midpoints."""
    n = len(cfg.times)
    m, hbar = cfg.mass, cfg.hbar
    ys = np.empty((n, 4))
    ys[0] = (0.0, 0.0, cfg.A0, cfg.B0)
    for k in range(n - 1):
        h = cfg.times[k + 1] - cfg.times[k]
        y = ys[k]
        c0, cm, c1 = coeff_grid[:, k], coeff_mid[:, k], coeff_grid[:, k + 1]
        k1 = _rhs(y, c0, m, hbar)
        k2 = _rhs(y + 0.5 * h * k1, cm, m, hbar)
        k3 = _rhs(y + 0.5 * h * k2, cm, m, hbar)
        k4 = _rhs(y + h * k3, c1, m, hbar)
        ys[k + 1] = y + (h / 6.0) * ((k1 + 2 * k2) + (2 * k3 + k4))
        if not (ys[k + 1, 2] > 0 and np.all(np.isfinite(ys[k + 1]))):
            raise NonPositiveVariance(
                f"{label} branch variance became non-positive at t={cfg.times[k + 1]:.6g}"
            )
    return ys


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _evolve(cfg: SNConfig, alpha2: float) -> SNPhaseResult:
    t = cfg.times
    mid = 0.5 * (t[1:] + t[:-1])
    up_g, down_g, du = _branch_coefficients(cfg, alpha2, t)
    up_m, down_m, _ = _branch_coefficients(cfg, alpha2, mid)
    fields = {}
    for name, cg, cm in (("up", up_g, up_m), ("down", down_g, down_m)):
        ys = _integrate_branch(cfg, cg, cm, name)
        z, p, a, b = ys.T
        integrand = cfg.hbar**2 / (4.0 * cfg.mass * a) + cg[0] + 0.5 * cg[1] * z
        f = -0.5 * z * p - _cumtrapz(integrand, t)
        fields[f"z_{name}"] = z
        fields[f"p_{name}"] = p
        fields[f"A_{name}"] = a
        fields[f"B_{name}"] = b
        fields[f"f_{name}"] = f
        fields[f"phi_{name}"] = (p * z + f) / cfg.hbar
    return SNPhaseResult(times=t.copy(), delta_u=du, **fields)


def sn_moment_evolution(
    cfg: SNConfig,
    alpha2: float,
    check_convergence: bool = True,
    eps_conv: float = EPS_SN_CONV,
) -> SNPhaseResult:
    """Branch moments and phases on the configuration grid.

    ``alpha2`` is |alpha|^2, the weight of the spin-up branch. With
    ``check_convergence`` the run is repeated at half the step and
    :class:`GridTooCoarse` is raised if any phase on the common grid moves by
    more than ``eps_conv`` radians.
    """
    alpha2 = float(alpha2)
    if not (0.0 <= alpha2 <= 1.0):
        raise ValidationError(f"alpha2 must lie in [0, 1], got {alpha2}")
    res = _evolve(cfg, alpha2)
    if check_convergence:
        fine = _evolve(cfg.refined(), alpha2)
        change = max(
            np.max(np.abs(fine.phi_up[::2] - res.phi_up)),
            np.max(np.abs(fine.phi_down[::2] - res.phi_down)),
        )
        if not change < eps_conv:
            raise GridTooCoarse(
                f"halving dt moves the phases by {change:.3e} rad (> {eps_conv:g}); refine the grid"
            )
    return res


def sn_channel(
    s: BlochState,
    cfg: SNConfig,
    at_time: float | None = None,
    result: SNPhaseResult | None = None,
) -> BlochState:
    """Spin state after the first-iteration SN evolution.

    The polar angle is untouched; the azimuth advances by phi_down - phi_up,
    evaluated at ``at_time`` (default: the end of the grid). A precomputed
    ``result`` for alpha2 = cos^2(theta) may be passed to skip integration.
    """
    if s.is_pole:
        return s
    if result is None:
        result = sn_moment_evolution(cfg, math.cos(s.theta) ** 2)
    t = cfg.times[-1] if at_time is None else at_time
    phi_up, phi_down = result.phases_at(t)
    return BlochState(s.theta, wrap_angle(s.phi + phi_down - phi_up))

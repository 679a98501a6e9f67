"""Pseudospectral time stepping on the periodic grid.

Both variants are written as ``u_t = -lambda(D) u + N(u)`` with a diagonal
linear symbol and the quadratic term ``N(u) = d/dx (u^2 / 2)``:

* ``modified``:        lambda = eps * ell(xi) + |xi| m(xi)
* ``whitham_classic``: lambda = eps * ell(xi) + i xi m(xi)   (skew part)

The linear part is integrated exactly.  With dealiasing on,
``N(u) = P d/dx ((P u)^2 / 2)`` where ``P`` is the 2/3-rule projection, so
``<N(u), u> = 0`` holds to round-off.

The two dissipation integrals of the energy identity

    ||u(t)||^2 + 2 int ||u||_N^2 + 2 eps int ||ell^(1/2) u||^2 = ||u0||^2

are carried along as extra ODE components and advanced with the same
stages as the field, so their quadrature error has the stepper's order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .norms import NormReport, compute_norms, n_weight
from .operators import eval_whitham_m, symbol_values
from .picard import mollify
from .spectral_core import Grid, SpectralField, forward, inverse, weighted_sq_norm

log = logging.getLogger(__name__)

VARIANTS = ("modified", "whitham_classic")
STEPPERS = ("integrating_factor_rk4", "etd_rk2")
PROFILES = ("gaussian", "sech2", "sine", "file")
STATUSES = ("completed", "blowup_detected", "resolution_lost")


class CFLError(RuntimeError):
    """The explicit nonlinear part is outside its stability bound."""


class BlowupError(FloatingPointError):
    def __init__(self, t: float, msg: str = "non-finite values"):
        super().__init__(f"{msg} at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class InitialData:
    """Named initial profile. ``mode`` is the integer wavenumber for ``sine``."""

    profile: str = "gaussian"
    amplitude: float = 0.1
    width: float = 2.0
    center: float = 0.0
    mode: int = 1
    path: str = ""

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.profile == "file" and not self.path:
            raise ValueError("profile 'file' needs a path")

    def build(self, grid: Grid) -> SpectralField:
        x = grid.x
        if self.profile == "gaussian":
            s = self.amplitude * np.exp(-((x - self.center) / self.width) ** 2)
        elif self.profile == "sech2":
            s = self.amplitude / np.cosh((x - self.center) / self.width) ** 2
        elif self.profile == "sine":
            s = self.amplitude * np.sin(self.mode * grid.dxi * (x - self.center))
        else:
            from .io import load_field
            f = load_field(self.path)
            if f.grid != grid:
                raise ValueError(f"field in {self.path} lives on {f.grid}, expected {grid}")
            return f
        return SpectralField(grid, samples=s)

    def descriptor(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "modified"
    eps: float = 0.0
    n_points: int = 512
    half_length: float = 32 * math.pi
    t_end: float = 1.0
    dt: float = 0.01
    dealias: bool = True
    stepper: str = "integrating_factor_rk4"
    snapshot_stride: int = 10
    nonlinear: bool = True
    cfl_max: float = 1.0
    min_dt: float = 1e-8
    adaptive_dt: bool = True
    tail_tol: float = 1e-6
    blowup_cap: float = 1e8
    norm_exponents: Tuple[float, ...] = (0.25, 0.5, 0.75)
    initial: InitialData = field(default_factory=InitialData)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.cfl_max <= 0 or self.min_dt <= 0 or self.tail_tol <= 0:
            raise ValueError("cfl_max, min_dt and tail_tol must be positive")
        object.__setattr__(self, "norm_exponents",
                           tuple(float(s) for s in self.norm_exponents))
        # validates n_points and half_length
        self.grid

    @property
    def grid(self) -> Grid:
        return Grid(self.n_points, float(self.half_length))

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["norm_exponents"] = list(self.norm_exponents)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        if "initial" in d and isinstance(d["initial"], dict):
            d["initial"] = InitialData(**d["initial"])
        if "norm_exponents" in d:
            d["norm_exponents"] = tuple(d["norm_exponents"])
        return cls(**d)


def random_smooth_field(grid: Grid, rng: np.random.Generator, amplitude: float = 0.1,
                        bandwidth: float = 1.0) -> SpectralField:
    """Random real field with Gaussian spectral envelope exp(-(xi/bandwidth)^2),
    scaled so that max |u| equals ``amplitude``."""
    env = np.exp(-(grid.xi / bandwidth) ** 2)
    c = (rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)) * env
    c[0] = 0.0
    f = SpectralField(grid, coeffs=c)
    peak = f.linf()
    return f * (amplitude / peak) if peak > 0 else f


# ------------------------------------------------------------------ stepping


def linear_symbol(cfg: SolverConfig, grid: Grid) -> np.ndarray:
    ell = symbol_values("hyperviscous_ell", grid.xi)
    if cfg.variant == "modified":
        return cfg.eps * ell + symbol_values("dissipation_a", grid.xi)
    skew = 1j * grid.xi * eval_whitham_m(grid.xi)
    skew[grid.nyquist_index] = 0.0
    return cfg.eps * ell + skew


def _phi1(z):
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    out[small] = 1 + zs / 2 + zs ** 2 / 6 + zs ** 3 / 24 + zs ** 4 / 120 + zs ** 5 / 720
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def _phi2(z):
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    out[small] = 0.5 + zs / 6 + zs ** 2 / 24 + zs ** 3 / 120 + zs ** 4 / 720 + zs ** 5 / 5040
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / zb ** 2
    return out


class Stepper:
    """One-step maps for a fixed config and grid.

    ``advance`` returns the new coefficients and the increments of the two
    dissipation integrals int ||u||_N^2 and int ||ell^(1/2) u||^2.
    """

    def __init__(self, cfg: SolverConfig, grid: Optional[Grid] = None):
        self.cfg = cfg
        self.grid = grid or cfg.grid
        g = self.grid
        self.lam = linear_symbol(cfg, g).astype(complex)
        self.mask = g.dealias_mask if cfg.dealias else np.ones(g.n_points, bool)
        self.ik = g.ik * self.mask
        self.w_n = n_weight(g) if cfg.variant == "modified" else np.zeros(g.n_points)
        self.w_eps = symbol_values("hyperviscous_ell", g.xi)
        self.xi_eff = g.dealias_cutoff if cfg.dealias else g.xi_max
        self._cache: Dict[float, tuple] = {}

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        if not self.cfg.nonlinear:
            return np.zeros_like(c)
        u = inverse(self.grid, c * self.mask)
        return self.ik * forward(self.grid, 0.5 * u * u)

    def rates(self, c: np.ndarray) -> Tuple[float, float]:
        a2 = np.abs(c) ** 2
        dx = self.grid.dx
        return dx * float(np.sum(self.w_n * a2)), dx * float(np.sum(self.w_eps * a2))

    def cfl(self, c: np.ndarray, dt: float) -> float:
        if not self.cfg.nonlinear:
            return 0.0
        return float(np.max(np.abs(inverse(self.grid, c)))) * self.xi_eff * dt

    def _factors(self, dt: float):
        f = self._cache.get(dt)
        if f is None:
            z = -self.lam * dt
            if self.cfg.stepper == "integrating_factor_rk4":
                f = (np.exp(z), np.exp(z / 2))
            else:
                f = (np.exp(z), _phi1(z), _phi2(z))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[dt] = f
        return f

    def advance(self, c: np.ndarray, dt: float) -> Tuple[np.ndarray, float, float]:
        if self.cfg.stepper == "integrating_factor_rk4":
            return self._if_rk4(c, dt)
        return self._etd_rk2(c, dt)

    def _if_rk4(self, c, dt):
        E, E2 = self._factors(dt)
        k1 = self.nonlinear(c)
        u2 = E2 * (c + 0.5 * dt * k1)
        k2 = self.nonlinear(u2)
        u3 = E2 * c + 0.5 * dt * k2
        k3 = self.nonlinear(u3)
        u4 = E * c + dt * E2 * k3
        k4 = self.nonlinear(u4)
        new = E * c + dt / 6.0 * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
        q = [self.rates(v) for v in (c, u2, u3, u4)]
        dn = dt / 6.0 * (q[0][0] + 2 * q[1][0] + 2 * q[2][0] + q[3][0])
        de = dt / 6.0 * (q[0][1] + 2 * q[1][1] + 2 * q[2][1] + q[3][1])
        return new, dn, de

    def _etd_rk2(self, c, dt):
        E, p1, p2 = self._factors(dt)
        n0 = self.nonlinear(c)
        a = E * c + dt * p1 * n0
        new = a + dt * p2 * (self.nonlinear(a) - n0)
        q0, q1 = self.rates(c), self.rates(new)
        return new, 0.5 * dt * (q0[0] + q1[0]), 0.5 * dt * (q0[1] + q1[1])


def step(u: SpectralField, dt: float, cfg: SolverConfig) -> SpectralField:
    """Advance ``u`` by one step of size ``dt``.

    Raises CFLError if max|u| * xi_max * dt exceeds ``cfg.cfl_max`` and
    BlowupError if the result is not finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    st = Stepper(cfg, u.grid)
    c = u.coeffs
    cfl = st.cfl(c, dt)
    if cfl > cfg.cfl_max:
        raise CFLError(f"CFL number {cfl:.3g} exceeds {cfg.cfl_max:g}")
    new, _, _ = st.advance(c, dt)
    if not np.all(np.isfinite(new)):
        raise BlowupError(dt)
    return SpectralField(u.grid, coeffs=new)


# ------------------------------------------------------------------ runs


@dataclass
class RunRecord:
    """Everything recorded along one run.

    ``dissipation_n`` and ``dissipation_eps`` are the accumulated integrals
    int ||u||_N^2 ds and int ||ell^(1/2) u||^2 ds (without the factor eps).
    """

    config: SolverConfig
    times: List[float] = field(default_factory=list)
    norms: List[NormReport] = field(default_factory=list)
    l2_sq: List[float] = field(default_factory=list)
    dissipation_n: List[float] = field(default_factory=list)
    dissipation_eps: List[float] = field(default_factory=list)
    n_sq: List[float] = field(default_factory=list)
    ell_sq: List[float] = field(default_factory=list)
    cancellation: List[float] = field(default_factory=list)
    cancellation_scaled: List[float] = field(default_factory=list)
    max_dx: List[float] = field(default_factory=list)
    tail_fraction: List[float] = field(default_factory=list)
    snapshots: List[np.ndarray] = field(default_factory=list)
    snapshot_paths: List[str] = field(default_factory=list)
    status: str = "completed"
    message: str = ""
    failure_time: Optional[float] = None
    steps: int = 0
    dt_final: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.config.grid

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def field_at(self, i: int) -> SpectralField:
        return SpectralField(self.grid, coeffs=self.snapshots[i])

    @property
    def final(self) -> SpectralField:
        return self.field_at(-1)

    def series(self, name: str) -> np.ndarray:
        if name in ("l2", "n", "linf"):
            key = {"l2": "l2", "n": "n_norm", "linf": "linf"}[name]
            return np.array([getattr(r, key) for r in self.norms])
        if name.startswith("hdot_"):
            s = float(name[5:])
            return np.array([r.hs[s] for r in self.norms])
        return np.asarray(getattr(self, name))

    def series_header(self) -> List[str]:
        base = self.norms[0].header() if self.norms else \
            ["t", "l2", "n", "linf"] + [f"hdot_{s:g}" for s in sorted(self.config.norm_exponents)]
        return base + ["dissipation_n", "dissipation_eps", "cancellation", "tail_fraction"]

    def series_rows(self) -> List[list]:
        return [r.row() + [self.dissipation_n[i], self.dissipation_eps[i],
                           self.cancellation[i], self.tail_fraction[i]]
                for i, r in enumerate(self.norms)]


@dataclass
class IntegratorState:
    """Stepper state sufficient to continue a run exactly."""

    coeffs: np.ndarray
    t: float
    step: int
    dt: float
    dissipation_n: float
    dissipation_eps: float


class Integrator:
    """Runs a config forward in time, recording into a RunRecord."""

    def __init__(self, cfg: SolverConfig, u0: Optional[SpectralField] = None,
                 state: Optional[IntegratorState] = None):
        self.cfg = cfg
        self.grid = cfg.grid
        self.stepper = Stepper(cfg, self.grid)
        if state is None:
            u0 = u0 if u0 is not None else cfg.initial.build(self.grid)
            if u0.grid != self.grid:
                raise ValueError(f"initial data on {u0.grid}, config wants {self.grid}")
            state = IntegratorState(u0.coeffs.copy(), 0.0, 0, cfg.dt, 0.0, 0.0)
        self.state = state
        self.record = RunRecord(cfg)
        tail = np.abs(self.grid.k)
        kmax = np.max(tail[self.stepper.mask])
        self._tail_mask = 3 * tail > 2 * kmax
        self._tail_mask &= self.stepper.mask

    def checkpoint(self) -> IntegratorState:
        s = self.state
        return IntegratorState(s.coeffs.copy(), s.t, s.step, s.dt,
                               s.dissipation_n, s.dissipation_eps)

    def _observe(self):
        s, r, st = self.state, self.record, self.stepper
        if r.times and s.t <= r.times[-1]:
            return
        u = SpectralField(self.grid, coeffs=s.coeffs)
        r.times.append(s.t)
        r.norms.append(compute_norms(u, self.cfg.norm_exponents, s.t))
        r.l2_sq.append(float(weighted_sq_norm(self.grid, s.coeffs, 1.0)))
        qn, qe = st.rates(s.coeffs)
        r.n_sq.append(qn)
        r.ell_sq.append(qe)
        r.dissipation_n.append(s.dissipation_n)
        r.dissipation_eps.append(s.dissipation_eps)
        nl = st.nonlinear(s.coeffs) if self.cfg.nonlinear else \
            Stepper(self.cfg.with_(nonlinear=True), self.grid).nonlinear(s.coeffs)
        inner = abs(self.grid.dx * float(np.real(np.sum(nl * np.conj(s.coeffs)))))
        nn = math.sqrt(weighted_sq_norm(self.grid, nl, 1.0))
        uu = math.sqrt(r.l2_sq[-1])
        r.cancellation.append(inner / (nn * uu) if nn * uu > 0 else 0.0)
        r.cancellation_scaled.append(
            inner / (uu ** 2 * self.grid.xi_max) if uu > 0 else 0.0)
        r.max_dx.append(float(np.max(np.abs(inverse(self.grid, self.grid.ik * s.coeffs)))))
        total = float(np.sum(np.abs(s.coeffs) ** 2))
        tail = float(np.sum(np.abs(s.coeffs[self._tail_mask]) ** 2))
        r.tail_fraction.append(tail / total if total > 0 else 0.0)
        r.snapshots.append(s.coeffs.copy())

    def _fail(self, status: str, msg: str):
        r = self.record
        r.status, r.message, r.failure_time = status, msg, self.state.t
        log.warning("run stopped: %s (%s)", status, msg)

    def run(self, t_stop: Optional[float] = None) -> RunRecord:
        cfg, st = self.cfg, self.stepper
        t_stop = cfg.t_end if t_stop is None else t_stop
        self._observe()
        tol = 1e-12 * max(1.0, abs(t_stop))
        while self.state.t < t_stop - tol:
            s = self.state
            h = min(s.dt, t_stop - s.t)
            cfl = st.cfl(s.coeffs, h)
            while cfl > cfg.cfl_max and cfg.adaptive_dt:
                s.dt *= 0.5
                h = min(s.dt, t_stop - s.t)
                cfl = st.cfl(s.coeffs, h)
                log.info("t=%.4g: dt halved to %.3g (CFL %.3g)", s.t, s.dt, cfl)
                if s.dt < cfg.min_dt:
                    break
            if cfl > cfg.cfl_max:
                self._fail("blowup_detected", f"CFL number {cfl:.3g} at dt={h:.3g}")
                break
            new, dn, de = st.advance(s.coeffs, h)
            if not np.all(np.isfinite(new)):
                self._fail("blowup_detected", "non-finite coefficients")
                break
            s.coeffs = new
            s.t = s.t + h
            s.step += 1
            s.dissipation_n += dn
            s.dissipation_eps += de
            done = not s.t < t_stop - tol
            if s.step % cfg.snapshot_stride == 0 or done:
                self._observe()
                r = self.record
                if r.norms[-1].linf > cfg.blowup_cap:
                    self._fail("blowup_detected", f"max|u| above {cfg.blowup_cap:g}")
                    break
                if r.tail_fraction[-1] > cfg.tail_tol:
                    self._fail("resolution_lost",
                               f"spectral tail fraction {r.tail_fraction[-1]:.3g}")
                    break
        self.record.steps = self.state.step
        self.record.dt_final = self.state.dt
        return self.record


def run(cfg: SolverConfig, u0: Optional[SpectralField] = None) -> RunRecord:
    """Integrate ``u0`` (default: the config's initial data) to ``cfg.t_end``."""
    return Integrator(cfg, u0).run()


def resume(cfg: SolverConfig, state: IntegratorState) -> RunRecord:
    return Integrator(cfg, state=state).run()


# ------------------------------------------------------------ eps family


def sup_l2_distance(a: RunRecord, b: RunRecord) -> float:
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("runs were recorded at different times")
    if a.grid != b.grid:
        raise ValueError("runs live on different grids")
    diff = np.asarray(a.snapshots) - np.asarray(b.snapshots)
    return float(np.max(np.sqrt(weighted_sq_norm(a.grid, diff, 1.0))))


@dataclass
class FamilyStudy:
    """Sup-in-t L2 distances between runs of a decreasing eps family.

    ``eps`` ends with 0; ``consecutive[i]`` is the distance between the
    runs for ``eps[i]`` and ``eps[i + 1]`` and ``to_zero[i]`` the distance
    from ``eps[i]`` to the eps = 0 run.
    """

    eps: List[float]
    consecutive: List[float]
    to_zero: List[float]
    records: List[RunRecord] = field(repr=False, default_factory=list)

    @property
    def observed_rates(self) -> List[float]:
        """log10 ratios of successive distances to the eps = 0 run."""
        out = []
        for i in range(len(self.to_zero) - 2):
            a, b = self.to_zero[i], self.to_zero[i + 1]
            e0, e1 = self.eps[i], self.eps[i + 1]
            out.append(math.log(a / b) / math.log(e0 / e1) if a > 0 and b > 0 else float("nan"))
        return out

    def rows(self):
        out = [("eps", "eps_next", "consecutive", "to_zero")]
        for i in range(len(self.eps) - 1):
            out.append((self.eps[i], self.eps[i + 1], self.consecutive[i], self.to_zero[i]))
        return out


def _run_member(args):
    cfg, u0 = args
    return run(cfg, u0)


def epsilon_family_study(base: SolverConfig, eps_list: Sequence[float],
                         u0: Optional[SpectralField] = None, mollify_data: bool = True,
                         jobs: int = 1) -> FamilyStudy:
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("need at least three eps values")
    if any(e <= 0 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    u0 = u0 if u0 is not None else base.initial.build(base.grid)
    members = []
    for e in eps_list + [0.0]:
        data = mollify(u0, e) if mollify_data and e > 0 else u0
        members.append((base.with_(eps=e, adaptive_dt=False), data))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_member, members))
    else:
        records = [_run_member(m) for m in members]
    for e, r in zip(eps_list + [0.0], records):
        if not r.completed:
            raise RuntimeError(f"family member eps={e:g} ended with {r.status}: {r.message}")
    all_eps = eps_list + [0.0]
    consecutive = [sup_l2_distance(records[i], records[i + 1]) for i in range(len(records) - 1)]
    to_zero = [sup_l2_distance(r, records[-1]) for r in records[:-1]]
    return FamilyStudy(all_eps, consecutive, to_zero, records)

"""Experiment configs and runners that turn one config into one flat table."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import analysis, grad_dns, lbm_ref, logistic
from .carleman_grad import (CLOSURES, MAX_ORDER, ResourceGuardError, build_carleman_operator,
                            carleman_trajectory, lift_initial_state)
from .linalg import Grid

KINDS = ("logistic", "lbm", "grad-dns", "carleman", "error-compare", "kappa-sweep",
         "counts", "telescopic", "cost", "probe")

# overrides of the shared defaults for kinds whose natural setting differs
KIND_DEFAULTS: dict[str, dict] = {
    "logistic": {"K": (1, 2, 4, 8)},
    "lbm": {"omega": 1.0, "steps": 100, "snapshot_every": 10},
    "grad-dns": {"steps": 10000, "snapshot_every": 1000},
    "carleman": {"K": (2,), "snapshot_every": 5},
    "error-compare": {"K": (1, 2, 3, 4, 5)},
    "probe": {"K": (1, 2, 3), "steps": 300},
    "kappa-sweep": {"K": (1, 2, 3)},
    "telescopic": {"L": 4, "K": (1,), "steps": 10},
    "cost": {"K": (1, 2, 3)},
}


class ConfigError(ValueError):
    """Configuration does not satisfy the schema; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    # flow setting
    L: int = 32
    A1: float = 0.1
    A2: float = 0.1
    omega: float = 2.0
    cs: float = 1.0 / math.sqrt(3.0)
    dt: float = 0.01
    steps: int = 20
    snapshot_every: int = 1
    exact_inverse: bool = False
    # lifting
    K: tuple[int, ...] = (1,)
    closure: str = "diagonal"
    sites: tuple[tuple[int, int], ...] = ((0, 0), (8, 0), (8, 16))
    # logistic
    a: float = -1.0
    b: float = -1.0
    x0: float = 0.5
    t_max: float = 2.0
    n_t: int = 201
    # counting
    velocities: tuple[int, ...] = (9, 19)
    kmax: int = 10
    # conditioning
    sweep: str = "N"
    sizes: tuple[int, ...] = (16, 64, 256)
    t_values: tuple[int, ...] = tuple(range(1, 101))
    # cost
    N: int = 1024
    kappa: float = 100.0
    eps: float = 0.01
    s: float = 36.0
    # artifacts
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if "kind" not in data:
            raise ConfigError("kind", "missing experiment kind")
        kind = data["kind"]
        if kind not in KINDS:
            raise ConfigError("kind", f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
        known = {f.name: f for f in fields(cls)}
        merged = dict(KIND_DEFAULTS.get(kind, {}))
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            if value is not None:
                merged[key] = value
        kwargs = {key: _coerce(key, known[key], value) for key, value in merged.items()}
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return {k: [list(x) if isinstance(x, tuple) else x for x in v] if isinstance(v, tuple) else v
                for k, v in out.items()}

    def grad_params(self) -> grad_dns.GradParams:
        return grad_dns.GradParams(self.omega, self.cs, self.dt, not self.exact_inverse)

    def grid(self) -> Grid:
        return Grid(self.L, self.L)

    def validate(self) -> None:
        if self.L < 1:
            raise ConfigError("L", "must be positive")
        if self.steps < 0:
            raise ConfigError("steps", "must be non-negative")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every", "must be positive")
        if not self.K or min(self.K) < 1:
            raise ConfigError("K", "need at least one order >= 1")
        if self.closure not in CLOSURES:
            raise ConfigError("closure", f"choose from {', '.join(CLOSURES)}")
        if self.sweep not in ("N", "T"):
            raise ConfigError("sweep", "choose N or T")
        if self.kind in ("grad-dns", "carleman", "error-compare", "probe"):
            try:
                self.grad_params().validate()
            except ValueError as exc:
                raise ConfigError("dt", str(exc)) from None
        if self.kind == "lbm" and not 0.0 <= self.omega < 2.0:
            raise ConfigError("omega", "BGK needs 0 <= omega < 2")
        if self.kind == "probe":
            for x1, x2 in self.sites:
                if not (0 <= x1 < self.L and 0 <= x2 < self.L):
                    raise ConfigError("sites", f"site ({x1}, {x2}) lies outside the {self.L}x{self.L} grid")
        if self.kind == "cost" and not 0 < self.eps < 1:
            raise ConfigError("eps", "need 0 < eps < 1")


def _coerce(key: str, f: dataclasses.Field, value):
    try:
        if key in ("K", "velocities", "sizes", "t_values"):
            return parse_int_list(value)
        if key == "sites":
            return parse_sites(value)
        if f.type in ("int",):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if f.type in ("float",):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if f.type == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if f.type.startswith("str"):
            if not isinstance(value, str):
                raise TypeError
        return value
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r} for type {f.type}") from None


def parse_int_list(value) -> tuple[int, ...]:
    """Accept ``3``, ``[1, 2]``, ``"1,2,4"`` or an inclusive range ``"1..5"``."""
    if isinstance(value, bool):
        raise TypeError(value)
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        out: list[int] = []
        for part in value.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
        return tuple(out)
    return tuple(int(v) for v in value)


def parse_sites(value) -> tuple[tuple[int, int], ...]:
    """Accept ``"0,0;8,16"`` or a list of pairs."""
    if isinstance(value, str):
        pairs = [p.split(",") for p in value.split(";") if p.strip()]
    else:
        pairs = list(value)
    out = []
    for p in pairs:
        if len(p) != 2:
            raise ValueError(p)
        out.append((int(p[0]), int(p[1])))
    return tuple(out)


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)
    notes: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# runners


def _snapshot_rows(step: int, t: float, rho: np.ndarray, J: np.ndarray) -> list[list]:
    x1, x2 = np.meshgrid(np.arange(rho.shape[0]), np.arange(rho.shape[1]), indexing="ij")
    return [[step, t, int(a), int(b), float(r), float(j1), float(j2)]
            for a, b, r, j1, j2 in zip(x1.ravel(), x2.ravel(), rho.ravel(),
                                       J[..., 0].ravel(), J[..., 1].ravel())]


SNAPSHOT_HEADER = ["step", "t", "x1", "x2", "rho", "J1", "J2"]


def run_logistic(cfg: ExperimentConfig) -> Table:
    p = logistic.LogisticParams(cfg.a, cfg.b, cfg.x0)
    ts = np.linspace(0.0, cfg.t_max, cfg.n_t)
    t_sing = logistic.singular_time(p)
    exact = np.full_like(ts, np.nan)
    ok = ts < t_sing if t_sing is not None else np.ones_like(ts, dtype=bool)
    exact[ok] = logistic.exact_solution(p, ts[ok])
    series = [logistic.carleman_series(p, ts, K) for K in cfg.K]
    notes = {"t_singular": t_sing}
    if cfg.a < 0 and cfg.b < 0:
        notes["t_lim"] = logistic.convergence_horizon(p)
    elif cfg.a > 0 and cfg.b > 0:
        notes["t_blowup"] = logistic.blowup_time(p)
    header = ["t", "exact"] + [f"series_K{K}" for K in cfg.K]
    rows = [[float(t), float(e)] + [float(s[i]) for s in series] for i, (t, e) in enumerate(zip(ts, exact))]
    return Table(header, rows, notes)


def run_lbm(cfg: ExperimentConfig) -> Table:
    f0 = lbm_ref.kolmogorov_populations(cfg.grid(), cfg.A1, cfg.A2)
    table = Table(SNAPSHOT_HEADER, notes={"viscosity": lbm_ref.viscosity(cfg.omega)})
    for n, rho, J in lbm_ref.run(f0, cfg.omega, cfg.steps, cfg.snapshot_every):
        table.rows += _snapshot_rows(n, float(n), rho, J)
    return table


def run_grad(cfg: ExperimentConfig) -> Table:
    params = cfg.grad_params()
    field0 = grad_dns.kolmogorov_init(cfg.grid(), cfg.A1, cfg.A2, params)
    table = Table(SNAPSHOT_HEADER, notes={"viscosity": params.viscosity})
    for n, f in grad_dns.run(field0, params, cfg.steps, cfg.snapshot_every):
        table.rows += _snapshot_rows(n, n * params.dt, f.rho, f.J)
    return table


def _check_order(K: int) -> None:
    if K > MAX_ORDER:
        raise ResourceGuardError(f"K={K} exceeds the order guard ({MAX_ORDER})")


def run_carleman(cfg: ExperimentConfig) -> Table:
    params = cfg.grad_params()
    K = cfg.K[0]
    _check_order(K)
    op = build_carleman_operator(params, cfg.grid(), K, cfg.closure)
    field0 = grad_dns.kolmogorov_init(cfg.grid(), cfg.A1, cfg.A2, params)
    traj = carleman_trajectory(op, field0, cfg.steps)
    table = Table(SNAPSHOT_HEADER, notes={"K": K, "closure": cfg.closure,
                                          "lifted_dimension": op.shape[0]})
    for n in range(0, cfg.steps + 1, cfg.snapshot_every):
        table.rows += _snapshot_rows(n, n * params.dt, traj[n][..., 0], traj[n][..., 1:3])
    return table


def _runs(cfg: ExperimentConfig):
    """DNS reference and one lifted trajectory per requested K."""
    params = cfg.grad_params()
    for K in cfg.K:
        _check_order(K)
    field0 = grad_dns.kolmogorov_init(cfg.grid(), cfg.A1, cfg.A2, params)
    ref = grad_dns.trajectory(field0, params, cfg.steps)
    approx = {K: carleman_trajectory(build_carleman_operator(params, cfg.grid(), K, cfg.closure),
                                     field0, cfg.steps) for K in cfg.K}
    return params, ref, approx


def run_error_compare(cfg: ExperimentConfig) -> Table:
    params, ref, approx = _runs(cfg)
    eps = {K: analysis.mean_error_series(ref, tr) for K, tr in approx.items()}
    header = ["step", "t"] + [f"eps_K{K}" for K in cfg.K]
    rows = [[n, n * params.dt] + [float(eps[K][n]) for K in cfg.K] for n in range(cfg.steps + 1)]
    return Table(header, rows, {"closure": cfg.closure})


def run_probe(cfg: ExperimentConfig) -> Table:
    params, ref, approx = _runs(cfg)
    header = ["step", "t", "x1", "x2"] + [f"J1_K{K}" for K in cfg.K] + ["J1_dns"]
    rows = []
    for n in range(0, cfg.steps + 1, cfg.snapshot_every):
        for x1, x2 in cfg.sites:
            rows.append([n, n * params.dt, x1, x2] + [float(approx[K][n, x1, x2, 1]) for K in cfg.K]
                        + [float(ref[n, x1, x2, 1])])
    return Table(header, rows, {"closure": cfg.closure})


def run_kappa_sweep(cfg: ExperimentConfig) -> Table:
    params = cfg.grad_params()
    table = Table(["sweep", "x", "k", "kappa", "error"])
    for k in cfg.K:
        _check_order(k)
        if cfg.sweep == "N":
            sw = analysis.kappa_vs_sites(params, k, list(cfg.sizes), cfg.closure)
        else:
            sw = analysis.kappa_vs_steps(params, k, list(cfg.t_values), cfg.L, cfg.closure)
        table.rows += [[cfg.sweep, p.x, p.k, p.kappa, p.error] for p in sw.points]
        if sw.fit is not None:
            table.notes[f"fit_k{k}"] = dataclasses.asdict(sw.fit)
    return table


def run_counts(cfg: ExperimentConfig) -> Table:
    header = ["k"]
    for b in cfg.velocities:
        header += [f"N_{b}", f"Q_{b}"]
    rows = []
    for k in range(1, cfg.kmax + 1):
        row = [k]
        for b in cfg.velocities:
            row += list(analysis.carleman_variable_count(b, k))
        rows.append(row)
    return Table(header, rows)


def run_telescopic(cfg: ExperimentConfig) -> Table:
    params = cfg.grad_params()
    K = cfg.K[0]
    _check_order(K)
    op = build_carleman_operator(params, cfg.grid(), K, cfg.closure)
    tel = analysis.telescopic_propagator(op, max(cfg.steps, 1))
    # telescoping check against step-by-step propagation
    s0 = lift_initial_state(grad_dns.kolmogorov_init(cfg.grid(), cfg.A1, cfg.A2, params), K)
    v = s0.flat()
    stepped = v
    for _ in range(tel.T):
        stepped = op.matvec(stepped)
    gap = float(np.abs(tel.matrix @ v - stepped).max())
    rows = [[t, b] for t, b in enumerate(tel.bandwidth, start=1)]
    return Table(["T", "bandwidth"], rows, {"telescoping_max_abs_gap": gap, "dimension": op.shape[0]})


def run_cost(cfg: ExperimentConfig) -> Table:
    rows = []
    for k in cfg.K:
        hhl = analysis.solver_complexity("HHL", cfg.N, k, cfg.kappa, cfg.eps, cfg.s)
        cks = analysis.solver_complexity("CKS", cfg.N, k, cfg.kappa, cfg.eps)
        rows.append([cfg.N, k, cfg.kappa, cfg.eps, cfg.s, hhl, cks, hhl / cks])
    return Table(["N", "k", "kappa", "eps", "s", "cost_hhl", "cost_cks", "ratio"], rows,
                 {"g": 6, "prefactor": 1})


RUNNERS = {
    "logistic": run_logistic,
    "lbm": run_lbm,
    "grad-dns": run_grad,
    "carleman": run_carleman,
    "error-compare": run_error_compare,
    "probe": run_probe,
    "kappa-sweep": run_kappa_sweep,
    "counts": run_counts,
    "telescopic": run_telescopic,
    "cost": run_cost,
}


def run_experiment(cfg: ExperimentConfig) -> Table:
    return RUNNERS[cfg.kind](cfg)

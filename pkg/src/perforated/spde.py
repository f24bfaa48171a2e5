"""Stochastic Chafee-Infante equation on a masked grid.

    du + (-Lap u + u^3 - beta u) dt = h(t, u) dW

with a single scalar Wiener process shared by all nodes.  Paths are
advanced in batches.  The state is stored as ``u = exp(s) * v`` with
``|v| = 1`` (Euclidean), so decaying paths never underflow and the log-norm
is available without cancellation.

Two schemes are available:

``semi_implicit``
    (I + dt A) u+ = u + dt (beta u - u^3) + h(t, u) dW

``split`` (default)
    L-stable SDIRK2 for the diffusion, then the exact solution of the
    nodewise linear SDE frozen at the diffused state,
    u+ = u* exp((beta - u*^2 - g^2/2) dt + g dW) with g = h(t, u*)/u*.

Along each path the five Ito terms of the log-norm identity are
accumulated at left endpoints, with signs chosen so that

    log|u(T)|^2 - log|u(0)|^2 = gradient + nonlinear + ito + qv + martingale.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .domain import Grid
from .eigen import first_eigenpair
from ._kernels import moments, react_const
from .errors import NotFinite
from .noise import NoiseModel
from .operator import DiscreteLaplacian
from .rng import INIT_STREAM_BIT, NormalStream
from .shifted import SDIRK_GAMMA, make_solver
from .stability import decay_bound

SCHEMES = ("split", "semi_implicit")
TERMS = ("gradient", "nonlinear", "ito", "quadratic_variation", "martingale")
# suggested value for ``SpdeConfig.norm_floor`` when emulating plain floating point
NORM_SQ_FLOOR = 1e-300
DECAY_FACTOR = 1e-6
CHUNK = 8


@dataclass(frozen=True)
class SpdeConfig:
    beta: float
    noise: NoiseModel
    dt: float = 0.005
    T: float = 10.0
    burn_in: float | None = None  # None means T/5
    u0: str = "random"  # "random" nodal field or "phi1" multiple
    u0_norm: float = 1e-3  # L2 norm of the initial data
    paths: int = 1
    seed: int = 0
    scheme: str = "split"
    record_every: int = 10
    noise_substeps: int = 1  # >1 sums finer increments, for refinement studies
    solver: str = "auto"
    # stop a path (flagged degenerate) once |u|^2 drops below this; None never stops,
    # which is safe because the state is stored on a log scale
    norm_floor: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > self.dt:
            raise ValueError("need 0 < dt < T")
        if self.burn_in is not None and not 0 <= self.burn_in < self.T:
            raise ValueError("burn_in must lie in [0, T)")
        if not self.u0_norm > 0:
            raise ValueError("u0 must be nonzero")
        if self.u0 not in ("random", "phi1"):
            raise ValueError(f"unknown initial data {self.u0!r}")
        if self.paths < 1:
            raise ValueError("paths must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1 or self.noise_substeps < 1:
            raise ValueError("record_every and noise_substeps must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def t0(self) -> float:
        return self.T / 5 if self.burn_in is None else self.burn_in

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = self.noise.to_dict()
        return d


@dataclass
class TrajectoryStats:
    path: int
    times: np.ndarray
    log_norm_sq: np.ndarray  # log of the L2 norm squared at ``times``
    terms: dict  # cumulative Ito terms at ``times``
    lyapunov_hat: float
    degenerate: bool = False  # stopped early at the norm floor
    min_gradient_margin: float = math.inf  # min over steps of gradient rate - 2 lambda1
    min_nonlinear_margin: float = math.inf  # min of nonlinear rate + 2 beta
    max_ito_excess: float = -math.inf  # max of ito rate - gamma(t)
    log_c: float = -math.inf  # max_t log(|u(t)| e^{delta t} / |u0|)
    lambda1: float = math.nan

    @property
    def norm_sq(self) -> np.ndarray:
        return np.exp(self.log_norm_sq)

    @property
    def totals(self) -> dict:
        return {k: float(v[-1]) for k, v in self.terms.items()}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "norm_sq", "log_norm_sq", *TERMS])
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t)), repr(float(np.exp(self.log_norm_sq[i]))), repr(float(self.log_norm_sq[i])),
                            *(repr(float(self.terms[k][i])) for k in TERMS)])


@dataclass
class ItoCheck:
    residual: float
    min_gradient_margin: float
    min_nonlinear_margin: float
    max_ito_excess: float
    slack: float = 1e-8

    @property
    def inequalities_hold(self) -> bool:
        return (self.min_gradient_margin >= -self.slack and self.min_nonlinear_margin >= -self.slack
                and self.max_ito_excess <= self.slack)


def ito_decomposition_check(stats: TrajectoryStats, slack: float = 1e-8) -> ItoCheck:
    """Residual of the log-norm identity plus the per-step inequality margins."""
    change = stats.log_norm_sq[-1] - stats.log_norm_sq[0]
    total = math.fsum(stats.totals[k] for k in TERMS)
    return ItoCheck(abs(change - total), stats.min_gradient_margin, stats.min_nonlinear_margin, stats.max_ito_excess, slack)


class _Integrator:
    """Shared, read-only pieces of a run: operator, solvers, lambda1, phi1."""

    def __init__(self, grid: Grid, L: DiscreteLaplacian, cfg: SpdeConfig, lambda1=None, phi1=None):
        self.grid, self.L, self.cfg = grid, L, cfg
        if lambda1 is None or (phi1 is None and cfg.u0 == "phi1"):
            eig = first_eigenpair(L, tol=1e-10)
            lambda1 = eig.lambda1 if lambda1 is None else lambda1
            phi1 = eig.phi1 if phi1 is None else phi1
        self.lambda1 = float(lambda1)
        self.phi1 = phi1
        self.A = L.matrix.to_scipy()
        c = SDIRK_GAMMA * cfg.dt if cfg.scheme == "split" else cfg.dt
        self.solver = make_solver(L, c, cfg.solver)
        self.log_hn = grid.dimension * math.log(grid.h)
        noise = cfg.noise
        self.const_ratio = {"zero": 0.0, "linear": noise.alpha}.get(noise.kind)
        self.delta = -decay_bound(cfg.beta, noise.gamma0, noise.rho0, self.lambda1) / 2

    def ratio(self, t, u):
        if self.const_ratio is not None:
            return self.const_ratio
        return self.cfg.noise.ratio(t, u)

    def initial(self, path: int) -> np.ndarray:
        if self.cfg.u0 == "phi1":
            v = np.array(self.phi1, dtype=float)
        else:
            v = NormalStream(self.cfg.seed, path | INIT_STREAM_BIT).normals(self.grid.n_active)
        return v / np.sqrt(v @ v)

    def advance(self, v, s, t, dw):
        """One step from ``u = exp(s) v`` (rows of v).

        Returns the unnormalized new ``v``, its squared row norms and the
        left-endpoint rates (gradient, nonlinear, ito, <u,h>/|u|^2).
        """
        cfg = self.cfg
        if cfg.scheme == "split":
            w, energy = self.solver.sdirk2(v, energy=True)
        else:
            energy = self.solver.energy(v)
        mom = moments(v)
        nv = mom[:, 0]
        e2s = np.exp(2 * s)
        grad_rate = 2 * energy / nv
        nl_rate = 2 * (e2s * mom[:, 1] / nv - cfg.beta)
        const = self.const_ratio is not None
        if const:
            g = self.const_ratio
            ito_rate = np.full(len(s), g * g)
            q = np.full(len(s), g)
        else:
            g = self.ratio(t, np.exp(s)[:, None] * v)
            gv = g * v
            ito_rate = np.einsum("ij,ij->i", gv, gv) / nv
            q = np.einsum("ij,ij->i", gv, v) / nv
        rates = (grad_rate, nl_rate, ito_rate, q)

        if cfg.scheme == "semi_implicit":
            u = np.exp(s)[:, None] * v
            rhs = v + cfg.dt * (cfg.beta - u * u) * v + g * v * dw[:, None]
            w = self.solver.solve(rhs)
            return w, np.einsum("ij,ij->i", w, w), rates
        if const:
            out, nrm_sq = react_const(w, s, cfg.beta, g, cfg.dt, dw)
            return out, nrm_sq, rates
        u = np.exp(s)[:, None] * w
        g = self.ratio(t, u)
        out = w * np.exp((cfg.beta - u * u - 0.5 * g * g) * cfg.dt + g * dw[:, None])
        return out, np.einsum("ij,ij->i", out, out), rates

    def run(self, paths) -> list[TrajectoryStats]:
        cfg = self.cfg
        paths = list(paths)
        B = len(paths)
        n_steps = cfg.steps
        dt = cfg.dt
        streams = [NormalStream(cfg.seed, p) for p in paths]
        v = self.solver.embed(np.stack([self.initial(p) for p in paths]))
        s = np.full(B, math.log(cfg.u0_norm) - 0.5 * self.log_hn)
        log0 = 2 * s + self.log_hn

        acc = np.zeros((len(TERMS), B))
        n_rec = n_steps // cfg.record_every + 2
        rec_t = np.zeros((B, n_rec))
        rec_log = np.zeros((B, n_rec))
        rec_acc = np.zeros((B, len(TERMS), n_rec))
        n_filled = np.zeros(B, dtype=int)
        rec_log[:, 0] = log0
        n_filled[:] = 1
        log_burn = np.full(B, np.nan)
        k0 = int(round(cfg.t0 / dt))
        if k0 == 0:
            log_burn[:] = log0
        alive = np.ones(B, dtype=bool)
        stop_step = np.full(B, n_steps)
        degenerate = np.zeros(B, dtype=bool)
        g_margin = np.full(B, np.inf)
        n_margin = np.full(B, np.inf)
        i_excess = np.full(B, -np.inf)
        log_c = np.zeros(B)
        floor = -math.inf if cfg.norm_floor is None else math.log(cfg.norm_floor)

        block = 512
        for k in range(n_steps):
            t = k * dt
            if k % block == 0:
                nb = min(block, n_steps - k)
                dw_block = np.stack([st.wiener_increments(dt, nb, cfg.noise_substeps) for st in streams])
            dw = dw_block[:, k % block]
            with np.errstate(over="ignore", invalid="ignore"):
                w, nrm_sq, (grad_rate, nl_rate, ito_rate, q) = self.advance(v, s, t, dw)
            step_terms = np.stack([-grad_rate * dt, -nl_rate * dt, ito_rate * dt, -2 * q * q * dt, 2 * q * dw])
            acc[:, alive] += step_terms[:, alive]
            g_margin[alive] = np.minimum(g_margin, grad_rate - 2 * self.lambda1)[alive]
            n_margin[alive] = np.minimum(n_margin, nl_rate + 2 * cfg.beta)[alive]
            i_excess[alive] = np.maximum(i_excess, ito_rate - float(cfg.noise.gamma(t)))[alive]
            if not np.all(np.isfinite(nrm_sq)):
                raise NotFinite(f"state blew up at t={t + dt:g}; reduce dt")
            zero = nrm_sq == 0
            nrm_sq[zero] = 1.0
            nrm = np.sqrt(nrm_sq)
            w /= nrm[:, None]
            s_new = s + np.log(nrm)
            log_now = 2 * s_new + self.log_hn
            hit = alive & (zero | (log_now < floor))
            log_now = np.where(zero, -np.inf, log_now)

            if alive.all():
                v, s = w, s_new
            else:
                v[alive] = w[alive]
                s[alive] = s_new[alive]
            kk = k + 1
            log_c[alive] = np.maximum(log_c, 0.5 * (log_now - log0) + self.delta * kk * dt)[alive]
            if kk == k0:
                log_burn[alive] = log_now[alive]
            if kk % cfg.record_every == 0 or kk == n_steps or hit.any():
                rec = alive & ((kk % cfg.record_every == 0) | (kk == n_steps) | hit)
                idx = n_filled[rec]
                rec_t[rec, idx] = kk * dt
                rec_log[rec, idx] = log_now[rec]
                rec_acc[rec, :, idx] = acc[:, rec].T
                n_filled[rec] += 1
            if hit.any():
                degenerate |= hit
                stop_step[hit] = kk
                alive &= ~hit
                if not alive.any():
                    break

        out = []
        for b, p in enumerate(paths):
            m = n_filled[b]
            t_end = stop_step[b] * dt
            end = rec_log[b, m - 1]
            if np.isfinite(log_burn[b]) and t_end > cfg.t0:
                lyap = (end - log_burn[b]) / (t_end - cfg.t0)
            else:
                lyap = (end - log0[b]) / t_end
            out.append(TrajectoryStats(
                path=p,
                times=rec_t[b, :m].copy(),
                log_norm_sq=rec_log[b, :m].copy(),
                terms={name: rec_acc[b, i, :m].copy() for i, name in enumerate(TERMS)},
                lyapunov_hat=float(lyap),
                degenerate=bool(degenerate[b]),
                min_gradient_margin=float(g_margin[b]),
                min_nonlinear_margin=float(n_margin[b]),
                max_ito_excess=float(i_excess[b]),
                log_c=float(log_c[b]),
                lambda1=self.lambda1,
            ))
        return out


def step(u, t: float, L: DiscreteLaplacian, cfg: SpdeConfig, stream: NormalStream, solver=None) -> np.ndarray:
    """Advance a single state ``u`` by one step of ``cfg.scheme``."""
    u = np.asarray(u, dtype=float)
    integ = _Integrator.__new__(_Integrator)
    integ.cfg = cfg
    noise = cfg.noise
    integ.const_ratio = {"zero": 0.0, "linear": noise.alpha}.get(noise.kind)
    if solver is None:
        c = SDIRK_GAMMA * cfg.dt if cfg.scheme == "split" else cfg.dt
        solver = make_solver(L, c, cfg.solver)
    integ.solver = solver
    dw = np.array([stream.wiener_increments(cfg.dt, 1, cfg.noise_substeps)[0]])
    if u.any():
        out = solver.extract(integ.advance(solver.embed(u[None, :]), np.zeros(1), t, dw)[0])[0]
    else:
        out = np.zeros_like(u)
    if not np.all(np.isfinite(out)):
        raise NotFinite(f"state blew up at t={t + cfg.dt:g}; reduce dt")
    return out


def simulate_path(grid: Grid, L: DiscreteLaplacian, cfg: SpdeConfig, path: int = 0, lambda1=None) -> TrajectoryStats:
    return _Integrator(grid, L, cfg, lambda1).run([path])[0]


@dataclass
class EnsembleSummary:
    median_lyapunov: float
    mean_lyapunov: float
    decayed_fraction: float
    log_c_estimate: float
    c_estimate: float
    decay_bound: float
    lambda1: float
    predicted_linear: float | None  # 2(beta - lambda1) - alpha^2 for linear noise
    degenerate_paths: int
    paths: list = field(default_factory=list, repr=False)

    def to_dict(self, config: SpdeConfig | None = None) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "paths"}
        d["c_estimate"] = d["c_estimate"] if math.isfinite(d["c_estimate"]) else None
        d["lyapunov_hat"] = [p.lyapunov_hat for p in self.paths]
        d["norm_rate_median"] = self.median_lyapunov / 2
        if config is not None:
            d["config"] = config.to_dict()
        return d

    def write(self, out_dir, config: SpdeConfig | None = None, per_path: bool = True) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(self.to_dict(config), sort_keys=True, indent=2) + "\n")
        if per_path:
            (out / "paths").mkdir(exist_ok=True)
            for p in self.paths:
                p.write_csv(out / "paths" / f"path_{p.path:04d}.csv")


def summarize(stats: list[TrajectoryStats], cfg: SpdeConfig, lambda1: float) -> EnsembleSummary:
    stats = sorted(stats, key=lambda p: p.path)
    lyap = np.array([p.lyapunov_hat for p in stats])
    drop = np.array([p.log_norm_sq[-1] - p.log_norm_sq[0] for p in stats])
    log_c = max(p.log_c for p in stats)
    noise = cfg.noise
    return EnsembleSummary(
        median_lyapunov=float(np.median(lyap)),
        mean_lyapunov=math.fsum(lyap) / len(lyap),
        decayed_fraction=float(np.mean(drop < 2 * math.log(DECAY_FACTOR))),
        log_c_estimate=float(log_c),
        c_estimate=math.exp(log_c) if log_c < 700 else math.inf,
        decay_bound=decay_bound(cfg.beta, noise.gamma0, noise.rho0, lambda1),
        lambda1=lambda1,
        predicted_linear=2 * (cfg.beta - lambda1) - noise.alpha**2 if noise.kind == "linear" else None,
        degenerate_paths=int(sum(p.degenerate for p in stats)),
        paths=stats,
    )


def _run_chunk(args):
    grid, L, cfg, lambda1, phi1, chunk = args
    with threadpool_limits(1):
        return _Integrator(grid, L, cfg, lambda1, phi1).run(chunk)


def ensemble(grid: Grid, L: DiscreteLaplacian, cfg: SpdeConfig, workers: int = 1, chunk: int = CHUNK) -> EnsembleSummary:
    """Run ``cfg.paths`` paths in fixed chunks; results do not depend on ``workers``."""
    eig = first_eigenpair(L, tol=1e-10)
    chunks = [list(range(i, min(i + chunk, cfg.paths))) for i in range(0, cfg.paths, chunk)]
    jobs = [(grid, L, cfg, eig.lambda1, eig.phi1, c) for c in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    stats = [s for r in results for s in r]
    return summarize(stats, cfg, eig.lambda1)


def with_dt(cfg: SpdeConfig, factor: int) -> SpdeConfig:
    """Same Brownian path at ``dt / factor`` (requires ``cfg.noise_substeps`` divisible by factor)."""
    if cfg.noise_substeps % factor:
        raise ValueError("noise_substeps must be divisible by the refinement factor")
    return replace(cfg, dt=cfg.dt / factor, noise_substeps=cfg.noise_substeps // factor,
                   record_every=max(1, cfg.record_every * factor))

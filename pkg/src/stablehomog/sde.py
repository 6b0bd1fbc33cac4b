"""Path simulation for jump SDEs on the torus.

One Euler step applies drift, a Gaussian correction matching the covariance
of jumps below the cutoff, and then the jumps above the cutoff in time
order.  Noise is drawn from one counter-based stream per path, pregenerated
in fixed 512-step blocks, so results are byte-identical for any batch
partition or worker count.

States are stored wrapped to [0, 1)^d together with int64 winding counters;
wrapped + winding recovers the unwrapped position exactly even after very
large jumps.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .levy import StableMeasureSpec, small_jump_covariance
from .rng import DOMAIN_PATH, substream

__all__ = [
    "HistogramPlan",
    "SimResult",
    "OscillatingResult",
    "StiffStepWarning",
    "simulate_paths",
    "simulate_fast_chain",
    "simulate_oscillating",
    "simulate_single_path",
]

BLOCK_STEPS = 512
BATCH_PATHS = 4096


class StiffStepWarning(UserWarning):
    """The time step cannot resolve the fast scale of the coefficients."""


@dataclass
class HistogramPlan:
    bins: int
    burn: int = 0
    thin: int = 1
    per_path: bool = False  # keep one histogram row per path (chain diagnostics)


@dataclass
class SimResult:
    dim: int
    dt: float
    delta: float
    times: np.ndarray               # (T,)
    states: np.ndarray              # (n_paths, T, dim), wrapped
    winding: np.ndarray             # (n_paths, T, dim), int64
    functionals: dict               # name -> (n_paths, T)
    hist_counts: np.ndarray | None = None
    hist_total: int = 0

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def unwrapped(self) -> np.ndarray:
        return self.states + self.winding

    def final_states(self) -> np.ndarray:
        return self.states[:, -1, :]

    def final_functional(self, name: str) -> np.ndarray:
        return self.functionals[name][:, -1]


def _chol_apply(cov: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Apply the Cholesky factor of each (d, d) covariance to a normal draw."""
    d = cov.shape[-1]
    if d == 1:
        return np.sqrt(np.maximum(cov[:, 0, 0], 0.0))[:, None] * normals
    a = np.maximum(cov[:, 0, 0], 0.0)
    b = cov[:, 0, 1]
    c = np.maximum(cov[:, 1, 1], 0.0)
    l11 = np.sqrt(a)
    safe = l11 > 0
    l21 = np.where(safe, b / np.where(safe, l11, 1.0), 0.0)
    l22 = np.sqrt(np.maximum(c - l21 ** 2, 0.0))
    out = np.empty_like(normals)
    out[:, 0] = l11 * normals[:, 0]
    out[:, 1] = l21 * normals[:, 0] + l22 * normals[:, 1]
    return out


def _run_batch(dim, measure, drift_fn, jump_fn, cov_fn, x0, dt, n_steps, delta,
               master_seed, domain, path_ids, integrands, record_steps,
               histogram, feed_unwrapped):
    n = len(x0)
    rngs = [substream(master_seed, domain, int(g)) for g in path_ids]
    rate = measure.tail_mass(delta) * dt
    inv_alpha = 1.0 / measure.alpha

    x = np.mod(np.asarray(x0, dtype=float), 1.0)
    w = np.floor(x0 - x).astype(np.int64) + np.zeros((n, dim), dtype=np.int64)
    acc = {name: np.zeros(n) for name in integrands}

    n_rec = len(record_steps)
    rec_states = np.empty((n, n_rec, dim))
    rec_wind = np.empty((n, n_rec, dim), dtype=np.int64)
    rec_funcs = {name: np.empty((n, n_rec)) for name in integrands}
    rec_pos = 0

    hist = None
    hist_total = 0
    if histogram is not None:
        shape = (n, histogram.bins ** dim) if histogram.per_path \
            else (histogram.bins ** dim,)
        hist = np.zeros(shape, dtype=np.int64)

    def record():
        nonlocal rec_pos
        rec_states[:, rec_pos] = x
        rec_wind[:, rec_pos] = w
        for name in integrands:
            rec_funcs[name][:, rec_pos] = acc[name]
        rec_pos += 1

    record_set = set(int(s) for s in record_steps)

    for block_start in range(0, n_steps, BLOCK_STEPS):
        nb = min(BLOCK_STEPS, n_steps - block_start)
        counts = np.empty((n, nb), dtype=np.int64)
        normals = np.empty((n, nb, dim))
        jp_path, jp_step, jp_u, jp_vec = [], [], [], []
        for p, rng in enumerate(rngs):
            counts[p] = rng.poisson(rate, nb)
            normals[p] = rng.standard_normal((nb, dim))
            m = int(counts[p].sum())
            if m:
                radii = delta * rng.random(m) ** (-inv_alpha)
                dirs = measure.sample_directions(rng, m)
                u = rng.random(m)
                jp_path.append(np.full(m, p))
                jp_step.append(np.repeat(np.arange(nb), counts[p]))
                jp_u.append(u)
                jp_vec.append(radii[:, None] * dirs)
        if jp_path:
            jpath = np.concatenate(jp_path)
            jstep = np.concatenate(jp_step)
            ju = np.concatenate(jp_u)
            jvec = np.concatenate(jp_vec)
            order = np.lexsort((ju, jpath, jstep))
            jpath, jstep, jvec = jpath[order], jstep[order], jvec[order]
            seg = np.searchsorted(jstep, np.arange(nb + 1))
        else:
            seg = np.zeros(nb + 1, dtype=int)
            jpath = np.zeros(0, dtype=int)
            jvec = np.zeros((0, dim))

        for s in range(nb):
            k = block_start + s
            if k in record_set:
                record()
            state = x + w if feed_unwrapped else x
            t_k = k * dt
            for name, (fn, weight) in integrands.items():
                wt = 1.0 if weight is None else weight(t_k)
                acc[name] += dt * wt * fn(state)
            x = x + dt * drift_fn(state)
            if cov_fn is not None:
                cov = cov_fn(state)
                x = x + _chol_apply(dt * cov, normals[:, s])
            lo, hi = seg[s], seg[s + 1]
            if hi > lo:
                seg_paths = jpath[lo:hi]
                seg_vecs = jvec[lo:hi]
                alive = np.ones(hi - lo, dtype=bool)
                while alive.any():
                    idx = np.flatnonzero(alive)
                    _, first = np.unique(seg_paths[idx], return_index=True)
                    take = idx[first]
                    who = seg_paths[take]
                    cur = (x[who] + w[who]) if feed_unwrapped else x[who]
                    x[who] = x[who] + jump_fn(cur, seg_vecs[take])
                    alive[take] = False
            shift = np.floor(x)
            w = w + shift.astype(np.int64)
            x = x - shift
            if histogram is not None and k + 1 >= histogram.burn \
                    and (k + 1 - histogram.burn) % histogram.thin == 0:
                if dim == 1:
                    cells = np.minimum(
                        (x[:, 0] * histogram.bins).astype(np.int64),
                        histogram.bins - 1,
                    )
                else:
                    c0 = np.minimum((x[:, 0] * histogram.bins).astype(np.int64),
                                    histogram.bins - 1)
                    c1 = np.minimum((x[:, 1] * histogram.bins).astype(np.int64),
                                    histogram.bins - 1)
                    cells = c0 * histogram.bins + c1
                if histogram.per_path:
                    hist[np.arange(n), cells] += 1
                else:
                    hist += np.bincount(cells, minlength=histogram.bins ** dim)
                hist_total += n

    if n_steps in record_set:
        record()
    return rec_states, rec_wind, rec_funcs, hist, hist_total


def simulate_paths(*, dim, measure: StableMeasureSpec, drift_fn, jump_fn, cov_fn,
                   x0, dt, n_steps, delta=None, master_seed=0,
                   domain=DOMAIN_PATH, path_offset=0, integrands=None,
                   record_stride=None, histogram=None, feed_unwrapped=False,
                   n_workers=1) -> SimResult:
    """Run a batch of paths of a jump SDE.

    drift_fn, jump_fn, cov_fn act on (N, dim) states; jump_fn takes the
    noise increment as second argument, cov_fn returns the per-unit-time
    Gaussian correction covariance (or pass None to disable).  integrands
    maps names to (fn, weight) pairs accumulated as left-endpoint integrals
    dt * weight(t_k) * fn(state_k).
    """
    if delta is None:
        delta = dt ** (1.0 / measure.alpha)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0[None, :]
    n_paths = len(x0)
    integrands = dict(integrands or {})
    integrands = {
        name: (spec if isinstance(spec, tuple) else (spec, None))
        for name, spec in integrands.items()
    }

    if record_stride is None:
        record_steps = [n_steps]
    else:
        record_steps = list(range(0, n_steps, int(record_stride))) + [n_steps]
    times = np.array(record_steps, dtype=float) * dt

    batches = [
        (lo, min(lo + BATCH_PATHS, n_paths))
        for lo in range(0, n_paths, BATCH_PATHS)
    ]

    def work(bounds):
        lo, hi = bounds
        ids = np.arange(path_offset + lo, path_offset + hi)
        return _run_batch(
            dim, measure, drift_fn, jump_fn, cov_fn, x0[lo:hi], dt, n_steps,
            delta, master_seed, domain, ids, integrands, record_steps,
            histogram, feed_unwrapped,
        )

    if n_workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(work, batches))
    else:
        results = [work(b) for b in batches]

    states = np.concatenate([r[0] for r in results], axis=0)
    winding = np.concatenate([r[1] for r in results], axis=0)
    funcs = {
        name: np.concatenate([r[2][name] for r in results], axis=0)
        for name in integrands
    }
    hist = None
    hist_total = 0
    if histogram is not None:
        if histogram.per_path:
            hist = np.concatenate([r[3] for r in results], axis=0)
        else:
            hist = np.sum([r[3] for r in results], axis=0)
        hist_total = int(sum(r[4] for r in results))
    return SimResult(
        dim=dim, dt=dt, delta=delta, times=times, states=states,
        winding=winding, functionals=funcs, hist_counts=hist,
        hist_total=hist_total,
    )


def simulate_fast_chain(model, *, eps=0.0, x0, t_max, dt, master_seed=0,
                        domain=DOMAIN_PATH, path_offset=0, integrands=None,
                        record_stride=None, histogram=None, delta=None,
                        small_jumps="gaussian", n_workers=1) -> SimResult:
    """Simulate the rescaled torus process.

    Its drift is the fast part plus eps^{alpha-1} times the slow part;
    eps = 0 gives the pure fast dynamics whose invariant measure drives the
    homogenization.
    """
    n_steps = int(round(t_max / dt))
    b = model.drift_fast
    c = model.drift_slow
    slow_scale = float(eps) ** (model.alpha - 1.0) if eps > 0 else 0.0

    def drift_fn(x):
        out = np.zeros_like(x)
        if not b.is_zero:
            out = out + b.eval(x).reshape(-1, model.dim)
        if slow_scale and not c.is_zero:
            out = out + slow_scale * c.eval(x).reshape(-1, model.dim)
        return out

    def jump_fn(x, y):
        return model.jump_map(x, y)

    if delta is None:
        delta = dt ** (1.0 / model.alpha)

    def cov_fn(x):
        return small_jump_covariance(model.measure, model.jump_map, x, delta)

    return simulate_paths(
        dim=model.dim, measure=model.measure, drift_fn=drift_fn,
        jump_fn=jump_fn, cov_fn=None if small_jumps == "discard" else cov_fn,
        x0=x0, dt=dt, n_steps=n_steps,
        delta=delta, master_seed=master_seed, domain=domain,
        path_offset=path_offset, integrands=integrands,
        record_stride=record_stride, histogram=histogram,
        feed_unwrapped=False, n_workers=n_workers,
    )


@dataclass
class OscillatingResult:
    eps: float
    times: np.ndarray               # (T,)
    position: np.ndarray            # (n_paths, T, dim), unwrapped macroscopic state
    fast_state: np.ndarray          # (n_paths, T, dim) in [0,1): position/eps mod 1
    potential_integral: np.ndarray  # (n_paths, T)

    @property
    def n_paths(self) -> int:
        return self.position.shape[0]


def simulate_oscillating(model, *, eps, x0, t_max, dt, master_seed=0,
                         domain=DOMAIN_PATH, path_offset=0, record_stride=None,
                         delta=None, small_jumps="gaussian",
                         n_workers=1, max_fast_step=0.05) -> OscillatingResult:
    """Simulate the oscillating process at the macroscopic scale.

    With no fast drift the equation is stepped directly at the macroscopic
    scale.  Otherwise the fast drift carries an eps^{1-alpha} factor that
    makes direct stepping stiff, so the rescaled process is stepped at a
    resolved fast time step and mapped back through the exact scaling
    relation.  The potential integral accumulates the Feynman-Kac weight
    exponent along the way.
    """
    n_out = int(round(t_max / dt))
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0[None, :]
    e = model.potential_fast
    g = model.potential_slow
    eps = float(eps)

    if model.drift_fast.is_zero:
        if dt > eps ** model.alpha:
            warnings.warn(
                f"dt = {dt} exceeds eps^alpha = {eps ** model.alpha:.3g}; "
                "the step cannot resolve the oscillation of the coefficients",
                StiffStepWarning,
                stacklevel=2,
            )
        c = model.drift_slow
        pot_scale = eps ** (1.0 - model.alpha)

        def drift_fn(x):
            if c.is_zero:
                return np.zeros_like(x)
            return c.eval(x / eps).reshape(-1, model.dim)

        def jump_fn(x, y):
            return model.jump_map(x / eps, y)

        if delta is None:
            delta = dt ** (1.0 / model.alpha)

        def cov_fn(x):
            return small_jump_covariance(model.measure, model.jump_map, x / eps, delta)

        def pot_fn(x):
            out = np.zeros(len(x))
            if not e.is_zero:
                out = out + pot_scale * e.eval(x / eps).reshape(-1)
            if not g.is_zero:
                out = out + g.eval(x / eps).reshape(-1)
            return out

        res = simulate_paths(
            dim=model.dim, measure=model.measure, drift_fn=drift_fn,
            jump_fn=jump_fn, cov_fn=None if small_jumps == "discard" else cov_fn,
            x0=x0, dt=dt, n_steps=n_out,
            delta=delta, master_seed=master_seed, domain=domain,
            path_offset=path_offset, integrands={"potential": pot_fn},
            record_stride=record_stride, feed_unwrapped=True,
            n_workers=n_workers,
        )
        position = res.unwrapped()
        fast = np.mod(position / eps, 1.0)
        return OscillatingResult(
            eps=eps, times=res.times, position=position, fast_state=fast,
            potential_integral=res.functionals["potential"],
        )

    # resolved fast-scale route: integer substeps land exactly on the grid
    t_fast = t_max * eps ** (-model.alpha)
    dt_fast_raw = dt * eps ** (-model.alpha)
    n_sub = max(1, int(np.ceil(dt_fast_raw / max_fast_step)))
    dt_fast = dt_fast_raw / n_sub

    def pot_fast(x):
        out = np.zeros(len(x))
        if not e.is_zero:
            out = out + eps * e.eval(x).reshape(-1)
        if not g.is_zero:
            out = out + eps ** model.alpha * g.eval(x).reshape(-1)
        return out

    stride = None if record_stride is None else int(record_stride) * n_sub
    res = simulate_fast_chain(
        model, eps=eps, x0=np.mod(x0 / eps, 1.0), t_max=t_fast, dt=dt_fast,
        master_seed=master_seed, domain=domain, path_offset=path_offset,
        integrands={"potential": pot_fast},
        record_stride=stride if record_stride is not None else None,
        delta=delta, small_jumps=small_jumps, n_workers=n_workers,
    )
    position = eps * res.unwrapped()
    # shift so every path starts at its requested macroscopic point
    position = position + (x0[:, None, :] - position[:, :1, :])
    fast = res.states
    return OscillatingResult(
        eps=eps, times=res.times * eps ** model.alpha, position=position,
        fast_state=fast, potential_integral=res.functionals["potential"],
    )


@dataclass
class JumpRecord:
    """Jump events of one trajectory: arrival times, the state just before
    each jump, and the driving noise vectors."""
    times: np.ndarray           # (J,)
    pre_states: np.ndarray      # (J, dim), unwrapped
    vectors: np.ndarray         # (J, dim)


def simulate_single_path(model, *, eps, x0, t_max, master_seed=0,
                         drift_substep=1e-3, domain=DOMAIN_PATH,
                         path_index=0, return_jumps=False):
    """One trajectory with jumps resolved at their exact arrival times.

    A readable reference integrator: between jumps the drift ODE is stepped
    at ``drift_substep`` with the Gaussian correction for sub-cutoff jumps
    added on each substep; at each jump time the state moves by the jump
    map applied to the noise increment.  Unwrapped states are returned,
    sampled at the jump times and the endpoints.  Serves as a cross-check
    for the lockstep engine, not for production runs.

    With ``return_jumps`` the jump events themselves come back as a third
    value, which the scaling-limit diagnostics consume.
    """
    from .levy import sample_jump_stream

    rng = substream(master_seed, domain, path_index)
    eps = float(eps)
    alpha = model.alpha
    delta = drift_substep ** (1.0 / alpha)
    stream = sample_jump_stream(model.measure, delta, t_max, rng)

    def drift(x):
        fast = x / eps
        out = np.zeros(model.dim)
        if not model.drift_fast.is_zero:
            out = out + eps ** (1.0 - alpha) * model.drift_fast.eval(
                fast[None, :]
            ).reshape(-1)
        if not model.drift_slow.is_zero:
            out = out + model.drift_slow.eval(fast[None, :]).reshape(-1)
        return out

    x = np.asarray(x0, dtype=float).reshape(model.dim).copy()
    t = 0.0
    times = [0.0]
    states = [x.copy()]
    jump_pre = []
    events = list(zip(stream.times, stream.vectors)) + [(t_max, None)]
    for t_next, vec in events:
        while t < t_next - 1e-15:
            h = min(drift_substep, t_next - t)
            cov = small_jump_covariance(
                model.measure, model.jump_map, (x / eps)[None, :], delta
            )
            gauss = _chol_apply(h * cov, rng.standard_normal((1, model.dim)))
            x = x + h * drift(x) + gauss.reshape(-1)
            t += h
        if vec is not None:
            jump_pre.append(x.copy())
            x = x + model.jump_map((x / eps)[None, :], vec[None, :]).reshape(-1)
            times.append(t_next)
            states.append(x.copy())
    times.append(t_max)
    states.append(x.copy())
    if return_jumps:
        record = JumpRecord(
            times=np.asarray(stream.times, dtype=float),
            pre_states=np.array(jump_pre, dtype=float).reshape(-1, model.dim),
            vectors=np.asarray(stream.vectors, dtype=float).reshape(-1, model.dim),
        )
        return np.array(times), np.array(states), record
    return np.array(times), np.array(states)

"""Invariant measure estimation and ergodicity diagnostics.

The fast torus process is exponentially ergodic; everything here estimates
its invariant measure from long chains and quantifies how much to trust the
estimate: a mixing rate fitted from autocovariances sets the burn-in, and
agreement between independent chains bounds the residual sampling error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import grid_points, periodic_cubic_interp
from .rng import DOMAIN_CHAIN, substream
from .sde import HistogramPlan, simulate_fast_chain

__all__ = [
    "EmpiricalMeasure",
    "MixingDiagnostic",
    "MeasureDistance",
    "estimate_invariant_measure",
    "mixing_diagnostic",
    "ergodic_average",
    "compare_measures",
    "invariance_check",
]


@dataclass
class EmpiricalMeasure:
    """Histogram measure on the uniform cell partition of the torus."""

    dim: int
    bins: int
    probs: np.ndarray                 # (bins**dim,), sums to 1
    n_samples: int = 0
    n_chains: int = 1
    between_chain_tv: float = 0.0
    converged: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if len(self.probs) != self.bins ** self.dim:
            raise ValueError("probs length does not match bins**dim")
        if np.any(self.probs < 0):
            raise ValueError("probs must be nonnegative")
        s = self.probs.sum()
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1 (got {s!r})")

    @classmethod
    def from_counts(cls, dim, bins, counts, **kw) -> "EmpiricalMeasure":
        counts = np.asarray(counts, dtype=float).reshape(-1)
        total = counts.sum()
        if total <= 0:
            raise ValueError("empty histogram")
        probs = counts / total
        probs[-1] += 1.0 - probs.sum()  # exact normalization
        return cls(dim, bins, probs, n_samples=int(total), **kw)

    @classmethod
    def uniform(cls, dim, bins) -> "EmpiricalMeasure":
        n = bins ** dim
        return cls(dim, bins, np.full(n, 1.0 / n))

    def cell_centers(self) -> np.ndarray:
        return grid_points(self.dim, self.bins) + 0.5 / self.bins

    def density(self) -> np.ndarray:
        """Density values at cell centers (cell mass over cell volume)."""
        return self.probs * self.bins ** self.dim

    def integrate(self, fn) -> float:
        """Midpoint-rule integral of a function against the measure."""
        vals = np.asarray(fn(self.cell_centers()), dtype=float).reshape(-1)
        return float((self.probs * vals).sum())

    def node_weights(self, n: int) -> np.ndarray:
        """Probability weights at the uniform grid nodes i/n.

        The histogram density lives at cell centers; cubic periodic interpolation
        moves it to the requested nodes and the result is renormalized.
        """
        dens = self.density()
        if self.dim == 2:
            dens = dens.reshape(self.bins, self.bins)
        pts = grid_points(self.dim, n)
        # evaluate the center-based density at the nodes: shift by half a cell
        vals = periodic_cubic_interp(
            dens, np.mod(pts - 0.5 / self.bins, 1.0)
        )
        vals = np.clip(vals, 0.0, None)
        total = vals.sum()
        if total <= 0:
            raise ValueError("degenerate measure after interpolation")
        return vals / total

    def resample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw points from the histogram (uniform within each cell)."""
        cells = rng.choice(len(self.probs), size=n, p=self.probs)
        u = rng.random((n, self.dim))
        if self.dim == 1:
            base = cells[:, None].astype(float)
        else:
            base = np.stack([cells // self.bins, cells % self.bins], axis=-1).astype(float)
        return (base + u) / self.bins


@dataclass
class MixingDiagnostic:
    rate: float                # fitted exponential decay rate in inverse time
    r_squared: float
    n_lags: int
    observable: str = ""
    degenerate: bool = False   # observable variance below noise floor
    failed: bool = False       # decay not resolvable from the series
    note: str = ""


def _autocovariance(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocovariance via FFT, averaged over chains; series (C, T)."""
    c, t = series.shape
    x = series - series.mean(axis=1, keepdims=True)
    nfft = int(2 ** np.ceil(np.log2(2 * t)))
    f = np.fft.rfft(x, n=nfft, axis=1)
    acov = np.fft.irfft((f * np.conj(f)).real, n=nfft, axis=1)[:, : max_lag + 1]
    return acov.mean(axis=0) / t


def mixing_diagnostic(model, *, dt, n_steps=4000, eps=0.0, n_chains=4,
                      master_seed=0, observable=None,
                      observable_name="cos(2 pi x1)",
                      max_lag=None) -> MixingDiagnostic:
    """Fit the exponential decay rate of an observable's autocovariance.

    The default observable is the first torus harmonic.  The rate comes
    from a log-linear fit over lags where the autocovariance stays a safe
    factor above its noise floor.
    """
    if observable is None:
        def observable(x):
            return np.cos(2 * np.pi * x[..., 0])

    starts = (np.arange(n_chains)[:, None] + 0.5) / n_chains
    x0 = np.tile(starts, (1, model.dim))
    res = simulate_fast_chain(
        model, x0=x0, t_max=n_steps * dt, dt=dt, eps=eps,
        master_seed=master_seed, domain=DOMAIN_CHAIN, record_stride=1,
    )
    series = observable(res.states)           # (C, T)
    if max_lag is None:
        max_lag = min(n_steps // 4, int(np.ceil(4.0 / dt)) if dt < 1 else n_steps // 4)
    acov = _autocovariance(series, max_lag)
    var0 = acov[0]
    scale = np.abs(series).max()
    if var0 <= 1e-12 * max(scale, 1.0) ** 2:
        return MixingDiagnostic(
            rate=np.nan, r_squared=0.0, n_lags=0, observable=observable_name,
            degenerate=True, note="observable variance at noise floor",
        )
    # keep lags while the autocovariance stays well above both the sampling
    # noise floor and a fixed fraction of the variance: near-floor values
    # carry log-scale noise that would bias the slope
    floor = max(var0 / np.sqrt(series.shape[0] * series.shape[1]), 0.05 * var0)
    good = acov > floor
    cut = int(np.argmin(good)) if not good.all() else len(acov)
    if cut < 4:
        return MixingDiagnostic(
            rate=np.nan, r_squared=0.0, n_lags=int(cut),
            observable=observable_name, failed=True,
            note="autocovariance decays below the noise floor within 3 lags; "
                 "decrease dt or increase the series length",
        )
    lags = np.arange(cut)
    logs = np.log(acov[:cut])
    slope, intercept = np.polyfit(lags, logs, 1, w=acov[:cut] / var0)
    fitted = slope * lags + intercept
    ss_res = ((logs - fitted) ** 2).sum()
    ss_tot = ((logs - logs.mean()) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    rate = -slope / dt
    return MixingDiagnostic(
        rate=float(rate), r_squared=float(r2), n_lags=int(cut),
        observable=observable_name, failed=bool(rate <= 0),
    )


def estimate_invariant_measure(model, *, dt, n_steps, eps=0.0, n_chains=32,
                               bins=64, burn=None, thin=1, master_seed=0,
                               tv_tolerance=0.05, n_workers=1) -> EmpiricalMeasure:
    """Histogram estimate of the invariant measure of the fast process.

    ``eps`` > 0 adds the slow drift contribution eps^(alpha-1) * c, giving
    the measure of the eps-rescaled process; eps = 0 is the limit process.
    Chains start spread over the torus.  ``burn`` defaults to ten mixing
    times when the mixing diagnostic succeeds and a tenth of the run
    otherwise.  Convergence is declared when the total variation between
    the aggregated even-indexed and odd-indexed chains is below
    ``tv_tolerance``; single-chain pairwise TV would be dominated by
    histogram sampling noise at practical run lengths.
    """
    if n_chains < 2:
        raise ValueError("need at least two chains for the split-half check")
    meta = {"dt": dt, "n_steps": int(n_steps), "thin": int(thin),
            "eps": float(eps)}
    if burn is None:
        diag = mixing_diagnostic(
            model, dt=dt, n_steps=min(int(n_steps), 4000), eps=eps,
            master_seed=master_seed + 1,
        )
        if not (diag.failed or diag.degenerate):
            burn = min(int(np.ceil(10.0 / (diag.rate * dt))), int(n_steps) // 2)
            meta["mixing_rate"] = diag.rate
        else:
            burn = int(n_steps) // 10
            meta["mixing_rate"] = None
    meta["burn"] = int(burn)

    rng = substream(master_seed, DOMAIN_CHAIN, 2 ** 20)
    x0 = rng.random((n_chains, model.dim))
    res = simulate_fast_chain(
        model, x0=x0, t_max=n_steps * dt, dt=dt, eps=eps,
        master_seed=master_seed, domain=DOMAIN_CHAIN, n_workers=n_workers,
        histogram=HistogramPlan(bins=bins, burn=int(burn), thin=int(thin),
                                per_path=True),
    )
    counts = res.hist_counts                      # (n_chains, bins**dim)
    totals = counts.sum(axis=1).astype(float)
    if np.any(totals == 0):
        raise RuntimeError("burn-in consumed the whole run; increase n_steps")
    # split-half agreement: aggregate even and odd chains separately; the
    # aggregates are large enough that their TV is not drowned in the
    # per-chain histogram noise of a single finite run
    even = counts[0::2].sum(axis=0).astype(float)
    odd = counts[1::2].sum(axis=0).astype(float)
    tv = 0.5 * np.abs(even / even.sum() - odd / odd.sum()).sum()
    measure = EmpiricalMeasure.from_counts(
        model.dim, bins, counts.sum(axis=0),
        n_chains=n_chains, between_chain_tv=float(tv),
        converged=bool(tv < tv_tolerance), meta=meta,
    )
    return measure


def ergodic_average(f, path, *, use_fast=True):
    """Time average (1/t) integral of f along recorded trajectory states.

    ``f`` is a callable (or a field with ``.eval``) on the torus; ``path``
    is a simulation result carrying ``times`` plus recorded states
    (``fast_state`` for oscillating runs, wrapped ``states`` otherwise).
    Trapezoidal quadrature on the record grid.  Returns one average per
    path (a float for a single path).
    """
    fn = f.eval if hasattr(f, "eval") else f
    if hasattr(path, "fast_state") and use_fast:
        states = path.fast_state
    else:
        states = np.mod(path.states, 1.0)
    times = np.asarray(path.times, dtype=float)
    if times.size < 2:
        raise ValueError("path must record at least two time points")
    vals = np.asarray(fn(states), dtype=float)
    vals = vals.reshape(states.shape[0], len(times))   # (n_paths, T)
    avg = np.trapezoid(vals, times, axis=1) / (times[-1] - times[0])
    return float(avg[0]) if avg.size == 1 else avg


def stationary_average(model, fn, *, dt, n_steps, eps=0.0, n_chains=32,
                       burn=0.1, master_seed=0, n_workers=1):
    """Long-run time average of fn along the fast process.

    ``burn`` is a fraction of the run discarded at the start.  Returns
    (mean, stderr, per_chain) with the standard error taken across chains.
    """
    burn_steps = int(burn * n_steps) if burn < 1 else int(burn)
    t_burn = burn_steps * dt
    t_total = n_steps * dt

    def weight(t):
        return 1.0 if t >= t_burn else 0.0

    rng = substream(master_seed, DOMAIN_CHAIN, 2 ** 20 + 1)
    x0 = rng.random((n_chains, model.dim))
    res = simulate_fast_chain(
        model, x0=x0, t_max=t_total, dt=dt, eps=eps, master_seed=master_seed,
        domain=DOMAIN_CHAIN, n_workers=n_workers,
        integrands={"obs": (lambda x: np.asarray(fn(x)).reshape(-1), weight)},
    )
    per_chain = res.final_functional("obs") / (t_total - t_burn)
    mean = float(per_chain.mean())
    stderr = float(per_chain.std(ddof=1) / np.sqrt(n_chains)) if n_chains > 1 else np.inf
    return mean, stderr, per_chain


@dataclass
class MeasureDistance:
    tv: float
    w1: float
    w1_exact: bool   # False when only a lower bound is available (dim 2)


def _circle_w1(p: np.ndarray, q: np.ndarray) -> float:
    """Exact 1-Wasserstein distance between histograms on the circle."""
    f = np.cumsum(p - q)
    med = np.median(f)
    return float(np.abs(f - med).sum() / len(p))


def compare_measures(a: EmpiricalMeasure, b: EmpiricalMeasure) -> MeasureDistance:
    """Total variation and 1-Wasserstein distance between two histograms.

    In dim 2 the reported w1 is the larger of the two marginal circle
    distances, a lower bound on the true transport distance.
    """
    if (a.dim, a.bins) != (b.dim, b.bins):
        raise ValueError("measures must share the same grid")
    tv = 0.5 * float(np.abs(a.probs - b.probs).sum())
    if a.dim == 1:
        return MeasureDistance(tv=tv, w1=_circle_w1(a.probs, b.probs), w1_exact=True)
    pa = a.probs.reshape(a.bins, a.bins)
    pb = b.probs.reshape(b.bins, b.bins)
    w1 = max(
        _circle_w1(pa.sum(axis=1), pb.sum(axis=1)),
        _circle_w1(pa.sum(axis=0), pb.sum(axis=0)),
    )
    return MeasureDistance(tv=tv, w1=w1, w1_exact=False)


def invariance_check(model, measure: EmpiricalMeasure, *, dt, n_steps=1,
                     n_samples=20000, master_seed=0) -> MeasureDistance:
    """Push points sampled from the measure through the dynamics.

    For the true invariant measure the push-forward is the measure itself,
    so the returned distance isolates estimation plus discretization error.
    """
    rng = substream(master_seed, DOMAIN_CHAIN, 2 ** 20 + 2)
    x0 = measure.resample(rng, n_samples)
    res = simulate_fast_chain(
        model, x0=x0, t_max=n_steps * dt, dt=dt, master_seed=master_seed + 7,
        domain=DOMAIN_CHAIN,
    )
    final = res.final_states()
    bins = measure.bins
    if model.dim == 1:
        cells = np.minimum((final[:, 0] * bins).astype(int), bins - 1)
    else:
        c0 = np.minimum((final[:, 0] * bins).astype(int), bins - 1)
        c1 = np.minimum((final[:, 1] * bins).astype(int), bins - 1)
        cells = c0 * bins + c1
    counts = np.bincount(cells, minlength=bins ** model.dim)
    pushed = EmpiricalMeasure.from_counts(model.dim, bins, counts)
    return compare_measures(measure, pushed)

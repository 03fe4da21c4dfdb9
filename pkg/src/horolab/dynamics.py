"""Directional flows: recurrence scans, scenery sampling, rank dichotomy.

The displacement proxy measures how close some nontrivial word conjugate
a_{-tv} g^{-1} w g a_{tv} comes to the identity in PSL max-entry distance;
small values witness returns of the orbit point x exp(tv) to a bounded
set.  Verdicts from finite scans are heuristic by construction and carry
their scan parameters.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import product, psl2, schottky
from ._kernels import displacement_grid, walk_stats
from .errors import PreconditionError


@dataclass(frozen=True)
class OrbitPoint:
    g: np.ndarray  # (r, 2, 2) representative of Gamma g
    system: schottky.SchottkySystem


@dataclass
class SceneryElement:
    h: np.ndarray  # (r, 2, 2) accumulation witness
    t: float  # time of the witness
    word: tuple  # producing word (signed letters)
    defect: float  # distance between the paired conjugates
    lam: np.ndarray = None  # generalized Jordan a-part when defined
    flags_transverse: bool = False  # (y_h, e+), (y_h^-1, e-) transverse


def _conjugated_words(x, max_len):
    """Word-ball products conjugated by the representative, with words."""
    last, mats, lengths, parent, _ = schottky.word_ball(x.system, max_len)
    gi = product.inverse(x.g)
    conj = np.einsum("rij,wrjk,rkl->wril", gi, mats, x.g, optimize=True)
    keep = lengths > 0
    return conj[keep], last, parent, np.nonzero(keep)[0]


def displacement(x, v, t, max_len):
    """Min over nontrivial words of |a_{-tv} g^{-1} w g a_{tv} - I|.

    PSL distance: the smaller of the max-entry distances to +I and -I.
    """
    if max_len < 1:
        raise PreconditionError("word-ball radius must be >= 1")
    v = np.asarray(v, dtype=float)
    conj, *_ = _conjugated_words(x, max_len)
    out = displacement_grid(
        np.ascontiguousarray(conj), v, np.asarray([float(t)])
    )
    return float(out[0])


@dataclass
class RecurrenceScan:
    times: np.ndarray  # scan grid
    displacements: np.ndarray
    return_times: np.ndarray
    verdict: str  # recurrent-like | transient-like | inconclusive
    meta: dict = field(default_factory=dict)


def recurrence_scan(x, v, horizon, threshold, max_len, dt=0.05,
                    reduce_reps=True, segment=1.0, lift_bound=1e6):
    """Grid scan of the displacement proxy along exp(t v).

    The stored representative is reduced whenever a word brings the lift
    closer to the identity by a factor 1/2 (fundamental-domain proxy,
    keeps long scans inside float range); the word ball is then re-centered
    at the new representative.  recurrent-like: returns in the last 20% of
    the horizon and the reduced lift still bounded; transient-like: no
    returns in the last 50% or the lift escaped (no word brings it back
    under `lift_bound`, the flat-escape guard).  Verdicts are heuristic
    and carry the scan parameters.
    """
    if threshold <= 0:
        raise PreconditionError("threshold must be positive")
    v = np.asarray(v, dtype=float)
    meta = {"horizon": horizon, "threshold": threshold, "W": max_len,
            "dt": dt, "reductions": 0}
    if horizon <= 0:
        return RecurrenceScan(
            np.array([]), np.array([]), np.array([]), "inconclusive", meta
        )
    _, words, lengths, _, _ = schottky.word_ball(x.system, max_len)
    words = words[lengths > 0]
    meta["n_words"] = words.shape[0]
    base = psl2.normalize(x.g.copy())
    t_base = 0.0
    ts_all, disp_all = [], []
    t0 = 0.0
    n_grid = int(math.floor(horizon / dt + 0.5))
    grid = np.arange(n_grid + 1) * dt
    pos = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while pos <= n_grid:
            seg_end = min(t0 + segment, horizon)
            hi = min(int(math.floor(seg_end / dt + 0.5)), n_grid)
            take = grid[pos : hi + 1]
            if len(take) == 0:
                break
            binv = product.inverse(base)
            conj = np.einsum(
                "rij,wrjk,rkl->wril", binv, words, base, optimize=True
            )
            disp = displacement_grid(
                np.ascontiguousarray(conj), v, take - t_base
            )
            ts_all.append(take)
            disp_all.append(np.where(np.isnan(disp), np.inf, disp))
            pos = hi + 1
            t0 = seg_end
            if pos > n_grid:
                break
            if reduce_reps:
                s = t0 - t_base
                lift = base @ psl2.a_matrix(s * v)
                reduced = False
                for _ in range(64):
                    lift_norm = np.abs(lift).max()
                    cand = np.einsum("wrij,rjk->wrik", words, lift)
                    cand_norm = np.abs(cand).max(axis=(1, 2, 3))
                    j = int(np.argmin(cand_norm))
                    if not cand_norm[j] < 0.5 * lift_norm:
                        break
                    lift = psl2.canonical_sign(cand[j])
                    reduced = True
                    meta["reductions"] += 1
                if reduced:
                    base = psl2.normalize(lift)
                    t_base = t0
        final_lift = base @ psl2.a_matrix((horizon - t_base) * v)
        meta["final_lift_norm"] = float(np.abs(final_lift).max())
    ts = np.concatenate(ts_all)
    disp = np.concatenate(disp_all)
    returns = ts[disp <= threshold]
    late20 = returns[returns >= 0.8 * horizon]
    late50 = returns[returns >= 0.5 * horizon]
    escaped = meta["final_lift_norm"] > lift_bound
    if late20.size and not escaped:
        verdict = "recurrent-like"
    elif late50.size == 0 or escaped:
        verdict = "transient-like"
    else:
        verdict = "inconclusive"
    return RecurrenceScan(ts, disp, returns, verdict, meta)


def scenery_sample(x, v, horizon, eps, max_len, bound=10.0, dt=0.05,
                   gap=1.0):
    """Accumulation witnesses of the conjugated-stabilizer scenery.

    Scans the grid for word conjugates staying in the norm ball of radius
    `bound`; an element is reported when a conjugate at time t matches one
    seen at least `gap` earlier within eps (max-entry, PSL-aware).  The
    reported word is the producing word of the later witness, the defect
    the distance between the paired conjugates.
    """
    if eps < 0:
        raise PreconditionError("eps must be >= 0")
    v = np.asarray(v, dtype=float)
    conj, last, parent, idx_map = _conjugated_words(x, max_len)
    ts = np.arange(0.0, horizon + 0.5 * dt, dt)
    e_pos = np.exp(np.outer(ts, v))  # (T, r)
    out = []
    r = x.system.r
    cap = 256
    seen_t = np.empty(cap)
    seen_h = np.empty((cap, r, 2, 2))
    n_seen = 0
    for k, t in enumerate(ts):
        scaled = conj.copy()
        scaled[:, :, 0, 1] /= e_pos[k][None, :]
        scaled[:, :, 1, 0] *= e_pos[k][None, :]
        norms = np.abs(scaled).max(axis=(1, 2, 3))
        for j in np.nonzero(norms <= bound)[0]:
            h = scaled[j]
            defect = math.inf
            old = np.nonzero(t - seen_t[:n_seen] >= gap)[0]
            if old.size:
                diff = seen_h[old] - h
                summ = seen_h[old] + h
                d_all = np.minimum(
                    np.abs(diff).max(axis=(1, 2, 3)),
                    np.abs(summ).max(axis=(1, 2, 3)),
                )
                defect = float(d_all.min())
            if defect <= eps:
                word = schottky.word_letters(
                    int(idx_map[j]), last, parent, x.system
                )
                elem = SceneryElement(h, float(t), word, float(defect))
                if product.is_loxodromic(h):
                    flags = product.fixed_flags(h)
                    y_h, y_hinv = flags
                    transverse = bool(
                        np.all(~np.isinf(y_h)) and np.all(y_hinv != 0.0)
                    )
                    elem.flags_transverse = transverse
                    if transverse and np.all(np.abs(y_h) <
                                             product.CHART_MARGIN):
                        elem.lam = product.generalized_jordan(h)
                out.append(elem)
            if n_seen == cap:
                cap *= 2
                seen_t = np.concatenate([seen_t, np.empty(cap // 2)])
                seen_h = np.concatenate(
                    [seen_h, np.empty((cap // 2, r, 2, 2))]
                )
            seen_t[n_seen] = t
            seen_h[n_seen] = h
            n_seen += 1
    return out


@dataclass
class TransverseStats:
    returns: np.ndarray  # per-trial late return counts
    min_late: np.ndarray
    growth_exponent: np.ndarray
    effective_dim: int
    warning: str = ""

    def median_returns(self):
        return float(np.median(self.returns))


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / math.sqrt(float(v @ v))


def _checkpoints(n_steps):
    ck = np.unique(
        np.geomspace(8, n_steps, 24).astype(np.int64)
    )
    return ck[ck >= 1]


def empirical_increments(system, v, n_steps, rng):
    """Cartan increments along a random reduced word of the system."""
    letters = system.letter_matrices()
    k2 = letters.shape[0]
    prev = -1
    cur = product.identity(system.r)
    scale = np.zeros(system.r)  # running log-norm per factor, for stability
    inc = np.empty((n_steps, system.r))
    mu_prev = np.zeros(system.r)
    for n in range(n_steps):
        choices = [j for j in range(k2) if j != (prev + system.k) % k2
                   ] if prev >= 0 else list(range(k2))
        j = choices[int(rng.integers(len(choices)))]
        cur = cur @ letters[j]
        norm = np.abs(cur).max(axis=(1, 2))
        cur /= norm[:, None, None]
        scale = scale + np.log(norm)
        # Unimodular original: mu = 2 log sigma1 = 2 scale + log sigma1^2(B).
        fro2 = np.einsum("rij,rij->r", cur, cur)
        det = cur[:, 0, 0] * cur[:, 1, 1] - cur[:, 0, 1] * cur[:, 1, 0]
        sigma1_sq = 0.5 * (fro2 + np.sqrt(np.maximum(fro2**2 - 4*det**2, 0.0)))
        mu = 2.0 * scale + np.log(sigma1_sq)
        inc[n] = mu - mu_prev
        mu_prev = mu
        prev = j
    return inc


def _trial_increments(increments, v, vhat, n_steps, rho, seed, step_std,
                      trial):
    r = v.shape[0]
    rng = np.random.default_rng(
        np.random.SeedSequence([int(seed), int(trial)])
    )
    if isinstance(increments, str):
        if increments != "gaussian":
            raise PreconditionError(f"unknown increments {increments!r}")
        return step_std * rng.standard_normal((n_steps, r)) + vhat
    return empirical_increments(increments, v, n_steps, rng)


def transverse_fluctuation(
    increments, v, n_steps, trials, rho, seed=0, step_std=0.017, threads=1
):
    """Transverse random-walk statistics along the direction v.

    increments: "gaussian" for i.i.d. Gaussian steps with mean along v and
    per-component std `step_std`, or a SchottkySystem for empirical
    per-letter Cartan increments.  Counts late returns (n > n_steps/10)
    of the transverse part into the rho-ball and fits the growth exponent
    of the running max of |q_n| on geometric checkpoints.  Trials run on
    independent per-trial random streams, so the thread budget never
    changes the results.
    """
    if n_steps < 10 or trials < 1:
        raise PreconditionError("need n_steps >= 10 and trials >= 1")
    v = np.asarray(v, dtype=float)
    r = v.shape[0]
    vhat = _unit(v)
    burn = n_steps // 10
    cks = _checkpoints(n_steps)

    def one_trial(trial):
        inc = _trial_increments(
            increments, v, vhat, n_steps, rho, seed, step_std, trial
        )
        count, ml, maxes = walk_stats(
            np.ascontiguousarray(inc), vhat, float(rho), burn, cks
        )
        sel = maxes > 0
        if np.count_nonzero(sel) >= 2:
            g = float(np.polyfit(np.log(cks[sel]), np.log(maxes[sel]), 1)[0])
        else:
            g = float("nan")
        return count, ml, g

    warning = ""
    effective = r - 1
    if not isinstance(increments, str):
        inc0 = _trial_increments(
            increments, v, vhat, n_steps, rho, seed, step_std, 0
        )
        trans = inc0 - np.outer(inc0 @ vhat, vhat)
        cov = np.atleast_2d(np.cov(trans.T)) if r > 1 else np.zeros((1, 1))
        # Degeneracy threshold relative to the full increment scale, so
        # float-noise transverse components count as rank zero.
        scale = max(float(np.var(inc0)), 1e-30)
        effective = int(np.linalg.matrix_rank(cov, tol=1e-18 * scale))
        effective = min(effective, r - 1)
        if effective < r - 1:
            warning = (
                f"transverse increment covariance rank {effective} <"
                f" {r - 1}: transverse dimension reduced"
            )
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_trial, range(trials)))
    else:
        results = [one_trial(trial) for trial in range(trials)]
    returns = np.asarray([res[0] for res in results], dtype=np.int64)
    min_late = np.asarray([res[1] for res in results])
    growth = np.asarray([res[2] for res in results])
    return TransverseStats(returns, min_late, growth, effective, warning)


@dataclass
class DichotomyRow:
    r: int
    median_returns: float
    transience_fraction: float  # trials with zero late returns
    median_growth: float


@dataclass
class DichotomyTable:
    rows: list
    trials: list  # per-r TransverseStats
    collapse_flag: bool  # monotone drop crossing zero between r=3 and r=4

    def as_records(self):
        recs = []
        for row, stats in zip(self.rows, self.trials):
            for trial in range(len(stats.returns)):
                recs.append(
                    {
                        "r": row.r,
                        "trial": trial,
                        "returns": int(stats.returns[trial]),
                        "min_late_distance": float(stats.min_late[trial]),
                        "growth_exponent": float(stats.growth_exponent[trial]),
                    }
                )
        return recs


def dichotomy_experiment(r_values, n_steps=100000, trials=200, rho=1.0,
                         seed=7, step_std=0.017, threads=1):
    """Gaussian-increment illustration of the rank dichotomy mechanism.

    Runs transverse_fluctuation for each r with deterministic seed
    derivation; the transverse walk has dimension r - 1, so late returns
    collapse once r - 1 >= 3.  This illustrates the proved dichotomy's
    mechanism statistically; it proves nothing.
    """
    rows, all_stats = [], []
    for r in r_values:
        if r < 2:
            raise PreconditionError("dichotomy needs r >= 2")
        v = np.ones(int(r))
        stats = transverse_fluctuation(
            "gaussian", v, n_steps, trials, rho,
            seed=(seed * 1000003 + r), step_std=step_std, threads=threads,
        )
        rows.append(
            DichotomyRow(
                int(r),
                float(np.median(stats.returns)),
                float(np.mean(stats.returns == 0)),
                float(np.nanmedian(stats.growth_exponent)),
            )
        )
        all_stats.append(stats)
    medians = [row.median_returns for row in rows]
    rs = [row.r for row in rows]
    collapse = any(
        a <= 3 < b and ma > 0 and mb == 0
        for a, ma in zip(rs, medians)
        for b, mb in zip(rs, medians)
    )
    return DichotomyTable(rows, all_stats, collapse)

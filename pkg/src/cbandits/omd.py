"""Log-barrier mirror-descent machinery.

The projection step minimizes loss_estimate @ x + D(x, x_current) over the
truncated safe decision space, where D is the Bregman divergence of the
log-barrier regularizer sum_a (1/rate_a) * ln(1/x(a)).

Solver layout: two exact fast paths (floor-clipped root find in the simplex
multiplier; the same with one safe row held active) handle the common cases;
anything they cannot certify falls through to an interior-point path that
folds rows and floors into an auxiliary barrier with weight mu decreased
geometrically (x0.2) from 1 to 1e-10, damped Newton in the simplex null
space at each stage.  Every returned point carries a KKT certificate; a
point that cannot be certified below 1e-8 raises ConvergenceError.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import ConvergenceError
from .estimation import SafeSpaceSpec
from .model import Strategy

KKT_TOL = 1e-8
_CERT_TOL = 1e-9
_ACTIVE_TOL = 1e-9
_NEWTON_BUDGET = 200


@dataclass(frozen=True)
class LrSchedule:
    """Per-action learning rates with their increase triggers.

    A rate is multiplied by `growth` whenever the action's inverse
    probability crosses its trigger; the trigger then doubles from there.
    The growth factor exp(1/ln T) keeps the total increase below a factor 5
    over any horizon-T run.
    """

    rates: np.ndarray
    triggers: np.ndarray
    growth: float
    base_rate: float

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        triggers = np.asarray(self.triggers, dtype=float)
        if np.any(rates <= 0.0) or np.any(triggers <= 0.0):
            raise ValueError("rates and triggers must be positive")
        rates.flags.writeable = False
        triggers.flags.writeable = False
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "triggers", triggers)

    @property
    def max_ratio(self) -> float:
        return float(self.rates.max() / self.base_rate)


def init_schedule(num_actions: int, horizon: int, base_rate: float) -> LrSchedule:
    growth = float(np.exp(1.0 / np.log(horizon))) if horizon >= 2 else 1.0
    return LrSchedule(
        rates=np.full(num_actions, base_rate),
        triggers=np.full(num_actions, 2.0 * num_actions),
        growth=growth,
        base_rate=base_rate,
    )


def lr_update(x_next: Strategy, sched: LrSchedule) -> LrSchedule:
    """Raise rate and trigger for every action whose probability got small."""
    inv = 1.0 / x_next.weights
    hit = inv > sched.triggers
    if not np.any(hit):
        return sched
    return LrSchedule(
        rates=np.where(hit, sched.rates * sched.growth, sched.rates),
        triggers=np.where(hit, 2.0 * inv, sched.triggers),
        growth=sched.growth,
        base_rate=sched.base_rate,
    )


def log_barrier_value(x: Strategy, sched: LrSchedule) -> float:
    w = x.weights
    if np.any(w <= 0.0):
        raise ValueError("log barrier requires strictly positive weights")
    return float(np.sum(np.log(1.0 / w) / sched.rates))


def bregman(x: Strategy, y: Strategy, sched: LrSchedule) -> float:
    """D(x, y) = sum_a (1/rate_a) * (x_a/y_a - 1 - ln(x_a/y_a)); 0 iff x == y."""
    xw, yw = x.weights, y.weights
    if np.any(xw <= 0.0) or np.any(yw <= 0.0):
        raise ValueError("Bregman divergence requires strictly positive weights")
    ratio = xw / yw
    return float(np.sum((ratio - 1.0 - np.log(ratio)) / sched.rates))


def _clipped_point(inv_y, rates, loss, floor, shift):
    """x_a = max(floor, 1/(1/y_a + rate_a * (loss_a + shift_a))), elementwise."""
    denom = inv_y + rates * (loss + shift)
    unclipped = np.where(denom > 1e-12, 1.0 / np.where(denom > 1e-12, denom, 1.0), 2.0)
    x = np.maximum(floor, unclipped)
    clipped = x > unclipped  # floor binds
    return x, clipped


def _solve_floor_path(loss, y, rates, floor):
    """Root-find the simplex multiplier with floor clipping; exact KKT point."""
    inv_y = 1.0 / y
    lo, hi = None, None
    nu_lo, nu_hi = -1.0, 1.0
    for _ in range(200):
        x, _ = _clipped_point(inv_y, rates, loss, floor, nu_hi)
        if x.sum() - 1.0 <= 0.0:
            hi = nu_hi
            break
        nu_hi *= 2.0
    for _ in range(200):
        x, _ = _clipped_point(inv_y, rates, loss, floor, nu_lo)
        if x.sum() - 1.0 >= 0.0:
            lo = nu_lo
            break
        nu_lo *= 2.0
    if lo is None or hi is None:
        return None, None
    nu = 0.5 * (lo + hi)
    for _ in range(200):
        x, clipped = _clipped_point(inv_y, rates, loss, floor, nu)
        gap = x.sum() - 1.0
        if abs(gap) <= 2e-16 * x.size:
            break
        if gap > 0.0:
            lo = nu
        else:
            hi = nu
        slope = -np.sum(rates[~clipped] * x[~clipped] ** 2)
        step = nu - gap / slope if slope < 0.0 else None
        nu = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-18 * max(1.0, abs(lo)):
            break
    x, clipped = _clipped_point(inv_y, rates, loss, floor, nu)
    return x, (nu, clipped)


def _solve_row_path(loss, y, rates, floor, coef, bound, nu0):
    """Floor-clipped solve with one safe row held at equality.

    Semi-smooth Newton in (simplex multiplier, row multiplier); returns the
    point and the multiplier pair, or None when it fails to converge.
    """
    inv_y = 1.0 / y
    nu, lam = nu0, 0.0
    res_norm = np.inf
    for _ in range(80):
        x, clipped = _clipped_point(inv_y, rates, loss, floor, nu + lam * coef)
        r1 = x.sum() - 1.0
        r2 = float(coef @ x) - bound
        new_norm = max(abs(r1), abs(r2))
        if new_norm <= 2e-16 * x.size:
            break
        free = ~clipped
        w = rates[free] * x[free] ** 2
        cf = coef[free]
        j11 = -np.sum(w)
        j12 = -np.sum(w * cf)
        j22 = -np.sum(w * cf**2)
        det = j11 * j22 - j12 * j12
        if abs(det) < 1e-300:
            return None, None
        dnu = (-r1 * j22 + r2 * j12) / det
        dlam = (-r2 * j11 + r1 * j12) / det
        t = 1.0
        for _ in range(50):
            xt, _ = _clipped_point(inv_y, rates, loss, floor, (nu + t * dnu) + (lam + t * dlam) * coef)
            rt1 = xt.sum() - 1.0
            rt2 = float(coef @ xt) - bound
            if max(abs(rt1), abs(rt2)) <= (1.0 - 1e-4 * t) * new_norm:
                break
            t *= 0.5
        else:
            return None, None
        nu += t * dnu
        lam += t * dlam
        if new_norm >= res_norm and new_norm < 1e-12:
            break
        res_norm = new_norm
    x, clipped = _clipped_point(inv_y, rates, loss, floor, nu + lam * coef)
    if max(abs(x.sum() - 1.0), abs(float(coef @ x) - bound)) > 1e-12:
        return None, None
    return x, (nu, lam, clipped)


def _certify(x, loss, y, rates, floor, coefs, bounds, nu, row_mults):
    """Conservative KKT residual with explicitly supplied multipliers."""
    grad = loss + (1.0 / y - 1.0 / x) / rates
    stat = grad + nu
    if coefs.size:
        stat = stat + coefs.T @ row_mults
    at_floor = x <= floor * (1.0 + 1e-9)
    resid = 0.0
    if np.any(~at_floor):
        resid = float(np.abs(stat[~at_floor]).max())
    if np.any(at_floor):
        # Floor multipliers must be non-negative: stationarity there reads
        # stat - mult = 0 with mult >= 0.
        resid = max(resid, float(np.maximum(-stat[at_floor], 0.0).max(initial=0.0)))
    resid = max(resid, abs(x.sum() - 1.0))
    resid = max(resid, float(np.maximum(floor - x, 0.0).max(initial=0.0)))
    if coefs.size:
        slack = bounds - coefs @ x
        resid = max(resid, float(np.maximum(-slack, 0.0).max(initial=0.0)))
        resid = max(resid, float(np.max(row_mults * np.maximum(slack, 0.0), initial=0.0)))
        resid = max(resid, float(np.maximum(-row_mults, 0.0).max(initial=0.0)))
    return resid


def _interior_start(x_curr, floor, coefs, bounds, space):
    k = x_curr.size
    uniform = np.full(k, 1.0 / k)
    candidates = [x_curr]
    candidates += [(1.0 - t) * x_curr + t * uniform for t in (0.05, 0.25, 0.5, 0.75)]
    candidates.append(uniform)
    for cand in candidates:
        if np.all(cand >= floor + 1e-12) and (
            not coefs.size or np.all(coefs @ cand <= bounds - 1e-9)
        ):
            return cand
    from .lp import max_interior_point  # local import avoids a module cycle

    point, slack = max_interior_point(space.as_polytope())
    if slack <= 1e-10:
        raise ConvergenceError("safe decision space has no usable interior")
    return point


def _barrier_path(loss, y, rates, floor, coefs, bounds, space, x_curr):
    """Interior-point fallback: barrier weight 1 -> 1e-10, damped Newton."""
    x = _interior_start(x_curr, floor, coefs, bounds, space)
    k = x.size
    inv_y = 1.0 / y
    have_rows = bool(coefs.size)

    def value(pt, mu):
        val = float(loss @ pt + np.sum((pt / y - 1.0 - np.log(pt / y)) / rates))
        val -= mu * float(np.sum(np.log(pt - floor)))
        if have_rows:
            val -= mu * float(np.sum(np.log(bounds - coefs @ pt)))
        return val

    mus = []
    mu = 1.0
    while mu > 1e-10:
        mus.append(mu)
        mu *= 0.2
    mus.append(1e-10)

    iterations = 0
    elim = int(np.argmax(x))
    free = np.arange(k) != elim
    for mu in mus:
        for _ in range(60):
            if iterations >= _NEWTON_BUDGET:
                raise ConvergenceError("projection step exceeded its Newton budget")
            iterations += 1
            grad = loss + (inv_y - 1.0 / x) / rates - mu / (x - floor)
            diag = 1.0 / (rates * x**2) + mu / (x - floor) ** 2
            if have_rows:
                slack = bounds - coefs @ x
                grad = grad + coefs.T @ (mu / slack)
                weights = mu / slack**2
            g_red = grad[free] - grad[elim]
            h_red = np.diag(diag[free]) + diag[elim]
            if have_rows:
                c_red = coefs[:, free] - coefs[:, [elim]]
                h_red = h_red + (c_red * weights[:, None]).T @ c_red
            try:
                step_red = np.linalg.solve(h_red, -g_red)
            except np.linalg.LinAlgError:
                step_red = np.linalg.lstsq(h_red, -g_red, rcond=None)[0]
            decrement = float(-g_red @ step_red)
            if np.abs(g_red).max(initial=0.0) <= 1e-10 or decrement <= 1e-24:
                break
            step = np.zeros(k)
            step[free] = step_red
            step[elim] = -step_red.sum()
            t = 1.0
            base = value(x, mu)
            for _ in range(60):
                trial = x + t * step
                ok = np.all(trial > floor)
                if ok and have_rows:
                    ok = np.all(coefs @ trial < bounds)
                if ok and value(trial, mu) <= base - 1e-4 * t * decrement:
                    break
                t *= 0.5
            else:
                break
            x = x + t * step
    return x


def omd_step(loss_estimate, x_current: Strategy, sched: LrSchedule,
             space: SafeSpaceSpec) -> Strategy:
    """Minimize loss_estimate @ x + D(x, x_current) over the safe space."""
    return omd_step_with_residual(loss_estimate, x_current, sched, space)[0]


def omd_step_with_residual(loss_estimate, x_current: Strategy, sched: LrSchedule,
                           space: SafeSpaceSpec):
    loss = np.asarray(loss_estimate, dtype=float)
    y = x_current.weights
    if np.any(y <= 0.0):
        raise ValueError("current iterate must be strictly positive")
    if np.any(loss < 0.0):
        raise ValueError("loss estimates must be non-negative")
    rates = sched.rates
    floor = space.lower_bound
    coefs, bounds = space.coefficients, np.asarray(space.bounds, dtype=float)

    x, info = _solve_floor_path(loss, y, rates, floor)
    if x is not None:
        nu, _ = info
        row_vals = coefs @ x if coefs.size else np.zeros(0)
        if not coefs.size or np.all(row_vals <= bounds + 1e-12):
            resid = _certify(x, loss, y, rates, floor, coefs, bounds, nu,
                             np.zeros(coefs.shape[0]) if coefs.size else np.zeros(0))
            if resid <= _CERT_TOL:
                return Strategy(x), resid
        elif coefs.size:
            worst = int(np.argmax(row_vals - bounds))
            xr, rinfo = _solve_row_path(loss, y, rates, floor,
                                        coefs[worst], float(bounds[worst]), nu)
            if xr is not None:
                nu_r, lam, _ = rinfo
                if lam >= -1e-12:
                    mults = np.zeros(coefs.shape[0])
                    mults[worst] = max(lam, 0.0)
                    others = np.all(np.delete(coefs @ xr - bounds, worst) <= 1e-12) \
                        if coefs.shape[0] > 1 else True
                    if others:
                        resid = _certify(xr, loss, y, rates, floor, coefs, bounds,
                                         nu_r, mults)
                        if resid <= _CERT_TOL:
                            return Strategy(xr), resid

    x = _barrier_path(loss, y, rates, floor, coefs, bounds, space, x_current.weights)
    candidate = Strategy(x)
    resid = kkt_residual(candidate, loss, x_current, sched, space)
    if resid > KKT_TOL:
        raise ConvergenceError(
            f"projection step failed to certify its KKT residual ({resid:.2e})"
        )
    return candidate, resid


def kkt_residual(candidate: Strategy, loss_estimate, x_current: Strategy,
                 sched: LrSchedule, space: SafeSpaceSpec) -> float:
    """Max-norm KKT residual of the projection step at an arbitrary point.

    Multipliers for the active constraints are fitted by non-negative least
    squares in the simplex tangent space, so any valid certificate is found.
    """
    x = candidate.weights
    loss = np.asarray(loss_estimate, dtype=float)
    y = x_current.weights
    grad = loss + (1.0 / y - 1.0 / x) / sched.rates
    k = x.size
    floor = space.lower_bound
    coefs, bounds = space.coefficients, np.asarray(space.bounds, dtype=float)

    feas = abs(x.sum() - 1.0)
    feas = max(feas, float(np.maximum(floor - x, 0.0).max(initial=0.0)))
    if coefs.size:
        row_slack = bounds - coefs @ x
        feas = max(feas, float(np.maximum(-row_slack, 0.0).max(initial=0.0)))

    columns = []
    slacks = []
    if coefs.size:
        for j in range(coefs.shape[0]):
            if row_slack[j] <= _ACTIVE_TOL:
                columns.append(coefs[j])
                slacks.append(max(row_slack[j], 0.0))
    for a in range(k):
        if x[a] - floor <= _ACTIVE_TOL:
            e = np.zeros(k)
            e[a] = -1.0
            columns.append(e)
            slacks.append(max(x[a] - floor, 0.0))

    center = grad - grad.mean()
    if not columns:
        return max(feas, float(np.abs(center).max()))
    mat = np.stack(columns, axis=1)
    mat = mat - mat.mean(axis=0, keepdims=True)
    mult, _ = nnls(mat, -center)
    stationarity = float(np.abs(center + mat @ mult).max())
    comp = float(np.max(mult * np.asarray(slacks), initial=0.0))
    return max(feas, stationarity, comp)

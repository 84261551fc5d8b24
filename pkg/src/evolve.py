'''
Heat flow on the straightened strip and polynomial decay exponents.
'''

import math
import logging

import numpy as num
from scipy import sparse

from pyrocko.guts import Object, Float, Int, String
from pyrocko.guts_array import Array

from .meta import ShearStripError, EvolveError, FitError, LinearSolveError
from . import geometry
from .discretize import assemble_H
from .eigensolve import LinearSolver

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.evolve')

nsamples_fit_min = 20


class InitialDatum(Object):
    '''
    Bump in ``x`` times the first transverse mode.
    '''

    width = Float.T(default=1.0)
    offset = Float.T(default=0.0)

    def bump(self, x):
        xi = (num.asarray(x, dtype=float) - self.offset) / self.width
        u = num.zeros(xi.shape)
        inside = num.abs(xi) < 1.0
        u[inside] = num.exp(1.0 / (xi[inside]**2 - 1.0))
        return u

    def evaluate(self, g):
        ux = self.bump(g.gx.nodes)
        uz = geometry.transverse_mode(g.d, 1, g.gz.nodes)
        return num.kron(ux, uz)

    def describe(self):
        return 'w%g-o%g' % (self.width, self.offset)


def default_initial_data():
    return [
        InitialDatum(width=1.0, offset=0.0),
        InitialDatum(width=0.5, offset=0.0),
        InitialDatum(width=0.5, offset=0.5)]


class NormTrace(Object):
    times = Array.T(shape=(None,), dtype=float, serialize_as='list')
    shifted_norms = Array.T(
        shape=(None,), dtype=float, serialize_as='list',
        help='``exp(E_1 t) ||u(t)||`` in the discrete L2 norm')
    initial_weighted_norm = Float.T(
        help='``||u_0||`` in the discrete norm weighted by '
             '``K(x) = exp(x^2/4)``')
    dt = Float.T()
    grid_id = String.T(default='')
    profile_id = String.T(default='')

    @property
    def normalized(self):
        return self.shifted_norms / self.initial_weighted_norm


class DecayFit(Object):
    gamma_hat = Float.T()
    c_hat = Float.T()
    t_min = Float.T()
    t_max = Float.T()
    rms_residual = Float.T()
    nsamples = Int.T()
    profile_id = String.T(default='')

    @property
    def window(self):
        return (self.t_min, self.t_max)


def weighted_norm(g, u):
    w = num.kron(geometry.weight_K(g.gx.nodes), num.ones(g.n_z))
    return math.sqrt(num.sum(w * g.mass * u**2))


def default_dt(g):
    h = min(num.min(g.gx.spacing), num.min(g.gz.spacing))
    return 4.0 * h**2


def default_t_stop(X):
    return (0.4 * X)**2


def crank_nicolson_evolve(g, p, u0, T, dt, inner_tolerance=1e-12,
                          linear_solver='cg', monotonicity_slack=1e-9):
    '''
    Integrate ``du/dt = -H u`` by the trapezoidal rule up to time ``T``.

    Every step solves ``(M + dt/2 H) u+ = (M - dt/2 H) u``, warm-started from
    the previous state. If ``dt`` does not divide ``T``, the last step is
    shortened so that the trace ends exactly at ``T``. The shifted norm
    ``exp(E_1 t) ||u||`` must not increase from one step to the next.
    '''
    if not dt > 0.0:
        raise EvolveError('time step must be positive, got %g' % dt, 0)

    nsteps = int(math.ceil(T / dt - 1e-9))
    if nsteps < 1 or T < dt * (1.0 - 1e-9):
        raise EvolveError('T=%g shorter than a single step' % T, 0)

    u = num.array(u0, dtype=float).ravel()
    if u.size != g.size:
        raise EvolveError(
            'initial data has %i values, grid has %i nodes' % (
                u.size, g.size), 0)

    H = assemble_H(g, p)
    mass = H.mass_diag
    M = sparse.diags(mass, format='csr')

    def make_stepper(tau):
        lhs = (M + 0.5 * tau * H.matrix).tocsr()
        rhs = (M - 0.5 * tau * H.matrix).tocsr()
        solver = LinearSolver(
            lhs, method=linear_solver, tolerance=inner_tolerance,
            max_iterations=max(1000, 10 * g.size))

        return solver, rhs

    times = dt * num.arange(nsteps + 1)
    times[-1] = T
    dt_last = T - times[-2]

    stepper = make_stepper(dt)
    if abs(dt_last - dt) > 1e-9 * dt:
        last_stepper = make_stepper(dt_last)
    else:
        last_stepper = stepper

    e1 = g.e1_discrete
    norms = num.empty(nsteps + 1)
    norms[0] = math.sqrt(num.sum(mass * u**2))

    logger.info(
        'Crank-Nicolson on %s, %s: %i steps of dt=%g, last step %g',
        g.describe(), p.kind, nsteps, dt, dt_last)

    for istep in range(1, nsteps + 1):
        solver, rhs = last_stepper if istep == nsteps else stepper
        try:
            u = solver.solve(rhs @ u, x0=u)
        except LinearSolveError as e:
            raise EvolveError(str(e), istep)

        norms[istep] = math.exp(e1 * times[istep]) \
            * math.sqrt(num.sum(mass * u**2))

        if not num.isfinite(norms[istep]):
            raise EvolveError('non-finite norm', istep)

        if norms[istep] > norms[istep - 1] * (1.0 + monotonicity_slack):
            raise EvolveError(
                'shifted norm increased from %g to %g' % (
                    norms[istep - 1], norms[istep]), istep)

    logger.debug(
        'Crank-Nicolson finished, %i inner iterations',
        stepper[0].niterations)

    return NormTrace(
        times=times,
        shifted_norms=norms,
        initial_weighted_norm=weighted_norm(g, num.ravel(u0)),
        dt=dt,
        grid_id=g.describe(),
        profile_id=p.kind)


def fit_decay(trace, window):
    '''
    Least squares line through ``(log(1+t), log(shifted / weighted_0))``.

    :param window: tuple ``(t_min, t_max)``, ``t_max=None`` for the end of
        the trace
    '''
    t_min, t_max = window
    times = trace.times
    if t_max is None:
        t_max = times[-1]

    if not times[0] <= t_min < t_max <= times[-1]:
        raise FitError(
            'fit window [%g, %g] not inside trace [%g, %g]' % (
                t_min, t_max, times[0], times[-1]))

    sel = num.logical_and(times >= t_min, times <= t_max)
    nsamples = int(num.sum(sel))
    if nsamples < nsamples_fit_min:
        raise FitError(
            'fit window [%g, %g] holds %i samples, need %i' % (
                t_min, t_max, nsamples, nsamples_fit_min))

    y = trace.normalized[sel]
    if num.any(~num.isfinite(y)) or num.any(y <= 0.0):
        raise FitError('norms in fit window must be finite and positive')

    xl = num.log1p(times[sel])
    yl = num.log(y)
    coefs = num.polyfit(xl, yl, 1)
    rms = math.sqrt(num.mean((yl - num.polyval(coefs, xl))**2))

    return DecayFit(
        gamma_hat=-float(coefs[0]),
        c_hat=math.exp(coefs[1]),
        t_min=float(t_min),
        t_max=float(t_max),
        rms_residual=rms,
        nsamples=nsamples,
        profile_id=trace.profile_id)


def window_sensitivity(trace, window):
    '''
    Difference of the exponents fitted on the late and the early half of
    the window, split at its midpoint in ``log(1+t)``.
    '''
    t_min, t_max = window
    if t_max is None:
        t_max = trace.times[-1]

    t_mid = math.expm1(0.5 * (math.log1p(t_min) + math.log1p(t_max)))
    early = fit_decay(trace, (t_min, t_mid))
    late = fit_decay(trace, (t_mid, t_max))
    return late.gamma_hat - early.gamma_hat


def mu_integral_bound(curve, t_list):
    '''
    Envelope ``exp(-int_0^{log(1+t)} mu(s) ds)`` of the normalized shifted
    norm, integrating the piecewise linear interpolant of the curve.
    '''
    t = num.asarray(t_list, dtype=float)
    s = num.log1p(t)
    sv = curve.s_values
    mv = curve.mu_values

    if sv.size == 0 or sv[0] != 0.0:
        raise ShearStripError('mu curve must start at s=0')

    if num.any(s > sv[-1]):
        raise ShearStripError(
            'mu curve ends at s=%g, cannot extrapolate to s=%g' % (
                sv[-1], num.max(s)))

    cum = num.concatenate([
        [0.0], num.cumsum(0.5 * (mv[1:] + mv[:-1]) * num.diff(sv))])

    i = num.clip(num.searchsorted(sv, s, side='right') - 1, 0, sv.size - 1)
    mu_s = num.interp(s, sv, mv)
    integral = cum[i] + 0.5 * (mv[i] + mu_s) * (s - sv[i])
    return num.exp(-integral)


def uniform_bound(gamma, t_list):
    '''
    Envelope ``(1+t)^-(gamma + 1/4)`` from a lower bound of the mu curve.
    '''
    return (1.0 + num.asarray(t_list, dtype=float))**(-(gamma + 0.25))


def gamma_inf(curve):
    if curve.mu_values.size == 0:
        raise ShearStripError('empty mu curve')

    return float(num.min(curve.mu_values)) - 0.25


__all__ = '''
    InitialDatum
    default_initial_data
    NormTrace
    DecayFit
    weighted_norm
    default_dt
    default_t_stop
    crank_nicolson_evolve
    fit_decay
    window_sensitivity
    mu_integral_bound
    uniform_bound
    gamma_inf
'''.split()

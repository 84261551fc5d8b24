'''
Orchestration of the experiments and evaluation of the claims.

A run evaluates a fixed list of numbered claims, depending on the selected
experiment. Intermediate results (mu curves, Hardy scans, norm traces) are
computed once per run, shared between claims and written to CSV files in the
output directory as soon as they are available. Numerical failures turn into
failed claims.
'''

import math
import logging
import os.path as op

import numpy as num
from scipy import linalg

from pyrocko import parimap

from .meta import ShearStripError, MuCurveError, FitError
from .geometry import Profile
from .discretize import build_grid1d, build_grid2d, assemble_H, \
    assemble_Ts, s_max_admissible
from .eigensolve import smallest_eig, mu_curve, hardy_constant, \
    oscillator_levels, dense_smallest_eigs
from .evolve import crank_nicolson_evolve, fit_decay, window_sensitivity, \
    mu_integral_bound, uniform_bound, gamma_inf, default_dt
from .config import dump_config
from .report.base import Claim, Report, write_csv, write_report
from .info import version_info

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.core')

experiment_criteria = {
    'oscillator': [1, 2],
    'mu_curve': [3, 4, 5],
    'hardy': [6],
    'evolve': [7, 8, 10],
    'full_report': [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
}

# claims which are meaningless without a sheared profile
sheared_criteria = [4, 5, 6, 7]


def _evolve_worker(g, p, u0, t_stop, dt, inner_tolerance, linear_solver):
    try:
        return crank_nicolson_evolve(
            g, p, u0, t_stop, dt,
            inner_tolerance=inner_tolerance,
            linear_solver=linear_solver)

    except ShearStripError as e:
        return e


def _hardy_worker(g, p, kwargs):
    try:
        return hardy_constant(g, p, **kwargs)
    except ShearStripError as e:
        return e


class Lab(object):
    '''
    Memoizing access to the computations of one run.
    '''

    def __init__(self, config, out_path):
        self.config = config
        self.out_path = out_path
        self.solver_kwargs = config.get_solver_kwargs()
        self._cache = {}

    def _memo(self, key, compute):
        if key not in self._cache:
            try:
                self._cache[key] = (compute(), None)
            except ShearStripError as e:
                self._cache[key] = (None, e)

        value, error = self._cache[key]
        if error is not None:
            raise error

        return value

    def path(self, filename):
        return op.join(self.out_path, filename)

    def profile(self, key):
        if key == 'straight':
            return self.config.get_straight_profile()

        return self.config.profile

    def oscillator_levels(self, dirichlet_at_zero):
        return self._memo(
            ('oscillator', dirichlet_at_zero),
            lambda: self._oscillator_levels(dirichlet_at_zero))

    def _oscillator_levels(self, dirichlet_at_zero):
        oc = self.config.oscillator
        gx = oc.get_grid()
        k = 2 if dirichlet_at_zero else oc.nlevels
        levels = oscillator_levels(
            gx, dirichlet_at_zero, k=k, **self.solver_kwargs)

        write_csv(
            self.path('oscillator_levels_%s.csv' % (
                'lD' if dirichlet_at_zero else 'l')),
            ['level', 'value', 'residual', 'iterations', 'grid_id'],
            [(i + 1, r.value, r.residual, r.iterations, gx.describe())
             for (i, r) in enumerate(levels)])

        return levels

    def mu_curve(self, key, coarse=False):
        return self._memo(
            ('mu_curve', key, coarse),
            lambda: self._mu_curve(key, coarse))

    def _mu_curve(self, key, coarse):
        config = self.config
        p = self.profile(key)
        grid_config = config.grid.coarsened() if coarse else config.grid
        g = grid_config.get_grid(p.d)
        s_values = config.mu_curve.s_values
        suffix = '_coarse' if coarse else ''

        if coarse:
            s_max = s_max_admissible(g, p)
            s_values = [s for s in s_values if s <= s_max]

        if config.dump_matrices and not coarse:
            assemble_Ts(g, p, 0.0, E1_mode=config.mu_curve.E1_mode).dump(
                self.path('matrix_T0_%s.mtx' % key))

        fn = self.path('mu_curve_%s%s.csv' % (key, suffix))
        header = ['s', 'value', 'residual', 'iterations', 'grid_id']
        try:
            curve = mu_curve(
                g, p, s_values, nparallel=config.nparallel,
                E1_mode=config.mu_curve.E1_mode, **self.solver_kwargs)

        except MuCurveError as e:
            if e.partial is not None:
                write_csv(fn, header, e.partial.iter_rows())

            raise

        write_csv(fn, header, curve.iter_rows())
        return curve

    def hardy_scan(self, key):
        return self._memo(('hardy', key), lambda: self._hardy_scan(key))

    def _hardy_scan(self, key):
        hc = self.config.hardy
        p = self.profile(key)
        grids = [hc.get_grid(X, p.d) for X in hc.x_extents]

        if self.config.dump_matrices:
            assemble_H(grids[0], p).dump(self.path('matrix_H_%s.mtx' % key))

        results = list(parimap.parimap(
            _hardy_worker,
            grids,
            [p] * len(grids),
            [self.solver_kwargs] * len(grids),
            nprocs=self.config.nparallel))

        for result in results:
            if isinstance(result, ShearStripError):
                raise result

        write_csv(
            self.path('hardy_scan_%s.csv' % key),
            ['X', 'value', 'residual', 'iterations', 'grid_id'],
            [(g.X, r.value, r.residual, r.iterations, g.describe())
             for (g, r) in zip(grids, results)])

        return results

    def evolutions(self, key):
        return self._memo(('evolve', key), lambda: self._evolutions(key))

    def _evolutions(self, key):
        ec = self.config.evolve
        p = self.profile(key)
        g = ec.get_grid(p.d)
        dt = ec.dt if ec.dt is not None else default_dt(g)
        t_stop = ec.get_t_stop()
        ndata = len(ec.initial_data)

        traces = list(parimap.parimap(
            _evolve_worker,
            [g] * ndata,
            [p] * ndata,
            [datum.evaluate(g) for datum in ec.initial_data],
            [t_stop] * ndata,
            [dt] * ndata,
            [ec.inner_tolerance] * ndata,
            [self.config.solver.linear_solver] * ndata,
            nprocs=self.config.nparallel))

        for trace in traces:
            if isinstance(trace, ShearStripError):
                raise trace

        try:
            curve = self.mu_curve(key)
        except ShearStripError:
            curve = None

        for idatum, trace in enumerate(traces):
            trace.profile_id = '%s:%i' % (key, idatum)
            if curve is not None and \
                    math.log1p(trace.times[-1]) <= curve.s_values[-1]:

                bound = mu_integral_bound(curve, trace.times) \
                    * trace.initial_weighted_norm
            else:
                bound = num.full(trace.times.size, num.nan)

            write_csv(
                self.path('norm_trace_%s_%i.csv' % (key, idatum)),
                ['t', 'shifted_norm', 'bound'],
                zip(trace.times, trace.shifted_norms, bound))

        return traces

    def get_fit_window(self):
        ec = self.config.evolve
        return (ec.t_min, ec.get_t_stop())

    def decay_fits(self):
        return self._memo('decay_fits', self._decay_fits)

    def _decay_fits(self):
        window = self.get_fit_window()
        fits = {}
        rows = []
        for key in ['straight', 'sheared']:
            fits[key] = []
            for trace in self.evolutions(key):
                fit = fit_decay(trace, window)
                fits[key].append(fit)
                rows.append((
                    fit.profile_id, fit.gamma_hat, fit.c_hat, fit.t_min,
                    fit.t_max, fit.rms_residual))

        write_csv(
            self.path('decay_fits.csv'),
            ['profile_id', 'gamma_hat', 'c_hat', 't_min', 't_max',
             'rms_residual'],
            rows)

        return fits


def tensor_sum_deviation(oc, d):
    '''
    Dense spectrum of the straight-strip operator against all pairwise sums
    of the two closed-form difference spectra.
    '''
    g = build_grid2d(oc.tensor_X, oc.tensor_n_x, oc.tensor_n_z, d=d)
    H = assemble_H(g, Profile(kind='straight', d=d))
    dense = linalg.eigh(
        H.dense(), num.diag(H.mass_diag), eigvals_only=True)

    expected = num.sort(num.add.outer(
        g.gx.dirichlet_eigenvalues(), g.gz.dirichlet_eigenvalues()).ravel())

    return float(num.max(num.abs(dense - expected)))


def dense_oracle_deviation(oc, p, solver_kwargs):
    g = build_grid2d(oc.tensor_X, oc.tensor_n_x, oc.tensor_n_z, d=p.d)
    H = assemble_H(g, p)
    iterative = smallest_eig(H, H.mass_diag, **solver_kwargs).value
    dense = dense_smallest_eigs(H, H.mass_diag, k=1)[0]
    return abs(iterative - dense)


def convergence_orders(errors):
    errors = num.asarray(errors, dtype=float)
    return num.log2(errors[:-1] / errors[1:])


def oscillator_convergence_orders(oc, solver_kwargs):
    kwargs = dict(solver_kwargs, tolerance=1e-10, inner_tolerance=1e-12)
    errors = []
    for ncells in oc.oscillator_ncells:
        gx = build_grid1d(-oc.oscillator_X, oc.oscillator_X, ncells - 1)
        ground = oscillator_levels(gx, False, k=1, **kwargs)[0]
        errors.append(abs(ground.value - 0.25))

    return convergence_orders(errors), errors


def propagation_errors(oc, p, dt, t_stop, solver_kwargs):
    '''
    Relative deviation of the norm of an evolved eigenvector from the scalar
    exponential, at every step.
    '''
    g = build_grid2d(
        oc.propagation_X, oc.propagation_n_x, oc.propagation_n_z, d=p.d)

    H = assemble_H(g, p)
    kwargs = dict(solver_kwargs, tolerance=1e-10, inner_tolerance=1e-12)
    eig = smallest_eig(H, H.mass_diag, **kwargs)
    trace = crank_nicolson_evolve(
        g, p, eig.vector, t_stop, dt, inner_tolerance=1e-13)

    norms = trace.shifted_norms * num.exp(-g.e1_discrete * trace.times)
    expected = num.exp(-eig.value * trace.times)
    return num.abs(norms / norms[0] - expected) / expected


def time_stepping_orders(oc, p, solver_kwargs):
    errors = [
        propagation_errors(
            oc, p, dt, oc.propagation_t, solver_kwargs)[-1]
        for dt in oc.order_dts]

    return convergence_orders(errors), errors


def _format_values(values):
    return ', '.join('%.6f' % v for v in values)


def claim_oscillator_spectrum(lab, claim):
    oc = lab.config.oscillator
    levels = lab.oscillator_levels(False)
    values = num.array([r.value for r in levels])
    expected = 0.5 * (num.arange(1, len(levels) + 1) - 0.5)
    deviation = num.max(num.abs(values - expected))

    claim.computed_value = levels[0].value
    claim.tolerance = oc.claim_tolerance
    claim.passed = bool(
        deviation <= oc.claim_tolerance and all(r.converged for r in levels))
    claim.details = 'levels %s, expected %s' % (
        _format_values(values), _format_values(expected))


def claim_oscillator_dirichlet(lab, claim):
    oc = lab.config.oscillator
    levels = lab.oscillator_levels(True)
    values = num.array([r.value for r in levels])

    claim.computed_value = levels[0].value
    claim.tolerance = oc.claim_tolerance
    claim.passed = bool(
        abs(values[0] - 0.75) <= oc.claim_tolerance
        and all(r.converged for r in levels))
    claim.details = 'two lowest levels %s (two half-line copies)' % (
        _format_values(values))


def claim_straight_mu(lab, claim):
    mc = lab.config.mu_curve
    curve = lab.mu_curve('straight')
    deviation = float(num.max(num.abs(curve.mu_values - 0.25)))
    spread = float(num.ptp(curve.mu_values))
    spread_max = 2.0 * lab.config.solver.tolerance

    claim.computed_value = float(curve.mu_values[0])
    claim.tolerance = mc.slack
    claim.passed = bool(deviation <= mc.slack and spread <= spread_max)
    claim.details = 'max |mu - 1/4| = %g, spread over s = %g (limit %g)' % (
        deviation, spread, spread_max)


def claim_sheared_mu_curve(lab, claim):
    mc = lab.config.mu_curve
    curve = lab.mu_curve('sheared')
    coarse = lab.mu_curve('sheared', coarse=True)

    margin = curve.mu_values[0] - 0.25
    margin_coarse = coarse.mu_values[0] - 0.25
    violations = curve.monotonicity_violations(
        2.0 * lab.config.solver.tolerance)
    mu_last = float(curve.mu_values[-1])

    checks = [
        margin > mc.slack,
        margin_coarse > mc.slack,
        not violations,
        abs(mu_last - 0.75) <= mc.limit_tolerance * 0.75,
        mu_last < 0.75 + mc.overshoot]

    claim.computed_value = mu_last
    claim.tolerance = mc.limit_tolerance
    claim.passed = all(checks)
    claim.details = '\n'.join([
        'mu(0) - 1/4 = %g (grid %s), %g (grid %s)' % (
            margin, curve.grid_id, margin_coarse, coarse.grid_id),
        'mu(%g) = %.6f, admissible up to s = %g' % (
            curve.s_values[-1], mu_last, curve.s_max_admissible),
        'monotonicity violations at s = %s' % (
            ', '.join('%g' % curve.s_values[i] for i in violations)
            or 'none')])


def claim_gamma_dichotomy(lab, claim):
    mc = lab.config.mu_curve
    gamma_straight = gamma_inf(lab.mu_curve('straight'))
    gamma_sheared = gamma_inf(lab.mu_curve('sheared'))
    gamma_sheared_coarse = gamma_inf(lab.mu_curve('sheared', coarse=True))

    claim.computed_value = gamma_sheared
    claim.tolerance = mc.slack
    claim.passed = bool(
        abs(gamma_straight) <= mc.slack
        and gamma_sheared > 0.0
        and gamma_sheared_coarse > 0.0)
    claim.details = 'gamma straight %g, sheared %g (coarse grid %g)' % (
        gamma_straight, gamma_sheared, gamma_sheared_coarse)


def claim_hardy_constant(lab, claim):
    hc = lab.config.hardy
    straight = num.array([r.value for r in lab.hardy_scan('straight')])
    sheared = num.array([r.value for r in lab.hardy_scan('sheared')])
    spread = float(num.ptp(sheared) / num.max(num.abs(sheared)))

    claim.computed_value = float(sheared[-1])
    claim.tolerance = hc.spread_tolerance
    claim.passed = bool(
        num.all(num.diff(straight) < 0.0)
        and num.all(straight >= -1e-9)
        and num.all(sheared > 0.0)
        and spread <= hc.spread_tolerance)
    claim.details = '\n'.join([
        'X = %s' % ', '.join('%g' % X for X in hc.x_extents),
        'straight c_H: %s' % _format_values(straight),
        'sheared c_H: %s (relative spread %g)' % (
            _format_values(sheared), spread)])


def _window_sensitivity(trace, window):
    try:
        return window_sensitivity(trace, window)
    except FitError as e:
        logger.warning('No window sensitivity for %s: %s', trace.profile_id, e)
        return num.nan


def claim_decay_ordering(lab, claim):
    ec = lab.config.evolve
    fits = lab.decay_fits()
    gamma_straight = fits['straight'][0].gamma_hat
    gamma_sheared = fits['sheared'][0].gamma_hat

    window = lab.get_fit_window()
    sensitivities = dict(
        (key, [_window_sensitivity(trace, window)
               for trace in lab.evolutions(key)])
        for key in ['straight', 'sheared'])

    claim.computed_value = gamma_straight
    claim.tolerance = ec.gamma_margin
    claim.passed = bool(
        ec.gamma_straight_min <= gamma_straight <= ec.gamma_straight_max
        and gamma_sheared >= gamma_straight + ec.gamma_margin)

    lines = [
        'gamma_hat straight %.4f, sheared %.4f on window [%g, %g]' % (
            gamma_straight, gamma_sheared, window[0], window[1])]

    for key in ['straight', 'sheared']:
        lines.append(
            'Gamma estimate %s (min over initial data) %.4f, fits %s, '
            'window sensitivity %s' % (
                key,
                min(fit.gamma_hat for fit in fits[key]),
                _format_values([fit.gamma_hat for fit in fits[key]]),
                _format_values(sensitivities[key])))

    claim.details = '\n'.join(lines)


def _bound_ratios(lab, make_bound):
    ratios = {}
    for key in ['straight', 'sheared']:
        curve = lab.mu_curve(key)
        ratio = 0.0
        for trace in lab.evolutions(key):
            bound = make_bound(curve, trace.times)
            ratio = max(ratio, float(num.max(trace.normalized / bound)))

        ratios[key] = ratio

    return ratios


def claim_bound_consistency(lab, claim):
    slack = lab.config.evolve.bound_slack
    ratios = _bound_ratios(lab, mu_integral_bound)

    claim.computed_value = max(ratios.values())
    claim.tolerance = slack
    claim.passed = claim.computed_value <= 1.0 + slack
    claim.details = 'max measured / bound: straight %.4f, sheared %.4f' % (
        ratios['straight'], ratios['sheared'])


def claim_uniform_bound(lab, claim):
    slack = lab.config.evolve.bound_slack

    def make_bound(curve, times):
        return uniform_bound(gamma_inf(curve), times)

    ratios = _bound_ratios(lab, make_bound)

    claim.computed_value = max(ratios.values())
    claim.tolerance = slack
    claim.passed = claim.computed_value <= 1.0 + slack
    claim.details = 'max measured / bound: straight %.4f, sheared %.4f' % (
        ratios['straight'], ratios['sheared'])


def claim_oracle_suites(lab, claim):
    oc = lab.config.oracles
    p = lab.config.profile
    kwargs = lab.solver_kwargs

    tensor = tensor_sum_deviation(oc, p.d)
    dense = dense_oracle_deviation(oc, p, kwargs)
    propagation = float(num.max(propagation_errors(
        oc, p, oc.propagation_dt, oc.propagation_t, kwargs)))
    eig_orders, eig_errors = oscillator_convergence_orders(oc, kwargs)
    time_orders, time_errors = time_stepping_orders(oc, p, kwargs)

    def in_range(orders):
        return bool(num.all(
            (orders >= oc.order_min) & (orders <= oc.order_max)))

    claim.computed_value = tensor
    claim.tolerance = oc.tensor_tolerance
    claim.passed = bool(
        tensor <= oc.tensor_tolerance
        and dense <= 1e-9
        and propagation <= oc.propagation_tolerance
        and in_range(eig_orders)
        and in_range(time_orders))

    claim.details = '\n'.join([
        'tensor-sum spectrum deviation %g' % tensor,
        'iterative vs dense smallest eigenvalue %g' % dense,
        'eigenvector propagation relative error %g (dt=%g)' % (
            propagation, oc.propagation_dt),
        'eigenvalue convergence orders %s (errors %s)' % (
            _format_values(eig_orders),
            ', '.join('%.3g' % e for e in eig_errors)),
        'time stepping convergence orders %s (errors %s)' % (
            _format_values(time_orders),
            ', '.join('%.3g' % e for e in time_errors))])


claim_table = {
    1: ('oscillator_spectrum', 'oscillator ground', '0.25',
        claim_oscillator_spectrum),
    2: ('oscillator_dirichlet_ground', 'oscillator l_D ground', '0.75',
        claim_oscillator_dirichlet),
    3: ('straight_mu', 'straight strip mu(s)', '0.25 for all s',
        claim_straight_mu),
    4: ('sheared_mu_curve', 'sheared strip mu(s_max)', '-> 0.75',
        claim_sheared_mu_curve),
    5: ('gamma_dichotomy', 'gamma_inf sheared', '> 0 (straight: 0)',
        claim_gamma_dichotomy),
    6: ('hardy_constant', 'Hardy constant sheared', '> 0 (straight: -> 0)',
        claim_hardy_constant),
    7: ('decay_ordering', 'decay exponent straight', '0.25 (sheared >= 0.75)',
        claim_decay_ordering),
    8: ('bound_consistency', 'measured / mu-integral bound', '<= 1',
        claim_bound_consistency),
    9: ('oracle_suites', 'tensor-sum spectrum deviation', '0',
        claim_oracle_suites),
    10: ('uniform_bound', 'measured / uniform bound', '<= 1',
         claim_uniform_bound),
}


def make_claim(criterion):
    claim_id, description, expected, _ = claim_table[criterion]
    return Claim(
        criterion=criterion,
        claim_id=claim_id,
        description=description,
        expected=expected)


def skipped_claim(criterion, reason):
    claim = make_claim(criterion)
    claim.skipped = True
    claim.details = 'skipped: %s' % reason
    return claim


def evaluate_claim(lab, criterion):
    func = claim_table[criterion][3]
    claim = make_claim(criterion)

    logger.info('Evaluating claim %i: %s', criterion, claim.claim_id)
    try:
        func(lab, claim)
    except (ShearStripError, num.linalg.LinAlgError) as e:
        claim.passed = False
        claim.details = 'failed: %s' % e

    return claim


def run(config):
    '''
    Run the configured experiment and write CSV files and the report.

    :returns: :py:class:`shearstrip.report.Report`
    '''
    out_path = config.get_out_path()
    if not op.isdir(out_path):
        raise ShearStripError('output directory does not exist: %s' % out_path)

    try:
        with open(op.join(out_path, 'config.yaml'), 'w') as f:
            f.write(dump_config(config))

    except OSError as e:
        raise ShearStripError(
            'cannot write to output directory %s: %s' % (out_path, e))

    lab = Lab(config, out_path)
    report = Report(experiment=config.experiment, version_info=version_info())

    for criterion in experiment_criteria[config.experiment]:
        if criterion in sheared_criteria and config.profile.is_straight:
            report.add(skipped_claim(
                criterion, 'needs a sheared profile'))
            continue

        report.add(evaluate_claim(lab, criterion))

    write_report(report, out_path)
    return report


__all__ = '''
    Lab
    run
    evaluate_claim
    skipped_claim
    tensor_sum_deviation
    dense_oracle_deviation
    convergence_orders
    oscillator_convergence_orders
    propagation_errors
    time_stepping_orders
'''.split()

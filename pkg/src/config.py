import logging
import os.path as op

import yaml

from pyrocko import guts
from pyrocko.guts import Object, Bool, Float, Int, List, StringChoice

from .meta import Path, HasPaths, ConfigError
from .geometry import Profile
from .discretize import GridGrading, E1Mode, build_grid2d, build_grid1d
from .eigensolve import LinearSolverChoice
from .evolve import InitialDatum, default_initial_data
from .version import __version__

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.config')


class ExperimentChoice(StringChoice):
    choices = ['oscillator', 'hardy', 'mu_curve', 'evolve', 'full_report']


class GridConfig(Object):
    X = Float.T(
        default=8.0,
        help='Half length of the truncated strip.')
    n_x = Int.T(
        default=599,
        help='Number of interior nodes along the strip.')
    n_z = Int.T(
        default=12,
        help='Number of interior nodes across the strip.')
    grading = GridGrading.T(default='geometric_toward_zero')
    ratio = Float.T(
        default=0.993,
        help='Ratio of neighbouring cell lengths toward zero.')

    def get_grid(self, d):
        return build_grid2d(
            self.X, self.n_x, self.n_z, d=d,
            grading=self.grading, ratio=self.ratio)

    def coarsened(self):
        '''
        Grid with about half the nodes in both directions, with the same
        overall grading.
        '''
        return GridConfig(
            X=self.X,
            n_x=max(4, (self.n_x + 1) // 2 - 1),
            n_z=max(4, (self.n_z + 1) // 2 - 1),
            grading=self.grading,
            ratio=self.ratio**2)


class SolverConfig(Object):
    tolerance = Float.T(
        default=1e-8,
        help='Eigenpair acceptance: residual <= tolerance * (1 + |value|).')
    inner_tolerance = Float.T(
        default=1e-10,
        help='Relative residual of the inner linear solves.')
    max_iterations = Int.T(default=500)
    linear_solver = LinearSolverChoice.T(default='cg')

    def get_kwargs(self, seed):
        return dict(
            tolerance=self.tolerance,
            inner_tolerance=self.inner_tolerance,
            max_iterations=self.max_iterations,
            linear_solver=self.linear_solver,
            seed=seed)


class OscillatorConfig(Object):
    X = Float.T(default=12.0)
    n = Int.T(default=1200)
    nlevels = Int.T(default=3)
    claim_tolerance = Float.T(default=1e-4)

    def get_grid(self):
        return build_grid1d(-self.X, self.X, self.n, node_at_zero=True)


class MuCurveConfig(Object):
    s_values = List.T(
        Float.T(),
        default=[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5,
                 6.0])
    E1_mode = E1Mode.T(default='discrete')
    slack = Float.T(
        default=2e-3,
        help='Discretization slack of mu comparisons.')
    limit_tolerance = Float.T(
        default=0.1,
        help='Relative tolerance of mu at the largest s against 3/4.')
    overshoot = Float.T(default=2e-2)


class HardyConfig(Object):
    x_extents = List.T(Float.T(), default=[8.0, 12.0, 16.0])
    spacing = Float.T(default=0.1)
    n_z = Int.T(default=10)
    spread_tolerance = Float.T(default=0.1)

    def get_grid(self, X, d):
        n_x = int(round(2.0 * X / self.spacing)) - 1
        return build_grid2d(X, n_x, self.n_z, d=d)


class EvolveConfig(Object):
    X = Float.T(default=36.0)
    spacing = Float.T(default=0.1)
    n_z = Int.T(default=10)
    dt = Float.T(
        optional=True,
        help='Time step, default ``4 min(h_x, h_z)^2``.')
    t_min = Float.T(default=5.0)
    t_max = Float.T(
        optional=True,
        help='End of run and fit window, default ``(0.4 X)^2``.')
    initial_data = List.T(
        InitialDatum.T(),
        default=default_initial_data())
    inner_tolerance = Float.T(default=1e-12)
    bound_slack = Float.T(default=0.05)
    gamma_straight_min = Float.T(default=0.20)
    gamma_straight_max = Float.T(default=0.30)
    gamma_margin = Float.T(default=0.15)

    def get_grid(self, d):
        n_x = int(round(2.0 * self.X / self.spacing)) - 1
        return build_grid2d(self.X, n_x, self.n_z, d=d)

    def get_t_stop(self):
        if self.t_max is not None:
            return self.t_max

        return (0.4 * self.X)**2


class OracleConfig(Object):
    tensor_X = Float.T(default=8.0)
    tensor_n_x = Int.T(default=30)
    tensor_n_z = Int.T(default=10)
    tensor_tolerance = Float.T(default=1e-10)
    oscillator_X = Float.T(default=10.0)
    oscillator_ncells = List.T(Int.T(), default=[125, 250, 500])
    propagation_X = Float.T(default=4.0)
    propagation_n_x = Int.T(default=39)
    propagation_n_z = Int.T(default=9)
    propagation_dt = Float.T(default=1e-3)
    propagation_t = Float.T(default=1.0)
    propagation_tolerance = Float.T(default=1e-6)
    order_dts = List.T(Float.T(), default=[0.1, 0.05, 0.025])
    order_min = Float.T(default=1.8)
    order_max = Float.T(default=2.2)


class RunConfig(HasPaths):
    profile = Profile.T(
        default=Profile.D(kind='smooth_bump', amplitude=1.0, half_width=1.0),
        help='Profile of the sheared strip, compared against the straight '
             'strip of the same width.')
    grid = GridConfig.T(
        default=GridConfig.D(),
        help='Base grid of the self-similar operators.')
    experiment = ExperimentChoice.T(default='full_report')
    solver = SolverConfig.T(default=SolverConfig.D())
    oscillator = OscillatorConfig.T(default=OscillatorConfig.D())
    mu_curve = MuCurveConfig.T(default=MuCurveConfig.D())
    hardy = HardyConfig.T(default=HardyConfig.D())
    evolve = EvolveConfig.T(default=EvolveConfig.D())
    oracles = OracleConfig.T(default=OracleConfig.D())
    out_path = Path.T(
        default='.',
        help='Existing directory receiving CSV files and the report.')
    seed = Int.T(default=123)
    nparallel = Int.T(default=1)
    dump_matrices = Bool.T(default=False)

    def get_out_path(self):
        return self.expand_path(self.out_path)

    def get_solver_kwargs(self):
        return self.solver.get_kwargs(self.seed)

    def get_straight_profile(self):
        return Profile(kind='straight', d=self.profile.d)

    def check(self):
        '''
        Range checks, raising :py:exc:`ConfigError` naming the field.
        '''

        def require(cond, field, what, value):
            if not cond:
                raise ConfigError('%s: %s, got %s' % (field, what, value))

        p = self.profile
        require(p.half_width > 0., 'profile.half_width', 'must be > 0',
                p.half_width)
        require(p.d > 0., 'profile.d', 'must be > 0', p.d)

        g = self.grid
        require(g.X > 0., 'grid.X', 'must be > 0', g.X)
        require(g.n_x >= 4, 'grid.n_x', 'must be >= 4', g.n_x)
        require(g.n_z >= 4, 'grid.n_z', 'must be >= 4', g.n_z)
        require(0. < g.ratio <= 1., 'grid.ratio', 'must be in (0, 1]',
                g.ratio)

        s = self.solver
        require(s.tolerance > 0., 'solver.tolerance', 'must be > 0',
                s.tolerance)
        require(s.inner_tolerance > 0., 'solver.inner_tolerance',
                'must be > 0', s.inner_tolerance)
        require(s.max_iterations >= 1, 'solver.max_iterations',
                'must be >= 1', s.max_iterations)

        o = self.oscillator
        require(o.X > 0., 'oscillator.X', 'must be > 0', o.X)
        require(o.n >= 2, 'oscillator.n', 'must be >= 2', o.n)
        require(o.nlevels >= 1, 'oscillator.nlevels', 'must be >= 1',
                o.nlevels)

        m = self.mu_curve
        require(len(m.s_values) >= 1, 'mu_curve.s_values',
                'must not be empty', m.s_values)
        require(m.s_values[0] == 0.0, 'mu_curve.s_values',
                'must start at 0', m.s_values)
        require(all(b > a for (a, b) in zip(m.s_values, m.s_values[1:])),
                'mu_curve.s_values', 'must be strictly ascending',
                m.s_values)

        h = self.hardy
        require(len(h.x_extents) >= 2, 'hardy.x_extents',
                'needs at least two entries', h.x_extents)
        require(all(x > 0. for x in h.x_extents), 'hardy.x_extents',
                'must be > 0', h.x_extents)
        require(h.spacing > 0., 'hardy.spacing', 'must be > 0', h.spacing)
        require(h.n_z >= 4, 'hardy.n_z', 'must be >= 4', h.n_z)

        e = self.evolve
        require(e.X > 0., 'evolve.X', 'must be > 0', e.X)
        require(e.spacing > 0., 'evolve.spacing', 'must be > 0', e.spacing)
        require(e.n_z >= 4, 'evolve.n_z', 'must be >= 4', e.n_z)
        require(e.dt is None or e.dt > 0., 'evolve.dt', 'must be > 0', e.dt)
        require(e.t_min >= 0., 'evolve.t_min', 'must be >= 0', e.t_min)
        require(e.get_t_stop() > e.t_min, 'evolve.t_max',
                'must be > evolve.t_min', e.get_t_stop())
        require(len(e.initial_data) >= 1, 'evolve.initial_data',
                'must not be empty', e.initial_data)
        for i, datum in enumerate(e.initial_data):
            require(datum.width > 0., 'evolve.initial_data[%i].width' % i,
                    'must be > 0', datum.width)

        require(self.seed >= 0, 'seed', 'must be >= 0', self.seed)
        require(self.nparallel >= 1, 'nparallel', 'must be >= 1',
                self.nparallel)


_child_classes = {
    RunConfig: {
        'profile': Profile,
        'grid': GridConfig,
        'solver': SolverConfig,
        'oscillator': OscillatorConfig,
        'mu_curve': MuCurveConfig,
        'hardy': HardyConfig,
        'evolve': EvolveConfig,
        'oracles': OracleConfig},
    EvolveConfig: {
        'initial_data': InitialDatum}}

_tagged_classes = dict(
    (cls.__name__, cls) for cls in [
        RunConfig, Profile, GridConfig, SolverConfig, OscillatorConfig,
        MuCurveConfig, HardyConfig, EvolveConfig, OracleConfig,
        InitialDatum])


def _check_keys(node, cls, path):
    if isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _check_keys(item, cls, '%s[%i]' % (path, i))

        return

    if not isinstance(node, yaml.MappingNode):
        return

    if node.tag.startswith('!'):
        tagged = _tagged_classes.get(node.tag.split('.')[-1])
        if tagged is None:
            raise ConfigError('%s: unknown object type %s' % (path, node.tag))

        cls = tagged

    allowed = set(cls.T.propnames)
    children = _child_classes.get(cls, {})
    for key_node, value_node in node.value:
        key = key_node.value
        field = '%s.%s' % (path, key) if path else key
        if key not in allowed:
            raise ConfigError('%s: unknown key' % field)

        if key in children:
            _check_keys(value_node, children[key], field)


def parse_config(text):
    '''
    Parse and validate a YAML run configuration.

    Unknown keys are rejected with the dotted name of the offending field.
    '''
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as e:
        raise ConfigError('cannot parse configuration: %s' % e)

    if node is None:
        raise ConfigError('empty configuration')

    _check_keys(node, RunConfig, '')

    try:
        config = guts.load(string=text)
        if isinstance(config, Object):
            config.validate(regularize=True)

    except (yaml.YAMLError, guts.ValidationError, ValueError, TypeError) as e:
        raise ConfigError('invalid configuration: %s' % e)

    if not isinstance(config, RunConfig):
        raise ConfigError(
            'configuration must be a !shearstrip.RunConfig document')

    config.check()
    return config


def read_config(path):
    try:
        with open(path, 'r') as f:
            text = f.read()

    except OSError:
        raise ConfigError(
            'cannot read shearstrip configuration file: %s' % path)

    config = parse_config(text)
    config.set_basepath(op.dirname(path) or '.')
    return config


def dump_config(config):
    return config.dump(
        header='shearstrip configuration file, version %s' % __version__)


def write_config(config, path):
    basepath = config.get_basepath()
    try:
        if basepath is not None:
            config.change_basepath(op.dirname(path) or '.')

        guts.dump(
            config,
            filename=path,
            header='shearstrip configuration file, version %s' % __version__)

    except OSError:
        raise ConfigError(
            'cannot write shearstrip configuration file: %s' % path)

    finally:
        if basepath is not None:
            config.change_basepath(basepath)


def default_config(**kwargs):
    config = RunConfig(**kwargs)
    config.set_basepath('.')
    return config


__all__ = '''
    ExperimentChoice
    GridConfig
    SolverConfig
    OscillatorConfig
    MuCurveConfig
    HardyConfig
    EvolveConfig
    OracleConfig
    RunConfig
    parse_config
    read_config
    dump_config
    write_config
    default_config
'''.split()

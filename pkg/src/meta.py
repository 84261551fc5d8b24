import logging
import os.path as op

from pyrocko.guts import Object, String

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.meta')


def xjoin(basepath, path):
    if path is None and basepath is not None:
        return basepath
    elif op.isabs(path) or basepath is None:
        return path
    else:
        return op.join(basepath, path)


def xrelpath(path, start):
    if op.isabs(path):
        return path
    else:
        return op.relpath(path, start)


class ShearStripError(Exception):
    pass


class GeometryError(ShearStripError):
    pass


class GridError(ShearStripError):
    pass


class UnderresolvedError(GridError):
    '''
    Raised when the shear coefficient is not resolved by the y-grid.

    :attr s: the requested self-similar time
    :attr s_max: the largest admissible self-similar time for the grid
    '''

    def __init__(self, s, s_max):
        GridError.__init__(
            self,
            'sigma underresolved at s=%g; maximal admissible s for this '
            'grid is %g' % (s, s_max))
        self.s = s
        self.s_max = s_max


class LinearSolveError(ShearStripError):
    pass


class ConvergenceError(ShearStripError):
    def __init__(self, message, best_residual, iterations):
        ShearStripError.__init__(
            self, '%s (best residual %g after %i iterations)' % (
                message, best_residual, iterations))
        self.best_residual = best_residual
        self.iterations = iterations


class MuCurveError(ShearStripError):
    def __init__(self, message, partial):
        ShearStripError.__init__(self, message)
        self.partial = partial


class EvolveError(ShearStripError):
    def __init__(self, message, istep):
        ShearStripError.__init__(self, 'step %i: %s' % (istep, message))
        self.istep = istep


class FitError(ShearStripError):
    pass


class ConfigError(ShearStripError):
    pass


class Path(String):
    pass


class HasPaths(Object):
    path_prefix = Path.T(optional=True)

    def __init__(self, *args, **kwargs):
        Object.__init__(self, *args, **kwargs)
        self._basepath = None
        self._parent_path_prefix = None

    def set_basepath(self, basepath, parent_path_prefix=None):
        self._basepath = basepath
        self._parent_path_prefix = parent_path_prefix
        for (prop, val) in self.T.ipropvals(self):
            if isinstance(val, HasPaths):
                val.set_basepath(
                    basepath, self.path_prefix or self._parent_path_prefix)

    def get_basepath(self):
        return self._basepath

    def change_basepath(self, new_basepath, parent_path_prefix=None):
        if self._basepath is None:
            self._basepath = new_basepath
            return

        self._parent_path_prefix = parent_path_prefix
        if self.path_prefix or not self._parent_path_prefix:
            self.path_prefix = op.normpath(xjoin(xrelpath(
                self._basepath, new_basepath), self.path_prefix))

        for val in self.T.ivals(self):
            if isinstance(val, HasPaths):
                val.change_basepath(
                    new_basepath, self.path_prefix or self._parent_path_prefix)

        self._basepath = new_basepath

    def expand_path(self, path):
        if path is None:
            return None

        basepath = self._basepath or '.'
        path_prefix = self.path_prefix or self._parent_path_prefix
        return op.normpath(xjoin(basepath, xjoin(path_prefix, path)))


__all__ = '''
    ShearStripError
    GeometryError
    GridError
    UnderresolvedError
    LinearSolveError
    ConvergenceError
    MuCurveError
    EvolveError
    FitError
    ConfigError
    Path
    HasPaths
'''.split()

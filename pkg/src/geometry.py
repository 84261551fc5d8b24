'''
Boundary profiles of sheared strips and the functions attached to them.

A sheared strip is the region ``f(x) < z < f(x) + d`` in the plane. All
operators used by :py:mod:`shearstrip.discretize` depend on the profile only
through the derivative ``f'``, which is required to have compact support in
``[-b, b]``.
'''

import math
import logging

import numpy as num
from scipy import integrate

from pyrocko.guts import Object, Float, StringChoice

from .meta import GeometryError

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.geometry')


class ProfileKind(StringChoice):
    choices = ['straight', 'smooth_bump', 'tent']


class Profile(Object):
    '''
    Lower boundary curve ``z = f(x)`` of a strip of constant width ``d``.
    '''

    kind = ProfileKind.T(
        default='straight',
        help='Profile family. ``smooth_bump`` has ``f\'(x) = a exp(1/((x/b)^2'
             ' - 1))`` on ``|x| < b``, ``tent`` has ``f\' = a`` on ``[-b, 0)``'
             ' and ``f\' = -a`` on ``(0, b]``.')
    amplitude = Float.T(
        default=1.0,
        help='Amplitude ``a`` of the profile derivative [length / length].')
    half_width = Float.T(
        default=1.0,
        help='Half width ``b`` of the support of ``f\'`` [length].')
    d = Float.T(
        default=math.pi,
        help='Strip width [length].')

    def check(self):
        if not self.half_width > 0.:
            raise GeometryError(
                'half_width must be positive, got %g' % self.half_width)

        if not self.d > 0.:
            raise GeometryError('d must be positive, got %g' % self.d)

    @property
    def is_straight(self):
        return self.kind == 'straight' or self.amplitude == 0.0

    @property
    def support(self):
        '''
        Interval ``(inf supp f', sup supp f')`` or ``None`` if straight.
        '''
        if self.is_straight:
            return None

        return (-self.half_width, self.half_width)

    def fprime(self, x):
        x = num.asarray(x, dtype=float)
        fp = num.zeros(x.shape)
        if self.is_straight:
            return fp

        a = self.amplitude
        b = self.half_width

        if self.kind == 'smooth_bump':
            inside = num.abs(x) < b
            xi = x[inside] / b
            fp[inside] = a * num.exp(1.0 / (xi**2 - 1.0))

        elif self.kind == 'tent':
            fp[num.logical_and(x >= -b, x < 0.)] = a
            fp[num.logical_and(x > 0., x <= b)] = -a

        return fp

    def f(self, x):
        '''
        Antiderivative of ``f'`` with ``f(-b) = 0``, by adaptive quadrature.
        '''
        if num.ndim(x) != 0:
            return num.array([self.f(xx) for xx in num.ravel(x)]).reshape(
                num.shape(x))

        if self.is_straight:
            return 0.0

        b = self.half_width
        xc = min(max(float(x), -b), b)
        if xc == -b:
            return 0.0

        points = [0.] if xc > 0. else None

        def integrand(xx):
            return float(self.fprime(xx))

        val, _ = integrate.quad(
            integrand, -b, xc, points=points, epsabs=1e-13, epsrel=1e-12)

        return val

    def fprime_sup(self, tolerance=1e-9, max_refinements=16):
        '''
        ``max |f'|``, sampled on successively refined grids over the support.
        '''
        if self.is_straight:
            return 0.0

        b = self.half_width
        last = None
        for k in range(6, 6 + max_refinements):
            x = num.linspace(-b, b, 2**k + 1)
            val = float(num.max(num.abs(self.fprime(x))))
            if last is not None and abs(val - last) <= tolerance:
                return val

            last = val

        logger.warning(
            'sup of profile derivative not stable after %i refinements',
            max_refinements)

        return last


def eval_profile(p, x):
    '''
    Evaluate the profile and its derivative at ``x``.

    :returns: tuple ``(f(x), f'(x))``
    '''
    return p.f(x), float(p.fprime(x))


def shear_map(p, x, z):
    '''
    Map straight-strip coordinates ``(x, z)`` into the sheared strip.
    '''
    if not 0.0 <= z <= p.d:
        raise GeometryError(
            'transverse coordinate z=%g outside [0, %g]' % (z, p.d))

    return x, p.f(x) + z


def metric(p, x):
    fp = float(p.fprime(x))
    return num.array([
        [1.0 + fp**2, fp],
        [fp, 1.0]])


def transverse_eigenvalue(d, n):
    '''
    Eigenvalue ``(n pi / d)^2`` of the Dirichlet Laplacian on ``(0, d)``.
    '''
    if n < 1:
        raise GeometryError('mode number must be >= 1, got %i' % n)

    if not d > 0.:
        raise GeometryError('d must be positive, got %g' % d)

    return (n * math.pi / d)**2


def transverse_mode(d, n, z):
    '''
    Normalized Dirichlet eigenfunction ``sqrt(2/d) sin(n pi z / d)``.
    '''
    if n < 1:
        raise GeometryError('mode number must be >= 1, got %i' % n)

    z = num.asarray(z, dtype=float)
    if num.any(z < 0.0) or num.any(z > d):
        raise GeometryError('transverse coordinate outside [0, %g]' % d)

    val = math.sqrt(2.0 / d) * num.sin(n * math.pi * z / d)
    if val.ndim == 0:
        return float(val)

    return val


def discrete_transverse_eigenvalue(d, n_z):
    '''
    Lowest eigenvalue of the three-point Dirichlet Laplacian on ``(0, d)``
    with ``n_z`` interior nodes.
    '''
    h = d / (n_z + 1)
    return (4.0 / h**2) * math.sin(math.pi * h / (2.0 * d))**2


def weight_K(x):
    return num.exp(num.asarray(x, dtype=float)**2 / 4.0)


def weight_rho(x):
    return 1.0 / num.sqrt(1.0 + num.asarray(x, dtype=float)**2)


__all__ = '''
    ProfileKind
    Profile
    eval_profile
    shear_map
    metric
    transverse_eigenvalue
    transverse_mode
    discrete_transverse_eigenvalue
    weight_K
    weight_rho
'''.split()

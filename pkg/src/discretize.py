'''
Truncated tensor grids and assembly of the quadratic forms.

All operators are assembled variationally as sums of ``D^T W D`` with first
difference maps ``D`` onto cell edges and diagonal edge weights ``W``. Masses
are lumped (trapezoidal) and diagonal. Unknowns on a :py:class:`Grid2D` are
ordered with the transverse index running fastest, ``k = i * n_z + j``.
'''

import math
import logging

import numpy as num
from scipy import sparse
from scipy import io as sio

from pyrocko.guts import Object, Float, Int, StringChoice
from pyrocko.guts_array import Array

from .meta import GridError, UnderresolvedError
from . import geometry

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.discretize')

# cells required across the support of the shear coefficient
ncells_sigma_min = 8


class GridGrading(StringChoice):
    choices = ['uniform', 'geometric_toward_zero']


class GridBoundary(StringChoice):
    choices = ['dirichlet_both', 'dirichlet_plus_interior_node_at_zero']


class E1Mode(StringChoice):
    choices = ['discrete', 'continuous']


class Grid1D(Object):
    '''
    Interior nodes of ``(a, b)`` with homogeneous Dirichlet ends.
    '''

    a = Float.T()
    b = Float.T()
    spacing = Array.T(
        shape=(None,), dtype=float, serialize_as='list',
        help='The ``n + 1`` cell lengths, left to right.')
    boundary = GridBoundary.T(default='dirichlet_both')
    izero = Int.T(
        optional=True,
        help='Index of the interior node sitting exactly at zero.')
    grading = GridGrading.T(default='uniform')
    ratio = Float.T(default=1.0)

    def check(self):
        if self.spacing.size < 3:
            raise GridError(
                'grid needs at least 2 interior nodes, got %i' % self.n)

        if num.any(self.spacing <= 0.0):
            raise GridError('grid spacing must be positive')

        length = self.b - self.a
        if abs(num.sum(self.spacing) - length) > 1e-10 * length:
            raise GridError('grid spacing does not sum up to b - a')

    @property
    def n(self):
        return self.spacing.size - 1

    @property
    def nodes(self):
        x = self.a + num.cumsum(self.spacing)[:-1]
        if self.izero is not None:
            x -= x[self.izero]

        return x

    @property
    def full_nodes(self):
        '''
        Nodes including the two boundary points.
        '''
        return num.concatenate([[self.a], self.nodes, [self.b]])

    @property
    def midpoints(self):
        xf = self.full_nodes
        return 0.5 * (xf[:-1] + xf[1:])

    @property
    def mass(self):
        return 0.5 * (self.spacing[:-1] + self.spacing[1:])

    @property
    def is_uniform(self):
        return num.all(self.spacing == self.spacing[0])

    def dirichlet_eigenvalues(self):
        '''
        Closed-form spectrum ``(4/h^2) sin^2(k pi h / (2L))`` of the
        three-point Dirichlet Laplacian, for uniform grids only.
        '''
        if not self.is_uniform:
            raise GridError('closed-form spectrum needs a uniform grid')

        h = self.spacing[0]
        length = self.b - self.a
        k = num.arange(1, self.n + 1)
        return (4.0 / h**2) * num.sin(k * math.pi * h / (2.0 * length))**2

    def describe(self):
        s = '%g_%g-n%i' % (self.a, self.b, self.n)
        if self.grading != 'uniform':
            s += '-geom%g' % self.ratio

        return s


class Grid2D(Object):
    '''
    Tensor grid over ``(-X, X) x (0, d)``, Dirichlet on all four sides.
    '''

    gx = Grid1D.T()
    gz = Grid1D.T()

    @property
    def n_x(self):
        return self.gx.n

    @property
    def n_z(self):
        return self.gz.n

    @property
    def size(self):
        return self.gx.n * self.gz.n

    @property
    def X(self):
        return self.gx.b

    @property
    def d(self):
        return self.gz.b

    @property
    def e1_discrete(self):
        return geometry.discrete_transverse_eigenvalue(self.d, self.n_z)

    @property
    def mass(self):
        return num.kron(self.gx.mass, self.gz.mass)

    def meshgrid(self):
        return num.meshgrid(self.gx.nodes, self.gz.nodes, indexing='ij')

    def describe(self):
        s = 'X%g-nx%i-nz%i' % (self.X, self.n_x, self.n_z)
        if self.gx.grading != 'uniform':
            s += '-geom%g' % self.gx.ratio

        return s


def _half_spacing(length, m, ratio):
    # cell lengths growing away from zero by 1/ratio per cell
    if ratio == 1.0:
        return num.full(m, length / m)

    q = 1.0 / ratio
    h0 = length * (q - 1.0) / (q**m - 1.0)
    h = h0 * q**num.arange(m)
    h *= length / num.sum(h)
    return h


def build_grid1d(a, b, n, grading='uniform', ratio=1.0, node_at_zero=False):
    '''
    Build a one-dimensional grid with ``n`` interior nodes on ``(a, b)``.

    With ``grading='geometric_toward_zero'`` the cells shrink geometrically
    toward ``x = 0``, which is then always a node.
    '''

    if n < 2:
        raise GridError('grid needs at least 2 interior nodes, got %i' % n)

    if not b > a:
        raise GridError('invalid grid interval (%g, %g)' % (a, b))

    if not 0.0 < ratio <= 1.0:
        raise GridError('grading ratio must be in (0, 1], got %g' % ratio)

    if grading not in GridGrading.choices:
        raise GridError('unknown grid grading: %s' % grading)

    if grading == 'uniform' and not node_at_zero:
        return Grid1D(
            a=a, b=b, spacing=num.full(n + 1, (b - a) / (n + 1)))

    if not a < 0.0 < b:
        raise GridError(
            'interval (%g, %g) does not contain zero' % (a, b))

    if grading == 'uniform':
        ratio = 1.0

    m_left = (n + 1) // 2
    m_right = n + 1 - m_left
    spacing = num.concatenate([
        _half_spacing(-a, m_left, ratio)[::-1],
        _half_spacing(b, m_right, ratio)])

    g = Grid1D(
        a=a, b=b, spacing=spacing,
        boundary='dirichlet_plus_interior_node_at_zero',
        izero=m_left - 1,
        grading=grading,
        ratio=ratio)

    g.check()
    return g


def build_grid2d(X, n_x, n_z, d=math.pi, grading='uniform', ratio=1.0):
    if not X > 0.0:
        raise GridError('X must be positive, got %g' % X)

    if n_x < 4 or n_z < 4:
        raise GridError(
            'need n_x >= 4 and n_z >= 4, got n_x=%i, n_z=%i' % (n_x, n_z))

    if not 0.0 < ratio <= 1.0:
        raise GridError('grading ratio must be in (0, 1], got %g' % ratio)

    node_at_zero = grading == 'geometric_toward_zero' or n_x % 2 == 1
    gx = build_grid1d(
        -X, X, n_x, grading=grading, ratio=ratio, node_at_zero=node_at_zero)
    gz = build_grid1d(0.0, d, n_z)
    return Grid2D(gx=gx, gz=gz)


class SparseSymmetricOperator(object):
    '''
    Symmetric sparse matrix together with the diagonal of the lumped mass.

    The matrix is symmetrized on construction, so that the stored entries
    are exactly symmetric.
    '''

    def __init__(self, matrix, mass_diag, name=None, nodes=None):
        matrix = sparse.csr_matrix(matrix)
        matrix = ((matrix + matrix.T) * 0.5).tocsr()
        matrix.sum_duplicates()
        matrix.sort_indices()

        mass_diag = num.asarray(mass_diag, dtype=float)
        if mass_diag.shape != (matrix.shape[0],):
            raise GridError('mass diagonal does not match matrix dimension')

        if num.any(mass_diag <= 0.0):
            raise GridError('mass diagonal must be strictly positive')

        self.matrix = matrix
        self.mass_diag = mass_diag
        self.name = name
        self.nodes = nodes

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def entries(self):
        return self.matrix

    def is_diagonal(self):
        return self.matrix.nnz == num.count_nonzero(self.matrix.diagonal())

    def quadratic_form(self, v):
        return float(v @ (self.matrix @ v))

    def symmetry_defect(self):
        diff = abs(self.matrix - self.matrix.T)
        if diff.nnz == 0:
            return 0.0

        return float(diff.max())

    def dense(self):
        return self.matrix.toarray()

    def dump(self, filename, comment=None):
        '''
        Write the matrix as 1-indexed coordinate triplets (Matrix Market).
        '''
        logger.info('Writing matrix %s to %s', self.name or '', filename)
        sio.mmwrite(
            filename, self.matrix.tocoo(),
            comment=comment or (self.name or ''),
            precision=17)


def difference_matrix(g1):
    '''
    Map from interior node values to slopes on the ``n + 1`` cells.
    '''
    n = g1.n
    inv = 1.0 / g1.spacing
    return sparse.diags(
        [inv[:n], -inv[1:]], [0, -1], shape=(n + 1, n), format='csr')


def averaging_matrix(g1):
    n = g1.n
    half = num.full(n, 0.5)
    return sparse.diags(
        [half, half], [0, -1], shape=(n + 1, n), format='csr')


def central_difference_matrix(g1):
    n = g1.n
    c = 1.0 / (g1.spacing[:-1] + g1.spacing[1:])
    return sparse.diags(
        [c[:-1], -c[1:]], [1, -1], shape=(n, n), format='csr')


def stiffness_1d(g1):
    G = difference_matrix(g1)
    return G.T @ (sparse.diags(g1.spacing) @ G)


def _sheared_gradient(g, sigma_edges):
    # (d_x - sigma d_z) sampled on the x-cells, z-derivative averaged onto
    # the cell from the two neighbouring x-nodes
    Iz = sparse.identity(g.n_z, format='csr')
    Dx = sparse.kron(difference_matrix(g.gx), Iz, format='csr')
    if not num.any(sigma_edges):
        return Dx

    Dz = sparse.kron(
        averaging_matrix(g.gx), central_difference_matrix(g.gz),
        format='csr')

    S = sparse.kron(sparse.diags(sigma_edges), Iz, format='csr')
    return Dx - S @ Dz


def _sheared_form(g, sigma_edges):
    D = _sheared_gradient(g, sigma_edges)
    W = sparse.kron(
        sparse.diags(g.gx.spacing), sparse.diags(g.gz.mass), format='csr')

    return D.T @ (W @ D)


def _transverse_form(g):
    Ix = sparse.diags(g.gx.mass)
    return sparse.kron(Ix, stiffness_1d(g.gz), format='csr')


def assemble_H(g, p):
    '''
    Dirichlet Laplacian of the sheared strip in straightened coordinates.

    Quadratic form ``||d_x v - f' d_z v||^2 + ||d_z v||^2``.
    '''
    p.check()
    sigma = p.fprime(g.gx.midpoints)
    A = _sheared_form(g, sigma) + _transverse_form(g)
    return SparseSymmetricOperator(A, g.mass, name='H')


def assemble_rho_mass(g):
    rho2 = geometry.weight_rho(g.gx.nodes)**2
    w = num.kron(rho2, num.ones(g.n_z)) * g.mass
    return SparseSymmetricOperator(
        sparse.diags(w, format='csr'), g.mass, name='rho_mass')


def assemble_transverse_excess(g, E1_mode='discrete'):
    '''
    Form ``||d_z v||^2 - E_1 ||v||^2``, positive semidefinite for the
    discrete ``E_1``.
    '''
    if E1_mode not in E1Mode.choices:
        raise GridError('unknown E1 mode: %s' % E1_mode)
    if E1_mode == 'discrete':
        e1 = g.e1_discrete
    else:
        e1 = geometry.transverse_eigenvalue(g.d, 1)

    return _transverse_form(g) - e1 * sparse.diags(g.mass, format='csr')


def resolves_sigma(gx, p, s):
    '''
    Check that ``e^{s/2} f'(e^{s/2} y)`` has enough cells across its
    support.
    '''
    if p.is_straight:
        return True

    c = p.half_width * math.exp(-0.5 * s)
    xf = gx.full_nodes
    hit = num.logical_and(xf[:-1] < c, xf[1:] > -c)
    if not num.any(hit):
        return False

    return num.max(gx.spacing[hit]) <= 2.0 * c / ncells_sigma_min


def s_max_admissible(g, p, s_hi=60.0):
    '''
    Largest self-similar time the y-grid resolves for profile ``p``.
    '''
    if p.is_straight:
        return float('inf')

    gx = g.gx if isinstance(g, Grid2D) else g
    s_lo = -s_hi
    if not resolves_sigma(gx, p, s_lo):
        return float('-inf')

    if resolves_sigma(gx, p, s_hi):
        return s_hi

    for _ in range(100):
        s_mid = 0.5 * (s_lo + s_hi)
        if s_hi - s_lo < 1e-12:
            break

        if resolves_sigma(gx, p, s_mid):
            s_lo = s_mid
        else:
            s_hi = s_mid

    return s_lo


def assemble_Ts(g, p, s, E1_mode='discrete'):
    '''
    Self-similar operator at time ``s`` in the unweighted picture.

    Quadratic form ``||d_y v - sigma_s d_z v||^2 + ||y v||^2 / 16 +
    e^s (||d_z v||^2 - E_1 ||v||^2)`` with ``sigma_s(y) = e^{s/2}
    f'(e^{s/2} y)``.
    '''
    p.check()
    if s < 0.0:
        raise GridError('self-similar time must be >= 0, got %g' % s)

    if not resolves_sigma(g.gx, p, s):
        raise UnderresolvedError(s, s_max_admissible(g, p))

    es2 = math.exp(0.5 * s)
    sigma = es2 * p.fprime(es2 * g.gx.midpoints)

    y = g.gx.nodes
    mass = g.mass
    potential = num.kron(y**2 / 16.0, num.ones(g.n_z)) * mass

    A = _sheared_form(g, sigma) \
        + sparse.diags(potential, format='csr') \
        + math.exp(s) * assemble_transverse_excess(g, E1_mode)

    return SparseSymmetricOperator(A, mass, name='T_s(s=%g)' % s)


def assemble_oscillator(gx, dirichlet_at_zero=False):
    '''
    Harmonic oscillator ``-d^2/dy^2 + y^2/16`` on a one-dimensional grid,
    optionally with an extra Dirichlet condition at ``y = 0``.
    '''
    y = gx.nodes
    mass = gx.mass
    A = stiffness_1d(gx) + sparse.diags(y**2 / 16.0 * mass)

    if dirichlet_at_zero:
        if gx.izero is None:
            raise GridError(
                'Dirichlet condition at zero needs a grid node at y=0')

        keep = num.arange(gx.n) != gx.izero
        A = sparse.csr_matrix(A)[keep][:, keep]
        mass = mass[keep]
        y = y[keep]

    return SparseSymmetricOperator(
        A, mass,
        name='l_D' if dirichlet_at_zero else 'l',
        nodes=y)


__all__ = '''
    GridGrading
    GridBoundary
    E1Mode
    Grid1D
    Grid2D
    build_grid1d
    build_grid2d
    SparseSymmetricOperator
    difference_matrix
    averaging_matrix
    central_difference_matrix
    stiffness_1d
    assemble_H
    assemble_rho_mass
    assemble_transverse_excess
    resolves_sigma
    s_max_admissible
    assemble_Ts
    assemble_oscillator
'''.split()

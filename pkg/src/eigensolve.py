'''
Smallest eigenpairs of symmetric pencils ``(A, B)`` with diagonal ``B``.

The solver is a block shift-invert subspace iteration. Each outer step solves
``(A - shift B) Y = B X`` with a preconditioned conjugate gradient method (or a
sparse LU factorization), B-orthonormalizes the block, and extracts Ritz pairs
by a dense Rayleigh-Ritz step. Converged pairs are locked and deflated
B-orthogonally from the remaining block.
'''

import math
import logging

import numpy as num
from scipy import sparse, linalg
from scipy.sparse import linalg as splinalg

from pyrocko import parimap
from pyrocko.guts import Object, Float, Int, Bool, String, StringChoice, List
from pyrocko.guts_array import Array

from .meta import ConvergenceError, LinearSolveError, MuCurveError, \
    ShearStripError
from .discretize import SparseSymmetricOperator, assemble_Ts, assemble_H, \
    assemble_rho_mass, assemble_oscillator, s_max_admissible

guts_prefix = 'shearstrip'

logger = logging.getLogger('shearstrip.eigensolve')


class LinearSolverChoice(StringChoice):
    choices = ['cg', 'splu']


class EigenResult(Object):
    value = Float.T()
    vector = Array.T(
        shape=(None,), dtype=float, serialize_as='base64', optional=True)
    residual = Float.T(
        help='``||A v - value B v||`` in the ``B^-1`` norm, ``v`` B-normalized')
    iterations = Int.T()
    converged = Bool.T()


class MuCurve(Object):
    s_values = Array.T(shape=(None,), dtype=float, serialize_as='list')
    mu_values = Array.T(shape=(None,), dtype=float, serialize_as='list')
    residuals = Array.T(shape=(None,), dtype=float, serialize_as='list')
    iterations = List.T(Int.T())
    s_max_admissible = Float.T()
    grid_id = String.T()
    profile_id = String.T(default='')

    def monotonicity_violations(self, slack):
        '''
        Indices ``i`` with ``mu[i+1] < mu[i] - slack``.
        '''
        drops = self.mu_values[:-1] - self.mu_values[1:]
        return [int(i) for i in num.nonzero(drops > slack)[0]]

    def iter_rows(self):
        for s, mu, res, niter in zip(
                self.s_values, self.mu_values, self.residuals,
                self.iterations):

            yield s, mu, res, niter, self.grid_id


class LinearSolver(object):
    '''
    Solver for a fixed symmetric positive definite sparse matrix.
    '''

    def __init__(self, matrix, method='cg', tolerance=1e-10,
                 max_iterations=None):

        self.matrix = sparse.csr_matrix(matrix)
        self.method = method
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.niterations = 0

        if method == 'cg':
            diag = self.matrix.diagonal()
            if num.any(diag <= 0.0):
                raise LinearSolveError(
                    'matrix has nonpositive diagonal entries, cannot use '
                    'Jacobi preconditioning')

            self._precond = sparse.diags(1.0 / diag)

        elif method == 'splu':
            try:
                self._lu_solve = splinalg.factorized(self.matrix.tocsc())
            except RuntimeError as e:
                raise LinearSolveError('factorization failed: %s' % e)

        else:
            raise LinearSolveError('unknown linear solver: %s' % method)

    def solve(self, rhs, x0=None):
        if self.method == 'splu':
            return self._lu_solve(rhs)

        counter = [0]

        def callback(xk):
            counter[0] += 1

        x, info = splinalg.cg(
            self.matrix, rhs, x0=x0,
            rtol=self.tolerance, atol=0.0,
            maxiter=self.max_iterations,
            M=self._precond,
            callback=callback)

        self.niterations += counter[0]

        if info != 0:
            raise LinearSolveError(
                'conjugate gradient not converged after %i iterations '
                '(info=%i)' % (counter[0], info))

        return x


def _mass_diagonal(n, B):
    if B is None:
        return num.ones(n)

    if isinstance(B, SparseSymmetricOperator):
        if not B.is_diagonal():
            raise ShearStripError('mass operator is not diagonal')

        b = B.matrix.diagonal()
    elif sparse.issparse(B):
        b = B.diagonal()
    else:
        b = num.asarray(B, dtype=float)

    if b.shape != (n,):
        raise ShearStripError('mass does not match operator dimension')

    if num.any(b <= 0.0):
        raise ShearStripError('mass must be strictly positive')

    return b


def _b_orthonormalize(Y, sqrtb, locked=None, b=None):
    for _ in range(2):
        if locked is not None and locked.shape[1]:
            Y = Y - locked @ (locked.T @ (b[:, num.newaxis] * Y))

        Q, _ = num.linalg.qr(sqrtb[:, num.newaxis] * Y)
        Y = Q / sqrtb[:, num.newaxis]

    return Y


def residual_norms(matrix, b, values, vectors):
    '''
    ``||A v - lambda B v||`` measured in the ``B^-1`` norm, per column.
    '''
    R = matrix @ vectors - (b[:, num.newaxis] * vectors) * values
    return num.sqrt(num.sum(R**2 / b[:, num.newaxis], axis=0))


def smallest_eigs(A, B=None, k=1, tolerance=1e-8, max_iterations=500,
                  shift=0.0, seed=123, inner_tolerance=1e-10,
                  linear_solver='cg', nguard=2):
    '''
    Compute the ``k`` smallest eigenpairs of the pencil ``(A, B)``.

    :param A: :py:class:`SparseSymmetricOperator` or sparse matrix
    :param B: diagonal mass as array, sparse diagonal matrix or diagonal
        :py:class:`SparseSymmetricOperator`. ``None`` for the identity.
    :param tolerance: acceptance threshold, a pair is converged when its
        residual is ``<= tolerance * |value| + tolerance``
    :param shift: shift below the wanted eigenvalues, ``A - shift B`` must be
        positive definite
    :param seed: seed of the random start block
    :returns: list of :py:class:`EigenResult`, ascending
    '''

    if isinstance(A, SparseSymmetricOperator):
        matrix = A.matrix
    else:
        matrix = sparse.csr_matrix(A)

    n = matrix.shape[0]
    b = _mass_diagonal(n, B)

    if not 1 <= k <= n:
        raise ShearStripError(
            'number of wanted eigenpairs must be in [1, %i], got %i' % (n, k))

    if shift != 0.0:
        shifted = (matrix - shift * sparse.diags(b)).tocsr()
    else:
        shifted = matrix

    solver = LinearSolver(
        shifted, method=linear_solver, tolerance=inner_tolerance,
        max_iterations=max(1000, 10 * n))

    sqrtb = num.sqrt(b)
    rstate = num.random.RandomState(seed)
    X = _b_orthonormalize(
        rstate.standard_normal((n, min(k + nguard, n))), sqrtb)

    theta = None
    locked = num.zeros((n, 0))
    locked_iterations = []
    best_residual = num.inf

    for iiter in range(1, max_iterations + 1):
        Y = num.empty_like(X)
        for j in range(X.shape[1]):
            x0 = None
            if theta is not None and theta[j] - shift > 0.0:
                x0 = X[:, j] / (theta[j] - shift)

            Y[:, j] = solver.solve(b * X[:, j], x0=x0)

        Q = _b_orthonormalize(Y, sqrtb, locked, b)
        AQ = matrix @ Q
        H = Q.T @ AQ
        theta, S = linalg.eigh(0.5 * (H + H.T))
        X = Q @ S
        residuals = residual_norms(matrix, b, theta, X)

        nwanted = k - locked.shape[1]
        nconv = 0
        while nconv < min(nwanted, X.shape[1]) and residuals[nconv] <= \
                tolerance * abs(theta[nconv]) + tolerance:
            nconv += 1

        logger.debug(
            'iteration %i: theta[0]=%.12g, residual[0]=%g, locked %i/%i',
            iiter, theta[0], residuals[0], locked.shape[1] + nconv, k)

        if nconv:
            locked = num.hstack([locked, X[:, :nconv]])
            locked_iterations.extend([iiter] * nconv)
            nkeep = min(k - locked.shape[1] + nguard, n - locked.shape[1])
            X = X[:, nconv:nconv + nkeep]
            theta = theta[nconv:nconv + nkeep]

        if locked.shape[1] >= k:
            break

        if nconv < residuals.size:
            best_residual = min(best_residual, residuals[nconv])

    else:
        raise ConvergenceError(
            'eigensolver did not converge %i of %i pairs' % (
                k - locked.shape[1], k),
            best_residual, max_iterations)

    logger.debug(
        'eigensolver finished after %i iterations, %i inner iterations',
        locked_iterations[-1], solver.niterations)

    return _certify(
        matrix, b, locked, locked_iterations, tolerance)


def _certify(matrix, b, vectors, iterations, tolerance):
    results = []
    for j in range(vectors.shape[1]):
        v = vectors[:, j]
        v = v / math.sqrt(num.sum(b * v**2))
        imax = num.argmax(num.abs(v))
        if v[imax] < 0.0:
            v = -v

        value = float(v @ (matrix @ v))
        residual = float(residual_norms(
            matrix, b, num.array([value]), v[:, num.newaxis])[0])

        results.append(EigenResult(
            value=value,
            vector=v,
            residual=residual,
            iterations=iterations[j],
            converged=bool(
                residual <= tolerance * abs(value) + tolerance)))

    results.sort(key=lambda r: r.value)
    return results


def smallest_eig(A, B=None, tolerance=1e-8, max_iterations=500, **kwargs):
    '''
    Smallest eigenpair of the pencil ``(A, B)``.

    See :py:func:`smallest_eigs` for the keyword arguments.
    '''
    return smallest_eigs(
        A, B, k=1, tolerance=tolerance, max_iterations=max_iterations,
        **kwargs)[0]


def mu(g, p, s, E1_mode='discrete', **kwargs):
    '''
    Lowest eigenvalue of the self-similar operator at time ``s``.

    With ``E1_mode='discrete'`` the transverse shift uses the eigenvalue of
    the discrete transverse operator, so that the straight strip gives
    exactly 1/4 up to the solver tolerance.
    '''
    T = assemble_Ts(g, p, s, E1_mode=E1_mode)
    result = smallest_eig(T, T.mass_diag, **kwargs)
    logger.info(
        'mu(s=%g) = %.10f (residual %.3g, %i iterations)',
        s, result.value, result.residual, result.iterations)

    return result


def _mu_worker(g, p, s, kwargs):
    try:
        return mu(g, p, s, **kwargs)
    except ShearStripError as e:
        return e


def mu_curve(g, p, s_list, nparallel=1, **kwargs):
    '''
    Evaluate :py:func:`mu` for each ``s`` in the ascending ``s_list``.

    If a single solve fails, :py:exc:`MuCurveError` is raised, carrying the
    curve of the leading points which succeeded.
    '''
    s_values = num.asarray(s_list, dtype=float)
    if s_values.size == 0:
        raise MuCurveError('empty list of s values', partial=None)

    if num.any(num.diff(s_values) <= 0.0):
        raise MuCurveError('s values must be strictly ascending', partial=None)

    s_max = s_max_admissible(g, p)

    def make_curve(results):
        return MuCurve(
            s_values=s_values[:len(results)],
            mu_values=num.array([r.value for r in results]),
            residuals=num.array([r.residual for r in results]),
            iterations=[r.iterations for r in results],
            s_max_admissible=s_max,
            grid_id=g.describe(),
            profile_id=p.kind)

    if s_values[-1] > s_max:
        raise MuCurveError(
            's=%g exceeds the maximal admissible s=%g for grid %s' % (
                s_values[-1], s_max, g.describe()),
            partial=make_curve([]))

    results = []
    for s, result in zip(s_values, parimap.parimap(
            _mu_worker,
            [g] * s_values.size,
            [p] * s_values.size,
            s_values,
            [kwargs] * s_values.size,
            nprocs=nparallel)):

        if isinstance(result, ShearStripError):
            raise MuCurveError(
                'mu(s=%g) failed: %s; partial curve holds %i points' % (
                    s, result, len(results)),
                partial=make_curve(results))

        results.append(result)

    return make_curve(results)


def hardy_constant(g, p, **kwargs):
    '''
    Largest ``c`` with ``H - E_1 >= c rho^2`` on the truncated grid.
    '''
    H = assemble_H(g, p)
    A = H.matrix - g.e1_discrete * sparse.diags(H.mass_diag)
    R = assemble_rho_mass(g)
    result = smallest_eig(A, R, **kwargs)
    logger.info(
        'c_H(X=%g) = %.10g (residual %.3g, %i iterations)',
        g.X, result.value, result.residual, result.iterations)

    return result


def _positive_side_mass(op, result):
    b = op.mass_diag
    v = result.vector
    return float(num.sum((b * v**2)[op.nodes > 0.0]))


def oscillator_levels(gx, dirichlet_at_zero=False, k=3, **kwargs):
    '''
    The ``k`` lowest levels of the harmonic oscillator on ``gx``.

    Levels agreeing within ten times the tolerance are treated as a
    degenerate cluster, inside which the vector carrying more mass on
    ``y > 0`` comes first.
    '''
    if k < 1:
        raise ShearStripError('need k >= 1, got %i' % k)

    op = assemble_oscillator(gx, dirichlet_at_zero)
    results = smallest_eigs(op, op.mass_diag, k=k, **kwargs)

    tolerance = kwargs.get('tolerance', 1e-8)
    ordered = []
    cluster = []
    for result in results:
        if cluster and result.value - cluster[0].value > \
                10. * tolerance * (1.0 + abs(cluster[0].value)):

            ordered.extend(cluster)
            cluster = []

        cluster.append(result)
        cluster.sort(key=lambda r: -_positive_side_mass(op, r))

    ordered.extend(cluster)
    return ordered


def dense_smallest_eigs(A, B=None, k=1):
    '''
    Reference solution by a dense symmetric eigensolver.
    '''
    if isinstance(A, SparseSymmetricOperator):
        matrix = A.matrix
    else:
        matrix = sparse.csr_matrix(A)

    n = matrix.shape[0]
    b = _mass_diagonal(n, B)
    return linalg.eigh(
        matrix.toarray(), num.diag(b), eigvals_only=True,
        subset_by_index=[0, k - 1])


__all__ = '''
    LinearSolverChoice
    EigenResult
    MuCurve
    LinearSolver
    residual_norms
    smallest_eigs
    smallest_eig
    mu
    mu_curve
    hardy_constant
    oscillator_levels
    dense_smallest_eigs
'''.split()

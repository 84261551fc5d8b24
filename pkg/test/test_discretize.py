import math
import os.path as op
import tempfile

import numpy as num
from numpy.testing import assert_almost_equal as assert_ae, assert_raises, \
    assert_allclose
from scipy import linalg, io as sio

from shearstrip import discretize as ds
from shearstrip.geometry import Profile, weight_rho
from shearstrip.meta import GridError, UnderresolvedError

straight = Profile(kind='straight')
sheared = Profile(kind='smooth_bump', amplitude=1.0, half_width=1.0)


def dense_eigvals(op):
    return linalg.eigh(
        op.dense(), num.diag(op.mass_diag), eigvals_only=True)


def test_build_grid2d_uniform():
    g = ds.build_grid2d(8.0, 400, 40, d=math.pi)
    assert g.n_x == 400
    assert g.n_z == 40
    assert g.size == 16000
    assert_allclose(g.gx.spacing, 16.0 / 401., rtol=1e-14)
    assert_allclose(g.gz.spacing, math.pi / 41., rtol=1e-14)
    assert_ae(num.sum(g.gx.spacing), 16.0, 12)
    assert g.describe() == 'X8-nx400-nz40'


def test_build_grid2d_odd_has_node_at_zero():
    g = ds.build_grid2d(4.0, 39, 5, d=math.pi)
    assert g.gx.is_uniform
    assert g.gx.nodes[g.gx.izero] == 0.0
    assert g.gx.boundary == 'dirichlet_plus_interior_node_at_zero'


def test_build_grid1d_geometric():
    g = ds.build_grid1d(
        -8.0, 8.0, 101, grading='geometric_toward_zero', ratio=0.97)

    assert g.n == 101
    assert g.nodes[g.izero] == 0.0
    assert_ae(num.sum(g.spacing), 16.0, 12)

    left = g.spacing[:g.izero + 1]
    right = g.spacing[g.izero + 1:]
    assert num.all(num.diff(left) < 0.0)
    assert num.all(num.diff(right) > 0.0)
    assert_allclose(right[1:] / right[:-1], 1.0 / 0.97, rtol=1e-12)
    assert num.all(num.diff(g.full_nodes) > 0.0)

    g2 = ds.build_grid2d(
        8.0, 599, 12, grading='geometric_toward_zero', ratio=0.993)
    assert g2.describe() == 'X8-nx599-nz12-geom0.993'


def test_build_grid_errors():
    assert_raises(GridError, ds.build_grid2d, 8.0, 3, 10)
    assert_raises(GridError, ds.build_grid2d, 8.0, 10, 3)
    assert_raises(GridError, ds.build_grid2d, -1.0, 10, 10)
    assert_raises(
        GridError, ds.build_grid2d, 8.0, 10, 10, math.pi,
        'geometric_toward_zero', 1.5)
    assert_raises(
        GridError, ds.build_grid2d, 8.0, 10, 10, math.pi,
        'geometric_toward_zero', 0.0)
    assert_raises(GridError, ds.build_grid1d, -1., 1., 10, 'chebyshev')
    assert_raises(GridError, ds.build_grid1d, 1., 2., 10, node_at_zero=True)
    assert_raises(GridError, ds.build_grid1d, 0., 1., 1)


def test_dirichlet_eigenvalues():
    g = ds.build_grid1d(0.0, math.pi, 20)
    vals = dense_eigvals(ds.SparseSymmetricOperator(
        ds.stiffness_1d(g), g.mass))

    assert_allclose(vals, g.dirichlet_eigenvalues(), rtol=1e-12)

    g = ds.build_grid1d(
        -1.0, 1.0, 10, grading='geometric_toward_zero', ratio=0.9)
    assert_raises(GridError, g.dirichlet_eigenvalues)


def test_assemble_H_symmetric():
    g = ds.build_grid2d(
        4.0, 41, 7, grading='geometric_toward_zero', ratio=0.95)

    for p in [straight, sheared, Profile(kind='tent', amplitude=-2.0)]:
        H = ds.assemble_H(g, p)
        assert H.dimension == g.size
        assert H.symmetry_defect() == 0.0
        assert num.all(H.mass_diag > 0.0)


def test_straight_tensor_sum():
    g = ds.build_grid2d(8.0, 30, 10, d=math.pi)
    vals = dense_eigvals(ds.assemble_H(g, straight))
    expected = num.sort(num.add.outer(
        g.gx.dirichlet_eigenvalues(), g.gz.dirichlet_eigenvalues()).ravel())

    assert num.max(num.abs(vals - expected)) <= 1e-10


def test_H_minus_E1_semidefinite():
    for p in [sheared, Profile(kind='tent', amplitude=1.5)]:
        g = ds.build_grid2d(3.0, 29, 6)
        H = ds.assemble_H(g, p)
        vals = linalg.eigh(
            H.dense() - g.e1_discrete * num.diag(H.mass_diag),
            num.diag(H.mass_diag), eigvals_only=True)

        assert vals[0] >= -1e-10


def test_assemble_rho_mass():
    g = ds.build_grid2d(2.0, 7, 4)
    R = ds.assemble_rho_mass(g)
    assert R.is_diagonal()

    w = R.matrix.diagonal()
    X, Z = g.meshgrid()
    assert_allclose(w / g.mass, weight_rho(X.ravel())**2, rtol=1e-14)
    assert num.all(w > 0.0)
    assert num.all(w <= g.mass)

    # nodes at -1.5 -1.0 ... 1.5
    izero = g.gx.izero
    assert_allclose(w[izero * g.n_z:(izero + 1) * g.n_z],
                    g.mass[izero * g.n_z:(izero + 1) * g.n_z], rtol=1e-15)
    ione = izero + 2
    assert g.gx.nodes[ione] == 1.0
    assert_allclose(w[ione * g.n_z:(ione + 1) * g.n_z],
                    0.5 * g.mass[ione * g.n_z:(ione + 1) * g.n_z],
                    rtol=1e-14)


def test_assemble_Ts_straight_separates():
    g = ds.build_grid2d(6.0, 41, 5)
    l_vals = dense_eigvals(ds.assemble_oscillator(g.gx))

    for s in [0.0, 1.0, 3.0]:
        T = ds.assemble_Ts(g, straight, s)
        assert T.symmetry_defect() == 0.0
        assert abs(dense_eigvals(T)[0] - l_vals[0]) <= 1e-10


def test_assemble_Ts_at_zero():
    g = ds.build_grid2d(4.0, 39, 5)
    T = ds.assemble_Ts(g, sheared, 0.0)
    H = ds.assemble_H(g, sheared)

    y = num.kron(g.gx.nodes, num.ones(g.n_z))
    expected = H.dense() \
        - g.e1_discrete * num.diag(g.mass) \
        + num.diag(y**2 / 16.0 * g.mass)

    assert num.max(num.abs(T.dense() - expected)) <= 1e-12


def test_transverse_excess_semidefinite():
    g = ds.build_grid2d(
        4.0, 31, 8, grading='geometric_toward_zero', ratio=0.95)

    A = ds.assemble_transverse_excess(g, 'discrete')
    rstate = num.random.RandomState(42)
    for _ in range(200):
        v = rstate.standard_normal(g.size)
        assert v @ (A @ v) >= -1e-10 * (v @ v)

    # continuous E_1 exceeds the discrete one, so the lowest transverse
    # mode acquires negative energy
    A = ds.assemble_transverse_excess(g, 'continuous')
    X, Z = g.meshgrid()
    v = (num.exp(-X**2) * num.sin(Z)).ravel()
    assert v @ (A @ v) < 0.0

    assert_raises(GridError, ds.assemble_transverse_excess, g, 'exact')


def test_sigma_resolution():
    g = ds.build_grid2d(8.0, 39, 5)
    assert ds.s_max_admissible(g, straight) == float('inf')
    assert ds.resolves_sigma(g.gx, straight, 100.0)

    s_max = ds.s_max_admissible(g, sheared)
    assert s_max < 0.0
    assert_ae(s_max, 2.0 * math.log(0.25 / 0.4), 6)

    try:
        ds.assemble_Ts(g, sheared, 0.0)
        assert False

    except UnderresolvedError as e:
        assert e.s == 0.0
        assert e.s_max == s_max
        assert str(e).startswith('sigma underresolved at s=0')

    g = ds.build_grid2d(
        8.0, 599, 6, grading='geometric_toward_zero', ratio=0.993)
    s_max = ds.s_max_admissible(g, sheared)
    assert 6.0 < s_max < 8.0
    assert ds.resolves_sigma(g.gx, sheared, s_max)
    assert not ds.resolves_sigma(g.gx, sheared, s_max + 1e-6)

    assert_raises(GridError, ds.assemble_Ts, g, sheared, -1.0)


def test_assemble_oscillator():
    gx = ds.build_grid1d(-8.0, 8.0, 319, node_at_zero=True)
    vals = dense_eigvals(ds.assemble_oscillator(gx))
    assert_allclose(vals[:3], [0.25, 0.75, 1.25], atol=1e-3)

    lD = ds.assemble_oscillator(gx, dirichlet_at_zero=True)
    assert lD.dimension == gx.n - 1
    assert not num.any(lD.nodes == 0.0)
    vals = dense_eigvals(lD)
    assert_allclose(vals[:2], [0.75, 0.75], atol=1e-3)
    assert abs(vals[0] - vals[1]) < 1e-10

    gx = ds.build_grid1d(-4.0, 4.0, 20)
    assert gx.izero is None
    assert_raises(GridError, ds.assemble_oscillator, gx, True)


def test_operator_checks_and_dump():
    g = ds.build_grid2d(2.0, 5, 4)
    H = ds.assemble_H(g, sheared)
    assert_raises(GridError, ds.SparseSymmetricOperator, H.matrix,
                  H.mass_diag[:-1])
    assert_raises(GridError, ds.SparseSymmetricOperator, H.matrix,
                  -H.mass_diag)

    v = num.linspace(-1.0, 1.0, g.size)
    assert_ae(H.quadratic_form(v), v @ (H.dense() @ v), 12)

    with tempfile.TemporaryDirectory(prefix='shearstrip') as dirname:
        fn = op.join(dirname, 'H.mtx')
        H.dump(fn)
        M = sio.mmread(fn)

    assert M.shape == (g.size, g.size)
    assert num.max(num.abs(M.toarray() - H.dense())) == 0.0

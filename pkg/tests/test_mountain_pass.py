"""Mountain-pass second solution above the minimal one.

I(v) = 1/2 v' S_U v - int G(x, v+) with the closed-form primitive G;
its gradient must match finite differences, the returned increment must
solve the increment equation, and U + v must dominate U strictly.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from robinlab import (
    Interval,
    MountainPassError,
    ProblemSpec,
    Rectangle,
    ScalarField,
    assemble_robin,
    constant_field,
    make_grid,
    monotone_iterate,
    mountain_pass_solution,
    newton_refine,
    pass_functional,
    pass_gradient,
    stationary_residual,
    symmetrized,
)

BETA = 2.425  # roughly twice the critical value for p = 2, f = 1 on (0,1)


@pytest.fixture(scope="module")
def setup_1d():
    g = make_grid(Interval(0.0, 1.0), 64)
    spec = ProblemSpec(g, 2.0, BETA, constant_field(g, 1.0))
    U = newton_refine(spec, monotone_iterate(spec).solution).solution
    SU = symmetrized(assemble_robin(g, BETA)) - sp.diags(
        g.quad_weights * 2.0 * U.values
    )
    SU = ((SU + SU.T) * 0.5).tocsr()
    return g, spec, U, SU


def test_primitive_matches_quadrature_of_density(setup_1d):
    # G(x, v) must equal the t-integral of g(x, t) = (U+t)^p - U^p - p U^{p-1} t
    g, spec, U, SU = setup_1d
    rng = np.random.default_rng(4)
    from robinlab.elliptic import _G_closed, _g

    for _ in range(5):
        v = rng.uniform(0.0, 3.0, g.node_count)
        ts = np.linspace(0.0, 1.0, 2001)[None, :] * v[:, None]
        dens = _g(U.values[:, None], ts, spec.p)
        quad = np.trapezoid(dens, ts, axis=1)
        closed = _G_closed(U.values, v, spec.p)
        assert np.abs(closed - quad).max() < 1e-6 * (1.0 + np.abs(closed).max())


def test_gradient_matches_finite_differences(setup_1d):
    g, spec, U, SU = setup_1d
    rng = np.random.default_rng(7)
    for _ in range(10):
        v = rng.uniform(-1.0, 2.0, g.node_count)
        d = rng.standard_normal(g.node_count)
        gr = pass_gradient(spec, U, SU, v) @ d
        eps = 1e-6
        fd = (
            pass_functional(spec, U, SU, v + eps * d)
            - pass_functional(spec, U, SU, v - eps * d)
        ) / (2.0 * eps)
        assert abs(gr - fd) <= 1e-5 * max(1.0, abs(fd))


def test_second_solution_contracts(setup_1d):
    g, spec, U, SU = setup_1d
    mp = mountain_pass_solution(spec, U)
    scale = 1.0 + float(np.abs(mp.u.values**2 + 1.0).max())
    assert mp.pass_value > 0.0
    assert mp.residual_inf <= 1e-12 * scale
    assert np.abs(stationary_residual(spec, mp.u)).max() <= 1e-12 * scale
    interior = ~g.boundary_mask
    assert (mp.u.values - U.values)[interior].min() > 0.0
    assert mp.v_descent is not None
    # the descent answer is already close to the polished one
    assert np.abs(mp.v_descent.values - mp.v.values).max() < 1e-3 * mp.v.values.max()


def test_pass_level_is_a_ray_maximum(setup_1d):
    # along t -> t*v the functional peaks near t = 1 at the critical point
    g, spec, U, SU = setup_1d
    mp = mountain_pass_solution(spec, U)
    I1 = pass_functional(spec, U, SU, mp.v.values)
    for t in (0.5, 0.8, 1.2, 2.0):
        assert pass_functional(spec, U, SU, t * mp.v.values) <= I1 + 1e-9


def test_rejects_subcritical_beta():
    g = make_grid(Interval(0.0, 1.0), 48)
    spec = ProblemSpec(g, 2.0, 0.5, constant_field(g, 1.0))
    # no minimal solution exists; hand the search a fake base state
    with pytest.raises(MountainPassError):
        mountain_pass_solution(spec, constant_field(g, 3.0))


def test_homogeneous_positive_state():
    # f = 0: the pass search from U = 0 finds the positive steady state
    g = make_grid(Interval(0.0, 1.0), 64)
    spec = ProblemSpec(g, 2.0, 1.0, constant_field(g, 0.0))
    mp = mountain_pass_solution(spec, constant_field(g, 0.0))
    scale = 1.0 + float(np.abs(mp.u.values**2).max())
    assert np.abs(stationary_residual(spec, mp.u)).max() <= 1e-12 * scale
    assert mp.u.values.min() > 0.0


def test_second_solution_2d():
    g = make_grid(Rectangle(0.0, 1.0, 0.0, 1.0), 20)
    spec = ProblemSpec(g, 2.0, 8.0, constant_field(g, 1.0))
    rep = monotone_iterate(spec)
    assert rep.status == "Converged"
    U = newton_refine(spec, rep.solution).solution
    mp = mountain_pass_solution(spec, U)
    scale = 1.0 + float(np.abs(mp.u.values**2 + 1.0).max())
    assert np.abs(stationary_residual(spec, mp.u)).max() <= 1e-11 * scale
    interior = ~g.boundary_mask
    assert (mp.u.values - U.values)[interior].min() > 0.0

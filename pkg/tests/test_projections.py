"""Face and volume L2 projections and the flux-matching element projection.

The flux-matching projection of a (vector, scalar) pair is defined by three
groups of equations: moments of each component against the degree-(k-1)
space, plus face moments of (vector . n - tau scalar) against the full
degree-k face space.  The tests check those defining equations directly
(not just the solver residual) and the exact reproduction of polynomials.
"""

import numpy as np
import pytest

from hdgwave.local_solver import Assembler, ModelParams, build_element_tables
from hdgwave.mesh import build_structured_coupled
from hdgwave.projections import (
    face_rule,
    project_acoustic,
    project_elastic,
    project_face_scalar,
    project_face_vector,
    project_spin,
    project_volume_scalar,
)
from hdgwave.quadbasis import build_reference_basis

S = 2.0 - 1.0j
PARAMS = ModelParams.from_young_poisson(1.0, 0.3, s=S)


def smooth_v(p):
    return np.sin(1.3 * p[:, 0]) * np.cos(0.7 * p[:, 1]) + 0.2 * p[:, 0]


def smooth_q(p):
    return np.stack(
        [np.cos(p[:, 0]) * np.sin(p[:, 1]), np.exp(0.3 * p[:, 0] - 0.2 * p[:, 1])],
        axis=1,
    )


def smooth_sigma(p):
    out = np.empty((len(p), 2, 2))
    out[:, 0, 0] = np.sin(p[:, 0] + 0.5 * p[:, 1])
    out[:, 0, 1] = np.cos(0.4 * p[:, 0]) * p[:, 1]
    out[:, 1, 0] = 0.3 * p[:, 0] ** 2 - p[:, 1]
    out[:, 1, 1] = np.cos(p[:, 1])
    return out


def smooth_u(p):
    return np.stack(
        [np.sin(0.8 * p[:, 0]) + 0.1 * p[:, 1] ** 2, np.cos(1.1 * p[:, 1]) * p[:, 0]],
        axis=1,
    )


# -- face projection P_M ---------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_face_projection_reproduces_polynomials(k):
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0))
    poly = lambda p: (0.3 + p[:, 0] - 0.5 * p[:, 1]) ** k

    for fid in (0, 3, 7):
        coef = project_face_scalar(mesh, fid, k, poly)
        fr = face_rule(mesh, fid, k)
        recon = fr.basis.T @ coef
        assert np.abs(recon - poly(fr.points)).max() < 1e-12


def test_face_projection_matches_least_squares_oracle():
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0))
    k, fid = 2, 5
    coef = project_face_scalar(mesh, fid, k, smooth_v)
    fr = face_rule(mesh, fid, k)
    # independent route: weighted least squares on a dense sampling
    w = np.sqrt(fr.weights)
    a = (fr.basis * w).T
    b = smooth_v(fr.points) * w
    ls, *_ = np.linalg.lstsq(a, b, rcond=None)
    assert np.abs(coef - ls).max() < 1e-12


def test_face_vector_projection_stacks_components():
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0))
    k, fid = 2, 4
    coef = project_face_vector(mesh, fid, k, smooth_q)
    cx = project_face_scalar(mesh, fid, k, lambda p: smooth_q(p)[:, 0])
    cy = project_face_scalar(mesh, fid, k, lambda p: smooth_q(p)[:, 1])
    assert np.abs(coef - np.concatenate([cx, cy])).max() < 1e-14


def test_face_projection_error_is_orthogonal_to_face_space():
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0))
    k, fid = 3, 2
    coef = project_face_scalar(mesh, fid, k, smooth_v)
    fr = face_rule(mesh, fid, k, degree=2 * k + 12)
    from hdgwave.quadbasis import edge_basis_values  # same dense nodes

    defect = smooth_v(fr.points) - fr.basis.T @ coef
    moments = (fr.basis * fr.weights) @ defect
    assert np.abs(moments).max() < 1e-13


# -- volume projection -----------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_volume_projection_reproduces_polynomials(k):
    mesh = build_structured_coupled(1, (0.0, 0.0, 1.0, 1.0))
    ref = build_reference_basis(k)
    tab = build_element_tables(mesh, 0, ref)
    poly = lambda p: (0.2 + 0.4 * p[:, 0] + 0.7 * p[:, 1]) ** k
    coef = project_volume_scalar(tab, poly)
    recon = tab.scalar.T @ coef
    assert np.abs(recon - poly(tab.points)).max() < 1e-12


def test_volume_projection_defect_orthogonal_to_space():
    mesh = build_structured_coupled(1, (0.0, 0.0, 1.0, 1.0))
    ref = build_reference_basis(2)
    tab = build_element_tables(mesh, 0, ref)
    coef = project_volume_scalar(tab, smooth_v)
    defect = smooth_v(tab.points) - tab.scalar.T @ coef
    moments = np.einsum("q,iq,q->i", tab.weights, tab.scalar, defect)
    assert np.abs(moments).max() < 1e-14


# -- flux-matching projections ---------------------------------------------


def coupled_tables(k):
    mesh = build_structured_coupled(1, (-2.0, -2.0, 2.0, 2.0), (-1.0, -1.0, 1.0, 1.0))
    asm = Assembler(mesh, k, PARAMS)
    tab_a = next(asm.tables(e) for e in range(mesh.n_elements)
                 if mesh.tri_domain[e] == "A")
    tab_e = next(asm.tables(e) for e in range(mesh.n_elements)
                 if mesh.tri_domain[e] == "E")
    return tab_a, tab_e


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("tau", [0.5, 1.0, 4.0])
def test_acoustic_projection_residual_and_defining_equations(k, tau):
    tab, _ = coupled_tables(k)
    proj = project_acoustic(tab, PARAMS, smooth_q, smooth_v, tau=tau)
    assert proj.residual < 1e-12

    n_k = tab.n_scalar
    n_km1 = n_k - (k + 1)
    w, sv = tab.weights, tab.scalar
    q_defect = smooth_q(tab.points) - np.stack(
        [sv.T @ proj.vec[:n_k], sv.T @ proj.vec[n_k:]], axis=1
    )
    v_defect = smooth_v(tab.points) - sv.T @ proj.scalar
    scale = max(1.0, np.abs(smooth_q(tab.points)).max())
    # moments against every degree-(k-1) function vanish
    for comp in range(2):
        m = np.einsum("q,iq,q->i", w, sv[:n_km1], q_defect[:, comp])
        assert np.abs(m).max() < 1e-12 * scale
    m = np.einsum("q,iq,q->i", w, sv[:n_km1], v_defect)
    assert np.abs(m).max() < 1e-12 * scale
    # face flux moments match against the full degree-k face space
    for ft in tab.faces:
        flux_exact = smooth_q(ft.points) @ ft.normal - tau * smooth_v(ft.points)
        q_h = np.stack(
            [ft.scalar.T @ proj.vec[:n_k], ft.scalar.T @ proj.vec[n_k:]], axis=1
        )
        flux_proj = q_h @ ft.normal - tau * (ft.scalar.T @ proj.scalar)
        m = np.einsum("p,mp,p->m", ft.weights, ft.trace, flux_exact - flux_proj)
        assert np.abs(m).max() < 1e-12 * scale


@pytest.mark.parametrize("k", [1, 2])
def test_elastic_projection_residual_and_row_structure(k):
    _, tab = coupled_tables(k)
    proj = project_elastic(tab, PARAMS, smooth_sigma, smooth_u)
    assert proj.residual < 1e-12
    # row r of the projected stress with component r of u solves the same
    # pair problem as the acoustic projection
    pair0 = project_acoustic(
        tab,
        PARAMS,
        lambda p: smooth_sigma(p)[:, 0, :],
        lambda p: smooth_u(p)[:, 0],
        tau=PARAMS.tau_e,
    )
    n_k = tab.n_scalar
    assert np.abs(proj.sigma[0, 0] - pair0.vec[:n_k]).max() < 1e-12
    assert np.abs(proj.sigma[0, 1] - pair0.vec[n_k:]).max() < 1e-12
    assert np.abs(proj.u[0] - pair0.scalar).max() < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_flux_matching_projection_reproduces_polynomials(k):
    tab, tab_e = coupled_tables(k)

    def poly_v(p):
        return (0.1 + 0.6 * p[:, 0] - 0.3 * p[:, 1]) ** k

    def poly_q(p):
        x, y = p[:, 0], p[:, 1]
        out = np.stack([(0.2 + x / 4.0) ** k, (0.5 - y / 3.0) ** k], axis=1)
        return out

    proj = project_acoustic(tab, PARAMS, poly_q, poly_v)
    n_k = tab.n_scalar
    sv = tab.scalar
    q_h = np.stack([sv.T @ proj.vec[:n_k], sv.T @ proj.vec[n_k:]], axis=1)
    v_h = sv.T @ proj.scalar
    assert np.abs(q_h - poly_q(tab.points)).max() < 1e-11
    assert np.abs(v_h - poly_v(tab.points)).max() < 1e-11


def test_spin_projection_is_plain_l2():
    _, tab = coupled_tables(2)
    fn = lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2
    assert np.abs(project_spin(tab, fn) - project_volume_scalar(tab, fn)).max() == 0.0


def test_projection_works_on_jittered_elements():
    mesh = build_structured_coupled(
        1, (-2.0, -2.0, 2.0, 2.0), (-1.0, -1.0, 1.0, 1.0), jitter=0.15, seed=2
    )
    asm = Assembler(mesh, 2, PARAMS)
    worst = 0.0
    for elem in range(0, mesh.n_elements, 5):
        tab = asm.tables(elem)
        if tab.domain == "A":
            worst = max(worst, project_acoustic(tab, PARAMS, smooth_q, smooth_v).residual)
        else:
            worst = max(worst, project_elastic(tab, PARAMS, smooth_sigma, smooth_u).residual)
    assert worst < 1e-12

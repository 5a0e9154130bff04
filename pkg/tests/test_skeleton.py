"""Global trace system: assembly, solve, recovery, and the face residuals."""

import numpy as np
import pytest
import scipy.io as sio
import scipy.sparse as sp

from hdgwave.local_solver import Assembler, ModelParams
from hdgwave.mesh import FaceKind, build_structured_coupled
from hdgwave.projections import face_rule, project_face_scalar, project_face_vector
from hdgwave.skeleton import (
    AssembledSystem,
    ProblemData,
    SingularSkeletonSystem,
    assemble_system,
    build_dof_map,
    conservation_report,
    dump_system,
    energy_quantities,
    solve_assembled,
    solve_problem,
)
from hdgwave.verify import make_case, make_polynomial_case

COUPLED_BOXES = ((-2.0, -2.0, 2.0, 2.0), (-1.0, -1.0, 1.0, 1.0))


# -- degree-of-freedom bookkeeping -------------------------------------------


def test_dof_count_acoustic_unit_square():
    # n=2 unit square: 16 faces, 8 boundary (eliminated), 8 interior scalar
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0))
    assert build_dof_map(mesh, 1).n_dofs == 8 * 2
    assert build_dof_map(mesh, 3).n_dofs == 8 * 4


def test_dof_count_elastic_unit_square():
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0), domain="E")
    assert build_dof_map(mesh, 1).n_dofs == 8 * 2 * 2


def test_dof_count_coupled_coarsest():
    # 56 faces: 16 outer Dirichlet, 8 interface, 8 solid interior, 24 fluid
    # interior; scalar unknowns on 24 + 8 faces, displacement on 8 + 8.
    mesh = build_structured_coupled(1, *COUPLED_BOXES)
    kinds = [f.kind for f in mesh.faces]
    assert kinds.count(FaceKind.GAMMA_AD) == 16
    assert kinds.count(FaceKind.GAMMA) == 8
    assert kinds.count(FaceKind.INTERIOR_E) == 8
    assert kinds.count(FaceKind.INTERIOR_A) == 24
    dm = build_dof_map(mesh, 1)
    assert dm.n_dofs == (24 + 8) * 2 + (8 + 8) * 4
    # every face has the expected offset pattern
    for fid, face in enumerate(mesh.faces):
        has_v = dm.vhat_offset[fid] >= 0
        has_u = dm.uhat_offset[fid] >= 0
        if face.kind is FaceKind.GAMMA:
            assert has_v and has_u
        elif face.kind is FaceKind.INTERIOR_A:
            assert has_v and not has_u
        elif face.kind is FaceKind.INTERIOR_E:
            assert has_u and not has_v
        else:
            assert not has_v and not has_u


# -- condensed vs monolithic --------------------------------------------------


@pytest.mark.parametrize("k", [1, 2])
def test_monolithic_matches_condensed_acoustic(k):
    case = make_case("acoustic61")
    mesh = case.mesh_at(0)
    assert mesh.n_elements == 8
    sol_c, _ = solve_problem(mesh, k, case.params, case.data)
    sol_m, _ = solve_problem(mesh, k, case.params, case.data, monolithic=True)
    scale = max(np.abs(sol_c.dof_values).max(), 1e-30)
    assert np.abs(sol_c.dof_values - sol_m.dof_values).max() < 1e-9 * scale
    for elem in sol_c.volume:
        vs = max(np.abs(sol_c.volume[elem]).max(), scale)
        assert np.abs(sol_c.volume[elem] - sol_m.volume[elem]).max() < 1e-9 * vs


@pytest.mark.parametrize("k", [1, 2])
def test_monolithic_matches_condensed_coupled(k):
    case = make_case("coupled63")
    mesh = case.mesh_at(0)
    sol_c, _ = solve_problem(mesh, k, case.params, case.data)
    sol_m, _ = solve_problem(mesh, k, case.params, case.data, monolithic=True)
    scale = max(np.abs(sol_c.dof_values).max(), 1e-30)
    assert np.abs(sol_c.dof_values - sol_m.dof_values).max() < 1e-9 * scale


def test_monolithic_system_is_larger_but_recovers_same_fields():
    case = make_case("acoustic61")
    mesh = case.mesh_at(0)
    asm = Assembler(mesh, 1, case.params)
    system_c = assemble_system(asm, case.data)
    system_m = assemble_system(asm, case.data, monolithic=True)
    n_vol = sum(loc.volume_dim for loc in system_m.locals_)
    assert system_m.matrix.shape[0] == system_c.matrix.shape[0] + n_vol
    assert system_m.n_volume == n_vol and system_c.n_volume == 0


# -- boundary handling --------------------------------------------------------


def test_dirichlet_traces_are_face_projections():
    case = make_case("acoustic61")
    mesh = case.mesh_at(0)
    sol, system = solve_problem(mesh, 2, case.params, case.data)
    seen = 0
    for fid, face in enumerate(mesh.faces):
        if face.kind is FaceKind.GAMMA_AD:
            coef = project_face_scalar(mesh, fid, 2, case.exact.v)
            assert np.abs(sol.vhat[fid] - coef).max() < 1e-13
            seen += 1
    assert seen == 8


def test_elastic_dirichlet_traces_are_face_projections():
    case = make_case("elastic62")
    mesh = case.mesh_at(0)
    sol, _ = solve_problem(mesh, 1, case.params, case.data)
    for fid, face in enumerate(mesh.faces):
        if face.kind is FaceKind.ELASTIC_BOUNDARY:
            coef = project_face_vector(mesh, fid, 1, case.exact.u)
            assert np.abs(sol.uhat[fid] - coef).max() < 1e-13


@pytest.mark.parametrize("k", [1, 2])
def test_neumann_faces_reproduce_polynomials(k):
    # replace the x = xmax boundary by prescribed-flux faces; a degree-k
    # polynomial solution must still be reproduced to round-off
    case = make_polynomial_case("acoustic", k)
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0), dirichlet_only=False)
    n_neu = sum(f.kind is FaceKind.GAMMA_AN for f in mesh.faces)
    assert n_neu == 2
    data = ProblemData(
        f=case.data.f,
        dirichlet=case.data.dirichlet,
        neumann=lambda pts, n_out: case.exact.q(pts) @ n_out,
    )
    sol, _ = solve_problem(mesh, k, case.params, data)
    asm = Assembler(mesh, k, case.params)
    from hdgwave.verify import compute_errors

    errors = compute_errors(asm, sol, case.exact)
    assert errors["v"] < 1e-10 and errors["q"] < 1e-10


def test_neumann_without_data_means_zero_flux():
    mesh = build_structured_coupled(2, (0.0, 0.0, 1.0, 1.0), dirichlet_only=False)
    params = ModelParams.from_young_poisson(1.0, 0.3, s=2.0 - 1.0j)
    sol, _ = solve_problem(mesh, 1, params, ProblemData(f=lambda p: np.ones(len(p))))
    asm = Assembler(mesh, 1, params)
    rep = conservation_report(asm, ProblemData(), sol)
    assert rep["neumann"] < 1e-10 * max(rep["flux_scale"], 1.0)


# -- solved-state residuals ---------------------------------------------------


@pytest.mark.parametrize("k", [1, 2])
def test_interior_fluxes_single_valued_after_solve(k):
    case = make_case("coupled63")
    mesh = case.mesh_at(1)
    asm = Assembler(mesh, k, case.params)
    sol, _ = solve_problem(mesh, k, case.params, case.data, assembler=asm)
    rep = conservation_report(asm, case.data, sol)
    tol = 1e-10 * max(rep["flux_scale"], 1.0)
    assert rep["interior_jump"] < tol
    assert rep["gamma_velocity"] < tol
    assert rep["gamma_traction"] < tol


def test_transmission_rows_hold_for_polynomial_coupled_case():
    case = make_polynomial_case("coupled", 2)
    mesh = case.mesh_at(0)
    asm = Assembler(mesh, 2, case.params)
    sol, _ = solve_problem(mesh, 2, case.params, case.data, assembler=asm)
    rep = conservation_report(asm, case.data, sol)
    tol = 1e-10 * max(rep["flux_scale"], 1.0)
    assert max(rep["interior_jump"], rep["gamma_velocity"],
               rep["gamma_traction"]) < tol


# -- uniqueness and well-posedness guards -------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_homogeneous_coupled_problem_has_only_zero_solution(k):
    mesh = build_structured_coupled(1, *COUPLED_BOXES)
    params = ModelParams.from_young_poisson(1.0, 0.3, s=2.0 - 1.0j)
    asm = Assembler(mesh, k, params)
    sol, _ = solve_problem(mesh, k, params, ProblemData(), assembler=asm)
    assert np.abs(sol.dof_values).max() < 1e-12
    assert max(np.abs(v).max() for v in sol.volume.values()) < 1e-12
    energies = energy_quantities(asm, sol)
    assert abs(energies["elastic"]) < 1e-20
    assert abs(energies["acoustic"]) < 1e-20


def test_energy_quantities_positive_for_nonzero_solution():
    case = make_case("coupled63")
    mesh = case.mesh_at(0)
    asm = Assembler(mesh, 1, case.params)
    sol, _ = solve_problem(mesh, 1, case.params, case.data, assembler=asm)
    energies = energy_quantities(asm, sol)
    assert energies["elastic"] > 0.0
    assert energies["acoustic"] > 0.0


def test_ill_posed_parameters_rejected_before_assembly():
    with pytest.raises(ValueError, match="well-posedness"):
        ModelParams.from_young_poisson(1.0, 0.3, s=-2.0 + 1.0j)
    with pytest.raises(ValueError, match="well-posedness"):
        ModelParams.from_young_poisson(1.0, 0.3, s=1.0j)


def test_singular_system_raises_typed_error():
    matrix = sp.csr_matrix(np.zeros((2, 2), dtype=complex))
    bad = AssembledSystem(
        matrix=matrix, rhs=np.ones(2, dtype=complex), dofmap=None, locals_=[],
        fixed_uhat={}, fixed_vhat={}, n_volume=0, volume_offsets=None,
    )
    with pytest.raises(SingularSkeletonSystem):
        solve_assembled(bad)


# -- serialization of the assembled system ------------------------------------


def test_dump_system_writes_matrix_market(tmp_path):
    case = make_case("acoustic61")
    mesh = case.mesh_at(0)
    asm = Assembler(mesh, 1, case.params)
    system = assemble_system(asm, case.data)
    prefix = str(tmp_path / "sys")
    dump_system(prefix, system)
    mat = sio.mmread(f"{prefix}_matrix.mtx").tocsr()
    rhs = np.asarray(sio.mmread(f"{prefix}_rhs.mtx")).ravel()
    assert mat.shape == system.matrix.shape
    assert abs(mat - system.matrix).max() < 1e-15
    assert np.abs(rhs - system.rhs).max() < 1e-15


def test_solve_problem_dump_prefix(tmp_path):
    case = make_case("acoustic61")
    mesh = case.mesh_at(0)
    prefix = str(tmp_path / "run")
    solve_problem(mesh, 1, case.params, case.data, dump_prefix=prefix)
    assert (tmp_path / "run_matrix.mtx").exists()
    assert (tmp_path / "run_rhs.mtx").exists()


# -- interface coupling sanity -------------------------------------------------


def test_interface_rows_couple_both_trace_families():
    mesh = build_structured_coupled(1, *COUPLED_BOXES)
    params = ModelParams.from_young_poisson(1.0, 0.3, s=2.0 - 1.0j)
    asm = Assembler(mesh, 1, params)
    system = assemble_system(asm, ProblemData())
    dm = system.dofmap
    mat = system.matrix
    for fid, face in enumerate(mesh.faces):
        if face.kind is not FaceKind.GAMMA:
            continue
        v0, u0 = dm.vhat_offset[fid], dm.uhat_offset[fid]
        block_vu = mat[v0 : v0 + 2, u0 : u0 + 4].toarray()
        block_uv = mat[u0 : u0 + 4, v0 : v0 + 2].toarray()
        assert np.abs(block_vu).max() > 1e-12
        assert np.abs(block_uv).max() > 1e-12
        # the two couplings act through the same geometric normal: the
        # velocity row uses -s n_E, the traction row rho_f s n_A = -rho_f s n_E
        ratio = []
        for r in range(2):
            for c in range(2):
                a, b = block_vu[r, 2 * c], block_uv[2 * c, r]
                if abs(a) > 1e-12:
                    ratio.append(b / a)
        ratio = np.array(ratio)
        expected = params.rho_f * params.s / params.s
        assert np.abs(ratio - expected).max() < 1e-12


def test_zero_incident_wave_keeps_interface_rows_homogeneous():
    mesh = build_structured_coupled(1, *COUPLED_BOXES)
    params = ModelParams.from_young_poisson(1.0, 0.3, s=2.0 - 1.0j)
    asm = Assembler(mesh, 1, params)
    system = assemble_system(asm, ProblemData())
    assert np.abs(system.rhs).max() == 0.0

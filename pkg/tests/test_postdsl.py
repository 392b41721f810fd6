import json

import numpy as np
import pytest

from conftest import data_path
from emsim import postdsl, solver
from emsim.errors import DslSyntaxError, EvalError

GROUPS5 = {"Omega_i": 0, "Omega_c_1": 1, "Omega_c_2": 2, "Omega_c_3": 3,
           "Omega_c_4": 4, "Omega_c_5": 5, "Gamma_out": 6}
GROUPS9 = {"Omega_i": 0, "Gamma_out": 10,
           **{f"Omega_c_{k}": k for k in range(1, 10)}}


def read_fixture(name):
    with open(data_path(name), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def loss_program():
    return postdsl.parse_post(read_fixture("loss_density_conductor4.pro"))


@pytest.fixture(scope="module")
def energy_program():
    return postdsl.parse_post(read_fixture("energy_density_diagonal.pro"))


@pytest.fixture(scope="module")
def h_program():
    return postdsl.parse_post(read_fixture("h_vector_field.pro"))


# -- parsing ----------------------------------------------------------------

def test_loss_fixture_structure(loss_program):
    assert len(loss_program.processings) == 1
    block = loss_program.processings[0]
    assert block.name == "MagDyn_b"
    assert block.formulation == "MagDyn_a"
    q = block.quantities[0]
    assert q.name == "OhmicLossDensity_conductor_4"
    assert q.regions == ("Omega_c_4",)
    op = loss_program.operations[0]
    spec = op.prints[0]
    assert spec.quantity == "OhmicLossDensity_conductor_4"
    assert spec.region == "Omega"
    assert spec.file == "Results/p_V_conductor_selected.pos"
    assert spec.fmt == "Gmsh"
    assert spec.label == "p_V_c_4(xyz) [W/m^3] "


def test_energy_fixture_structure(energy_program):
    q = energy_program.find_quantity("MagneticEnergyDensity_Diagonal")
    assert q is not None
    assert q.regions == ("Omega_c_1", "Omega_c_5", "Omega_c_9")


def test_term_and_quantity_synonyms(h_program):
    """Term inside Quantity parses the same as Local inside PostQuantity."""
    q = h_program.find_quantity("h_vector_field")
    assert q is not None
    assert q.wrapper in ("Local", "Term")
    assert q.regions == ("Omega",)


def test_pretty_print_round_trip(loss_program, energy_program, h_program):
    for program in (loss_program, energy_program, h_program):
        text = postdsl.pretty_print(program)
        again = postdsl.parse_post(text)
        assert again == program
        assert postdsl.pretty_print(again) == text


def test_expression_precedence():
    src = """PostProcessing { { Name P; NameOfFormulation MagDyn_a;
      Quantity { { Name q; Value { Local { [ 1 + 2 * 3 ^ 2 ^ 1 ] ;
      In Omega; Jacobian Vol; } } } } } }"""
    program = postdsl.parse_post(src)
    expr = program.find_quantity("q").expr
    # 1 + (2 * (3 ^ (2 ^ 1)))
    assert isinstance(expr, postdsl.EBin) and expr.op == "+"
    rhs = expr.right
    assert isinstance(rhs, postdsl.EBin) and rhs.op == "*"
    assert isinstance(rhs.right, postdsl.EPow)


def test_comments_are_ignored():
    src = read_fixture("loss_density_conductor4.pro")
    commented = "// leading comment\n" + src.replace(
        "Format Gmsh ];", "Format Gmsh ]; // trailing")
    program = postdsl.parse_post(commented)
    assert program.find_quantity("OhmicLossDensity_conductor_4") is not None


def test_string_contents_preserved_exactly(loss_program):
    spec = loss_program.operations[0].prints[0]
    assert spec.label.endswith("] ")  # the trailing blank is data


def test_syntax_error_reports_position():
    with pytest.raises(DslSyntaxError) as err:
        postdsl.parse_post("PostProcessing { { Name X; }")
    assert err.value.line >= 1
    assert err.value.column >= 1


def test_unbalanced_brace_hint():
    src = read_fixture("loss_density_conductor4.pro")
    mutated = src[:src.rindex("}")]
    with pytest.raises(DslSyntaxError) as err:
        postdsl.parse_post(mutated)
    assert err.value.hint is not None
    assert "unbalanced" in err.value.hint


def test_mutated_brace_fails_with_location(loss_program):
    src = read_fixture("loss_density_conductor4.pro")
    # delete the first structural '{'
    pos = src.index("{")
    with pytest.raises(DslSyntaxError) as err:
        postdsl.parse_post(src[:pos] + src[pos + 1:])
    assert err.value.line >= 1


def test_bare_identifier_not_an_expression():
    src = """PostProcessing { { Name P; NameOfFormulation MagDyn_a;
      Quantity { { Name q; Value { Local { [ sigma ] ;
      In Omega; Jacobian Vol; } } } } } }"""
    with pytest.raises(DslSyntaxError):
        postdsl.parse_post(src)


# -- kind checking ----------------------------------------------------------

def kind_diags(expr_text):
    src = ("PostProcessing { { Name P; NameOfFormulation MagDyn_a; Quantity "
           "{ { Name q; Value { Local { [ %s ] ; In Omega; Jacobian Vol; } } "
           "} } } }" % expr_text)
    program = postdsl.parse_post(src)
    sink = []
    q = program.find_quantity("q")
    kind = postdsl.kind_of(q.expr, sink, q)
    return kind, sink


def test_kind_inference():
    assert kind_diags("sigma[] * Norm[{d a}]^2")[0] == "scalar"
    assert kind_diags("nu[] * {d a}")[0] == "vector"
    # the electric field itself is a vector; Norm[] turns it scalar
    assert kind_diags("- Dt[{a}] - {grad_phi}")[0] == "vector"
    assert kind_diags("Norm[- Dt[{a}] - {grad_phi}]")[0] == "scalar"


def test_mixed_kind_addition_flagged():
    kind, sink = kind_diags("Norm[{a}] + {d a}")
    assert sink
    assert sink[0].layer == "physics_syntax"
    assert "matching kinds" in sink[0].message


def test_vector_times_vector_flagged():
    _, sink = kind_diags("{d a} * {d a}")
    assert any(d.layer == "physics_syntax" for d in sink)


def test_vector_divisor_flagged():
    _, sink = kind_diags("nu[] / {d a}")
    assert any(d.layer == "physics_syntax" for d in sink)


def test_vector_power_flagged():
    _, sink = kind_diags("{d a} ^ 2")
    assert any(d.layer == "physics_syntax" for d in sink)


def test_dt_requires_field_argument():
    _, sink = kind_diags("Dt[sigma[]]")
    assert any(d.layer == "physics_syntax" for d in sink)


# -- validation -------------------------------------------------------------

def test_fixtures_validate_clean(loss_program, energy_program, h_program):
    assert postdsl.validate_post(loss_program, GROUPS5) == []
    assert postdsl.validate_post(energy_program, GROUPS9) == []
    assert postdsl.validate_post(h_program, GROUPS5) == []


def test_unknown_region_rejected(loss_program):
    groups = {"Omega_i": 0, "Omega_c_1": 1, "Gamma_out": 2}
    diags = postdsl.validate_post(loss_program, groups)
    assert any("unknown region 'Omega_c_4'" in d.message for d in diags)
    assert all(d.layer == "dsl_semantics" for d in diags)


def test_boundary_region_is_not_an_element_region(energy_program):
    src = read_fixture("energy_density_diagonal.pro").replace(
        "Omega_c_1, Omega_c_5, Omega_c_9", "Gamma_out")
    program = postdsl.parse_post(src)
    diags = postdsl.validate_post(program, GROUPS9)
    assert any("unknown region 'Gamma_out'" in d.message for d in diags)


def test_synthetic_regions_accepted():
    """Omega and Omega_c address the union regions without a mesh group."""
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Region[{Omega_c_4}]", "Omega_c")
    program = postdsl.parse_post(src)
    assert postdsl.validate_post(program, GROUPS5) == []


def test_unknown_formulation(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "NameOfFormulation MagDyn_a", "NameOfFormulation MagStat_phi")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("unknown formulation" in d.message for d in diags)


DUP_SRC = """PostProcessing { { Name P; NameOfFormulation MagDyn_a; Quantity {
  { Name q; Value { Local { [ nu[] * {d a} ] ; In Omega; Jacobian Vol; } } }
  { Name q; Value { Local { [ nu[] * {d a} ] ; In Omega; Jacobian Vol; } } }
} } }"""


def test_duplicate_quantity_name():
    diags = postdsl.validate_post(postdsl.parse_post(DUP_SRC), GROUPS5)
    assert any("duplicate quantity" in d.message for d in diags)


def test_non_primary_field(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "{grad_phi}", "{b}")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("not derived from a primary variable" in d.message
               for d in diags)


def test_unknown_coefficient_and_function(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "sigma[]", "rho[]")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("unknown coefficient rho[]" in d.message for d in diags)

    src2 = read_fixture("loss_density_conductor4.pro").replace(
        "Norm[", "Curl[")
    diags2 = postdsl.validate_post(postdsl.parse_post(src2), GROUPS5)
    assert any("unknown function Curl[]" in d.message for d in diags2)


def test_sigma_needs_conductive_region(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Region[{Omega_c_4}]", "Omega")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("needs conductive" in d.message for d in diags)


def test_print_of_undeclared_quantity(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Print[ OhmicLossDensity_conductor_4",
        "Print[ SomethingElse")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("undeclared quantity" in d.message for d in diags)


def test_escaping_output_path_rejected(loss_program):
    for bad in ("../escape.pos", "/tmp/abs.pos", "a/../../b.pos"):
        src = read_fixture("loss_density_conductor4.pro").replace(
            "Results/p_V_conductor_selected.pos", bad)
        diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
        assert any("escapes the artifact directory" in d.message
                   for d in diags), bad


def test_unsupported_jacobian(loss_program):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Jacobian Vol", "Jacobian Sur")
    diags = postdsl.validate_post(postdsl.parse_post(src), GROUPS5)
    assert any("unsupported jacobian" in d.message for d in diags)


def test_diagnostic_str():
    d = postdsl.Diagnostic("error", "dsl_semantics", "boom", 3, 7)
    assert str(d) == "[dsl_semantics] error: boom (line 3, col 7)"


# -- physics lint -----------------------------------------------------------

def test_fixtures_lint_clean(loss_program, energy_program, h_program):
    assert postdsl.physics_lint(loss_program) == []
    assert postdsl.physics_lint(energy_program) == []
    assert postdsl.physics_lint(h_program) == []


def test_wrong_loss_factor():
    src = read_fixture("loss_density_conductor4.pro").replace(
        "sigma[]/2", "sigma[]")
    diags = postdsl.physics_lint(postdsl.parse_post(src))
    assert len(diags) == 1
    assert diags[0].severity == "warning"
    assert diags[0].layer == "physics_semantics"
    assert diags[0].message == "ohmic loss density uses factor 1 vs. 0.5"


def test_wrong_energy_factor():
    src = read_fixture("energy_density_diagonal.pro").replace("0.25", "0.5")
    diags = postdsl.physics_lint(postdsl.parse_post(src))
    assert [d.message for d in diags] == [
        "magnetic energy density uses factor 0.5 vs. 0.25"]


def test_incomplete_electric_field():
    src = read_fixture("loss_density_conductor4.pro").replace(
        "- Dt[{a}] - {grad_phi}", "- Dt[{a}]")
    diags = postdsl.physics_lint(postdsl.parse_post(src))
    assert any("incomplete electric field" in d.message for d in diags)


def test_wrong_sign_electric_field():
    src = read_fixture("loss_density_conductor4.pro").replace(
        "- Dt[{a}] - {grad_phi}", "Dt[{a}] - {grad_phi}")
    diags = postdsl.physics_lint(postdsl.parse_post(src))
    assert any("should be -Dt[{a}] - {grad_phi}" in d.message for d in diags)


def test_energy_must_square_d_a():
    src = read_fixture("energy_density_diagonal.pro").replace(
        "Norm[{d a}]", "Norm[{a}]")
    diags = postdsl.physics_lint(postdsl.parse_post(src))
    assert any("should square" in d.message for d in diags)


# -- evaluation -------------------------------------------------------------

def test_loss_quantity_reproduces_solver_exactly(grid9_problem, grid9_result):
    """The edge-midpoint evaluation rule makes the DSL loss integral agree
    with the solver's conductor losses to the last bit."""
    program = postdsl.parse_post(read_fixture("loss_density_conductor4.pro"))
    evaluation = postdsl.evaluate_post(program, grid9_result, grid9_problem)
    eq = evaluation.quantities["OhmicLossDensity_conductor_4"]
    mesh = grid9_problem.mesh
    area = mesh.areas()
    idx = mesh.region_triangles("Omega_c_4")
    integral = float(np.real(np.sum(eq.values[idx] * area[idx])))
    reports = solver.conductor_report(grid9_result, grid9_problem)
    expected = reports[3].loss_W_per_m
    assert abs(integral - expected) / expected < 1e-14
    # zero padded outside the declared region
    other = np.setdiff1d(np.arange(mesh.num_triangles), idx)
    assert np.all(eq.values[other] == 0.0)


def test_energy_quantity_matches_direct_sum(grid9_problem, grid9_result):
    program = postdsl.parse_post(read_fixture("energy_density_diagonal.pro"))
    evaluation = postdsl.evaluate_post(program, grid9_result, grid9_problem)
    eq = evaluation.quantities["MagneticEnergyDensity_Diagonal"]
    mesh = grid9_problem.mesh
    area = mesh.areas()
    fields = solver.derive_fields(grid9_result, grid9_problem)
    nu = grid9_problem.material.reluctivity
    idx = np.concatenate([mesh.region_triangles(f"Omega_c_{k}")
                          for k in (1, 5, 9)])
    b2 = np.sum(np.abs(fields.B[idx]) ** 2, axis=1)
    direct = float(np.sum(0.25 * nu * b2 * area[idx]))
    via_dsl = float(np.real(np.sum(eq.values[idx] * area[idx])))
    assert abs(via_dsl - direct) / direct < 1e-14


def test_vector_quantity_h_field(grid9_problem, grid9_result):
    program = postdsl.parse_post(read_fixture("h_vector_field.pro"))
    evaluation = postdsl.evaluate_post(program, grid9_result, grid9_problem)
    eq = evaluation.quantities["h_vector_field"]
    assert eq.kind == "vector"
    fields = solver.derive_fields(grid9_result, grid9_problem)
    scale = np.abs(fields.H).max()
    assert np.abs(eq.values[:, :2] - fields.H).max() / scale < 1e-12
    assert np.all(eq.values[:, 2] == 0.0)


def test_artifacts_written(tmp_path, grid9_problem, grid9_result):
    program = postdsl.parse_post(read_fixture("loss_density_conductor4.pro"))
    evaluation = postdsl.evaluate_post(program, grid9_result, grid9_problem,
                                       out_dir=str(tmp_path))
    assert len(evaluation.artifacts) == 1
    art = evaluation.artifacts[0]
    assert art["files"] == ["Results/p_V_conductor_selected.vtk",
                            "Results/p_V_conductor_selected.json"]
    vtk = tmp_path / art["files"][0]
    sidecar = tmp_path / art["files"][1]
    assert vtk.exists()
    meta = json.loads(sidecar.read_text())
    assert meta["quantity"] == "OhmicLossDensity_conductor_4"
    assert meta["triangle_count"] == grid9_problem.mesh.num_triangles
    assert meta["range"][1] > 0
    assert meta["vtk_file"] == art["files"][0]


def test_no_files_without_out_dir(grid9_problem, grid9_result):
    program = postdsl.parse_post(read_fixture("loss_density_conductor4.pro"))
    evaluation = postdsl.evaluate_post(program, grid9_result, grid9_problem)
    assert evaluation.artifacts == []


def test_hostile_path_confinement(tmp_path, grid9_problem, grid9_result):
    """validate_post rejects escaping paths; the evaluator must refuse them
    too in case it is driven directly."""
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Results/p_V_conductor_selected.pos", "../breakout.pos")
    program = postdsl.parse_post(src)
    with pytest.raises(EvalError):
        postdsl.evaluate_post(program, grid9_result, grid9_problem,
                              out_dir=str(tmp_path))
    assert not (tmp_path.parent / "breakout.vtk").exists()


def test_sigma_evaluation_needs_conductor(grid9_problem, grid9_result):
    src = read_fixture("loss_density_conductor4.pro").replace(
        "Region[{Omega_c_4}]", "Omega")
    program = postdsl.parse_post(src)
    with pytest.raises(EvalError):
        postdsl.evaluate_post(program, grid9_result, grid9_problem)


def test_region_elements_synthetic_names(grid9_problem):
    mesh = grid9_problem.mesh
    all_c = postdsl.region_elements(mesh, "Omega_c")
    individual = np.concatenate([mesh.region_triangles(f"Omega_c_{k}")
                                 for k in range(1, 10)])
    assert np.array_equal(np.sort(all_c), np.sort(individual))
    omega = postdsl.region_elements(mesh, "Omega")
    assert len(omega) == mesh.num_triangles

"""Natural-language driven 2D eddy-current simulation.

The package turns a plain-text request into a solved magnetoquasistatic
model: a language-model gateway produces a small layout script, the
script places round conductors, an unstructured triangular mesh is built,
a frequency-domain finite element problem is assembled and solved, and
GetDP-style post-processing code computes derived field maps. A layered
validation ladder classifies every failure mode along the way.
"""

from . import (cli, genai, geometry, layoutlang, mesher, pipeline, postdsl,
               solver, vtkio)
from .errors import (AssemblyError, AuthMissing, DslSyntaxError, EmptyLayout,
                     EmsimError, EvalError, GeometryError, LayoutRuntimeError,
                     LayoutSyntaxError, MeshFailure, MissingPlaceholder,
                     NonConductive, ProviderTimeout, ProviderUnavailable,
                     SingularSystem)
from .geometry import (ConductorLayout, DomainBoundary, ExcitationSpec,
                       MaterialSpec, boundary, check_overlap, skin_depth)
from .layoutlang import evaluate_layout, parse_layout
from .mesher import MeshSizeSpec, TriMesh, generate_mesh
from .pipeline import (FactSheet, RunConfig, Session, WorkflowReport,
                       run_workflow)
from .postdsl import (Diagnostic, evaluate_post, parse_post, physics_lint,
                      pretty_print, validate_post)
from .solver import (FEProblem, SolveResult, conductor_report,
                     impedance_per_length, solve_problem, total_loss)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "AuthMissing", "ConductorLayout", "Diagnostic",
    "DomainBoundary", "DslSyntaxError", "EmptyLayout", "EmsimError",
    "EvalError", "ExcitationSpec", "FEProblem", "FactSheet", "GeometryError",
    "LayoutRuntimeError", "LayoutSyntaxError", "MaterialSpec", "MeshFailure",
    "MeshSizeSpec", "MissingPlaceholder", "NonConductive", "ProviderTimeout",
    "ProviderUnavailable", "RunConfig", "Session", "SingularSystem",
    "SolveResult", "TriMesh", "WorkflowReport", "boundary", "check_overlap",
    "cli", "conductor_report", "evaluate_layout", "evaluate_post", "genai",
    "generate_mesh", "geometry", "impedance_per_length", "layoutlang",
    "mesher", "parse_layout", "parse_post", "physics_lint", "pipeline",
    "postdsl", "pretty_print", "run_workflow", "skin_depth", "solve_problem",
    "solver", "total_loss", "validate_post", "vtkio",
]

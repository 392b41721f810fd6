"""Workflow orchestration: prompt to report, with layered verdicts.

A run walks prompt -> layout script -> geometry -> mesh -> solve ->
post-processing -> summary and files every failure under one layer of the
validation ladder instead of raising. The ladder has a fixed total order
(see LAYERS); the first failed layer marks everything after it skipped, so
a report never claims success downstream of a failure. ``needs_human``
marks stages that ran clean but whose intent a machine cannot confirm
(for example "place conductors shaped like a letter"); it does not block
later stages.

Numeric facts in the FactSheet come from the solver and the evaluated
post-processing quantities only, never from generated text. With the stub
provider a run is deterministic end to end; report.json is byte-identical
across repeated runs because it contains no ids, clocks or absolute paths.
"""

from __future__ import annotations

import json
import os
import re
import uuid
from dataclasses import dataclass, field

from . import genai, geometry, layoutlang, mesher, postdsl, solver, vtkio
from .errors import (AssemblyError, AuthMissing, DslSyntaxError, EmptyLayout,
                     EvalError, GeometryError, LayoutRuntimeError,
                     LayoutSyntaxError, MeshFailure, MissingPlaceholder,
                     ProviderUnavailable, SingularSystem)
from .postdsl import Diagnostic

SCHEMA_VERSION = 1

LAYERS = ("layout_syntax", "layout_semantics",
          "geometry_syntax", "geometry_semantics",
          "dsl_syntax", "dsl_semantics",
          "physics_syntax", "physics_semantics",
          "summary_syntax", "summary_semantics")

MODES = ("layout_only", "with_post", "with_post_and_summary")

_PROVIDER_ERRORS = (AuthMissing, ProviderUnavailable, MissingPlaceholder)


@dataclass(frozen=True)
class RunConfig:
    """Defaults for a run; mirrors the JSON config file."""
    provider: genai.ProviderConfig = field(
        default_factory=genai.ProviderConfig)
    radius_m: float = geometry.DEFAULT_RADIUS_M
    conductivity_S_per_m: float = geometry.DEFAULT_CONDUCTIVITY_S_PER_M
    frequency_Hz: float = geometry.DEFAULT_FREQUENCY_HZ
    current_A: float = geometry.DEFAULT_CURRENT_A
    h_conductor_m: float | None = None
    h_far_m: float | None = None
    gradation: float = 1.5
    dsl_variant: str = "dsl_with_examples"

    def material(self) -> geometry.MaterialSpec:
        return geometry.MaterialSpec(
            conductivity_S_per_m=self.conductivity_S_per_m)

    def excitation(self) -> geometry.ExcitationSpec:
        return geometry.ExcitationSpec(current_amplitude_A=self.current_A,
                                       frequency_Hz=self.frequency_Hz)

    def sizes(self, layout, boundary) -> mesher.MeshSizeSpec:
        base = mesher.default_sizes(layout, boundary)
        return mesher.MeshSizeSpec(
            h_conductor_m=self.h_conductor_m or base.h_conductor_m,
            h_far_m=self.h_far_m or base.h_far_m,
            gradation=self.gradation)

    def to_json_dict(self):
        return {"provider": self.provider.to_json_dict(),
                "radius_m": self.radius_m,
                "conductivity_S_per_m": self.conductivity_S_per_m,
                "frequency_Hz": self.frequency_Hz,
                "current_A": self.current_A,
                "h_conductor_m": self.h_conductor_m,
                "h_far_m": self.h_far_m,
                "gradation": self.gradation,
                "dsl_variant": self.dsl_variant}

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        provider = genai.ProviderConfig.from_json_dict(
            data.get("provider", {}))
        kwargs = {k: data[k] for k in
                  ("radius_m", "conductivity_S_per_m", "frequency_Hz",
                   "current_A", "h_conductor_m", "h_far_m", "gradation",
                   "dsl_variant") if k in data}
        return cls(provider=provider, **kwargs)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class FactSheet:
    conductor_count: int
    layout_descriptor: str
    conductor_radius_m: float
    boundary_radius_m: float
    frequency_Hz: float
    skin_depth_m: float | None
    conductors: tuple
    total_loss_W_per_m: float
    artifacts: tuple = ()

    def to_json_dict(self):
        return {"conductor_count": self.conductor_count,
                "layout_descriptor": self.layout_descriptor,
                "conductor_radius_m": self.conductor_radius_m,
                "boundary_radius_m": self.boundary_radius_m,
                "frequency_Hz": self.frequency_Hz,
                "skin_depth_m": self.skin_depth_m,
                "conductors": list(self.conductors),
                "total_loss_W_per_m": self.total_loss_W_per_m,
                "artifacts": list(self.artifacts)}


@dataclass
class WorkflowReport:
    mode: str
    verdict: dict
    fact_sheet: FactSheet | None
    summary: str | None
    completions: list
    artifacts: list
    provider_error: str | None = None

    def to_json_dict(self):
        verdict = {layer: {
            "status": entry["status"],
            "diagnostics": [{"severity": d.severity, "layer": d.layer,
                             "message": d.message, "line": d.line,
                             "column": d.column}
                            for d in entry["diagnostics"]]}
            for layer, entry in self.verdict.items()}
        return {"schema_version": SCHEMA_VERSION,
                "mode": self.mode,
                "verdict": verdict,
                "fact_sheet": (self.fact_sheet.to_json_dict()
                               if self.fact_sheet else None),
                "summary": self.summary,
                "completions": [r.to_json_dict() for r in self.completions],
                "artifacts": self.artifacts,
                "provider_error": self.provider_error}

    def ladder_ok(self) -> bool:
        """True when no layer failed (ok, skipped and needs_human pass)."""
        return all(entry["status"] != "failed"
                   for entry in self.verdict.values())


# -- sessions ---------------------------------------------------------------

def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


class Session:
    """One conversation: a directory of append-only history and artifacts."""

    def __init__(self, base_dir: str, session_id: str | None = None,
                 config: RunConfig | None = None):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.config = config or RunConfig()
        self.dir = os.path.join(base_dir, "session", self.id)
        os.makedirs(os.path.join(self.dir, "Results"), exist_ok=True)

    def _append_jsonl(self, name: str, payload: dict):
        with open(os.path.join(self.dir, name), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")

    def append_message(self, role: str, text: str, mode: str | None = None):
        entry = {"role": role, "text": text}
        if mode:
            entry["mode"] = mode
        self._append_jsonl("messages.jsonl", entry)

    def append_completion(self, record: genai.CompletionRecord):
        self._append_jsonl("completions.jsonl", record.to_json_dict())

    def write_json(self, name: str, data: dict):
        path = os.path.join(self.dir, name)
        _atomic_write(path, json.dumps(data, indent=2, sort_keys=True))

    def read_json(self, name: str):
        path = os.path.join(self.dir, name)
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)


# -- geometric intent -------------------------------------------------------

_WORD_NUMBERS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
                 "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
                 "eleven": 11, "twelve": 12}

_COUNT_RE = re.compile(
    r"\b(\d+|" + "|".join(_WORD_NUMBERS) + r")\s+conductors?\b")

# Shape words a prompt may claim, mapped to the descriptor substring that
# would confirm them structurally. None means never machine-checkable.
_SHAPE_CHECKS = (("hexagonal", "hexagonal"), ("circle", "circle"),
                 ("grid", "grid"), ("curve", "curve"), ("sinus", "curve"),
                 ("square", None), ("letter", None), ("trapezoidal", None),
                 ("triangle", None))


def requested_count(prompt: str) -> int | None:
    m = _COUNT_RE.search(prompt.lower())
    if not m:
        return None
    token = m.group(1)
    return _WORD_NUMBERS.get(token, None) if token.isalpha() else int(token)


def check_geometry_intent(prompt: str, script, points) -> tuple[str, str]:
    """(status, reason): ok when count and claimed pattern are confirmed."""
    wanted = requested_count(prompt)
    if wanted is not None and wanted != len(points):
        return ("needs_human",
                f"the prompt asks for {wanted} conductors but the layout "
                f"emits {len(points)}")
    descriptor = layoutlang.describe_pattern(script)
    lowered = prompt.lower()
    unverified = []
    for word, needle in _SHAPE_CHECKS:
        if word in lowered and (needle is None or needle not in descriptor):
            unverified.append(word)
    if unverified:
        return ("needs_human",
                "the requested shape cannot be machine-checked: "
                + ", ".join(unverified))
    if wanted is not None:
        return "ok", f"conductor count {wanted} confirmed"
    return "ok", "no machine-checkable geometric claim in the prompt"


# -- classification ---------------------------------------------------------

def _active_layers(mode: str):
    if mode == "layout_only":
        return set(LAYERS[:4])
    if mode == "with_post":
        return set(LAYERS[:8])
    return set(LAYERS)


def classify(outcomes: dict) -> dict:
    """Map stage outcomes onto the layer ladder.

    Returns {layer: {"status": ..., "diagnostics": [Diagnostic, ...]}} in
    ladder order. Deterministic; pure function of the outcomes dict.
    """
    mode = outcomes.get("mode", "with_post_and_summary")
    active = _active_layers(mode)
    verdict = {layer: {"status": "ok" if layer in active else "skipped",
                       "diagnostics": []}
               for layer in LAYERS}

    def fail(layer, message, line=0, column=0, severity="error"):
        verdict[layer]["status"] = "failed"
        verdict[layer]["diagnostics"].append(
            Diagnostic(severity, layer, message, line, column))

    def human(layer, message):
        if verdict[layer]["status"] == "ok":
            verdict[layer]["status"] = "needs_human"
        verdict[layer]["diagnostics"].append(
            Diagnostic("warning", layer, message))

    stage = outcomes.get("provider_error_stage")
    if stage == "layout":
        fail("layout_syntax",
             f"provider failure: {outcomes['provider_error']}")
    exc = outcomes.get("layout_error")
    if exc is not None:
        fail("layout_syntax", str(exc), getattr(exc, "line", 0),
             getattr(exc, "column", 0))
    exc = outcomes.get("layout_runtime_error")
    if exc is not None:
        fail("layout_semantics", str(exc))
    exc = outcomes.get("geometry_build_error")
    if exc is not None:
        fail("geometry_syntax", str(exc))
    overlap = outcomes.get("overlap")
    if overlap:
        pairs = ", ".join(f"({i}, {j})" for i, j in overlap)
        fail("geometry_semantics", f"overlapping conductor pairs: {pairs}")
    exc = outcomes.get("solve_error")
    if exc is not None:
        fail("geometry_semantics", str(exc))
    intent = outcomes.get("intent")
    if intent is not None and intent[0] == "needs_human":
        human("geometry_semantics", intent[1])
    if stage == "dsl":
        fail("dsl_syntax", f"provider failure: {outcomes['provider_error']}")
    exc = outcomes.get("dsl_error")
    if exc is not None:
        fail("dsl_syntax", str(exc), getattr(exc, "line", 0),
             getattr(exc, "column", 0))
    for diag in outcomes.get("dsl_diags", ()):
        if diag.severity == "error":
            verdict[diag.layer]["status"] = "failed"
        verdict[diag.layer]["diagnostics"].append(diag)
    exc = outcomes.get("eval_error")
    if exc is not None:
        fail("dsl_semantics", str(exc))
    lint = outcomes.get("lint_diags", ())
    if lint:
        verdict["physics_semantics"]["status"] = "failed"
        verdict["physics_semantics"]["diagnostics"].extend(lint)
    if stage == "summary":
        fail("summary_syntax",
             f"provider failure: {outcomes['provider_error']}")
    if outcomes.get("summary_text") is not None:
        for problem in outcomes.get("summary_problems", ()):
            fail("summary_syntax", problem)
        human("summary_semantics",
              "semantic review of a textual summary requires a human")
    elif outcomes.get("summary_withheld"):
        for layer in ("summary_syntax", "summary_semantics"):
            if verdict[layer]["status"] == "ok":
                verdict[layer]["status"] = "skipped"
                verdict[layer]["diagnostics"].append(Diagnostic(
                    "warning", layer, outcomes["summary_withheld"]))

    failed_seen = False
    for layer in LAYERS:
        if failed_seen and layer in active:
            verdict[layer]["status"] = "skipped"
        elif verdict[layer]["status"] == "failed":
            failed_seen = True
    return verdict


# -- fact sheet -------------------------------------------------------------

def build_fact_sheet(result, problem, layout, script,
                     evaluation=None) -> FactSheet:
    reports = solver.conductor_report(result, problem)
    try:
        depth = geometry.skin_depth(problem.material, problem.excitation)
        if not (depth < float("inf")):
            depth = None
    except Exception:
        depth = None
    descriptor = (layoutlang.describe_pattern(script) if script is not None
                  else "custom arrangement")
    conductors = tuple(
        {"index": rep.index,
         "center": [layout.centers[rep.index - 1][0],
                    layout.centers[rep.index - 1][1]],
         "current_A": abs(rep.current_A),
         "loss_W_per_m": rep.loss_W_per_m}
        for rep in reports)
    artifacts = tuple(evaluation.artifacts) if evaluation is not None else ()
    return FactSheet(
        conductor_count=layout.count,
        layout_descriptor=descriptor,
        conductor_radius_m=layout.radius_m,
        boundary_radius_m=geometry.boundary(layout).radius_m,
        frequency_Hz=problem.excitation.frequency_Hz,
        skin_depth_m=depth,
        conductors=conductors,
        total_loss_W_per_m=solver.total_loss(result, problem),
        artifacts=artifacts)


def _summary_problems(text: str) -> list[str]:
    problems = []
    if not text.strip():
        problems.append("summary is empty")
        return problems
    if "{" in text or "}" in text:
        problems.append("summary contains unresolved braces")
    if not text.strip().endswith("."):
        problems.append("summary does not end with a sentence")
    if len(text) > 8000:
        problems.append("summary is implausibly long")
    return problems


# -- solution artifacts -----------------------------------------------------

def _solution_payload(result, problem, evaluation):
    mesh = problem.mesh
    fields = solver.derive_fields(result, problem)
    reports = solver.conductor_report(result, problem)
    loss = solver.element_loss(result, problem)
    areas = mesh.areas()
    named = {
        "Jz_re": fields.J_z.real, "Jz_im": fields.J_z.imag,
        "Jz_abs": abs(fields.J_z),
        "B_abs": (fields.B.real ** 2 + fields.B.imag ** 2).sum(axis=1) ** 0.5,
        "loss_density": loss / areas,
    }
    if evaluation is not None:
        for name, quantity in evaluation.quantities.items():
            if quantity.kind == postdsl.SCALAR:
                named[f"{name}_re"] = quantity.values.real
                named[f"{name}_im"] = quantity.values.imag
                named[f"{name}_abs"] = abs(quantity.values)
            else:
                named[f"{name}_abs"] = (
                    (abs(quantity.values) ** 2).sum(axis=1) ** 0.5)
    return {
        "schema_version": SCHEMA_VERSION,
        "dof_count": result.dof_count,
        "residual_norm": result.residual_norm,
        "u_re": [u.real for u in result.u],
        "u_im": [u.imag for u in result.u],
        "a_z_re": result.a_z.real.tolist(),
        "a_z_im": result.a_z.imag.tolist(),
        "conductors": [
            {"index": rep.index, "name": rep.name,
             "current_A": abs(rep.current_A),
             "u_re": rep.u_V_per_m.real, "u_im": rep.u_V_per_m.imag,
             "loss_W_per_m": rep.loss_W_per_m, "area_m2": rep.area_m2,
             "loss_density_mean": rep.loss_density_mean,
             "loss_density_max": rep.loss_density_max}
            for rep in reports],
        "total_loss_W_per_m": solver.total_loss(result, problem),
        "fields": {name: [float(v) for v in arr]
                   for name, arr in sorted(named.items())},
    }


# -- the workflow -----------------------------------------------------------

def run_workflow(session: Session, user_prompt: str,
                 mode: str = "with_post_and_summary") -> WorkflowReport:
    """Execute one prompt end to end; failures land in the verdict."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cfg = session.config
    outcomes: dict = {"mode": mode}
    records: list[genai.CompletionRecord] = []
    manifest: list[dict] = []
    session.append_message("user", user_prompt, mode)

    script_text = None
    try:
        template = genai.load_template("layout_gen")
        prompt = genai.render_prompt(template, user_prompt)
        record = genai.complete(cfg.provider, prompt)
        records.append(record)
        session.append_completion(record)
        script_text = record.cleaned
    except _PROVIDER_ERRORS as exc:
        outcomes["provider_error"] = str(exc)
        outcomes["provider_error_stage"] = "layout"

    script = None
    if script_text is not None:
        try:
            script = layoutlang.parse_layout(script_text)
        except LayoutSyntaxError as exc:
            outcomes["layout_error"] = exc

    points = None
    if script is not None:
        try:
            points = layoutlang.evaluate_layout(script)
        except LayoutRuntimeError as exc:
            outcomes["layout_runtime_error"] = exc

    layout = None
    if points is not None:
        try:
            layout = geometry.ConductorLayout.from_points(
                points, radius_m=cfg.radius_m)
        except (EmptyLayout, GeometryError, ValueError, TypeError) as exc:
            outcomes["geometry_build_error"] = exc

    mesh = problem = result = None
    if layout is not None:
        session.write_json("layout.json", {
            "schema_version": SCHEMA_VERSION,
            "script": script_text,
            "layout": layout.to_json_dict()})
        manifest.append({"name": "layout", "path": "layout.json"})
        overlap = geometry.check_overlap(layout)
        if overlap:
            outcomes["overlap"] = overlap
        else:
            outcomes["intent"] = check_geometry_intent(user_prompt, script,
                                                       points)
            boundary = geometry.boundary(layout)
            try:
                mesh = mesher.generate_mesh(
                    layout, boundary, cfg.sizes(layout, boundary))
                problem = solver.FEProblem(mesh=mesh,
                                           material=cfg.material(),
                                           excitation=cfg.excitation())
                result = solver.solve_problem(problem)
            except (MeshFailure, GeometryError, AssemblyError,
                    SingularSystem) as exc:
                outcomes["solve_error"] = exc
                mesh = problem = result = None

    evaluation = None
    dsl_wanted = mode != "layout_only"
    if dsl_wanted and result is not None:
        dsl_text = None
        try:
            template = genai.load_template(cfg.dsl_variant)
            prompt = genai.render_prompt(template, user_prompt,
                                         {"stage_output": script_text})
            record = genai.complete(cfg.provider, prompt)
            records.append(record)
            session.append_completion(record)
            dsl_text = record.cleaned
        except _PROVIDER_ERRORS as exc:
            outcomes["provider_error"] = str(exc)
            outcomes["provider_error_stage"] = "dsl"

        program = None
        if dsl_text is not None:
            try:
                program = postdsl.parse_post(dsl_text)
            except DslSyntaxError as exc:
                outcomes["dsl_error"] = exc
        if program is not None:
            diags = postdsl.validate_post(program, mesh.groups)
            outcomes["dsl_diags"] = diags
            if not any(d.severity == "error" for d in diags):
                outcomes["lint_diags"] = postdsl.physics_lint(program)
                try:
                    evaluation = postdsl.evaluate_post(
                        program, result, problem, out_dir=session.dir)
                    for art in evaluation.artifacts:
                        for rel in art["files"]:
                            manifest.append({"name": art["quantity"],
                                             "path": rel})
                except EvalError as exc:
                    outcomes["eval_error"] = exc
                    evaluation = None

    if mesh is not None:
        session.write_json("mesh.json", mesh.to_json_dict())
        manifest.append({"name": "mesh", "path": "mesh.json"})
        vtkio.mesh_to_vtk(mesh, os.path.join(session.dir, "Results",
                                             "mesh.vtk"))
        manifest.append({"name": "mesh_vtk", "path": "Results/mesh.vtk"})
    if result is not None:
        session.write_json("solution.json",
                           _solution_payload(result, problem, evaluation))
        manifest.append({"name": "solution", "path": "solution.json"})

    facts = None
    if result is not None:
        facts = build_fact_sheet(result, problem, layout, script, evaluation)

    summary = None
    if mode == "with_post_and_summary":
        pre_summary = classify(outcomes)
        blockers = [layer for layer in LAYERS[:8]
                    if pre_summary[layer]["status"] != "ok"]
        if facts is not None and not blockers:
            try:
                record = genai.summarize(cfg.provider, facts,
                                         records[0] if records else None)
                records.append(record)
                session.append_completion(record)
                summary = record.cleaned
                outcomes["summary_text"] = summary
                outcomes["summary_problems"] = _summary_problems(summary)
            except _PROVIDER_ERRORS as exc:
                outcomes["provider_error"] = str(exc)
                outcomes["provider_error_stage"] = "summary"
        elif facts is not None:
            outcomes["summary_withheld"] = (
                "summary withheld: layers "
                + ", ".join(blockers) + " are not ok")

    verdict = classify(outcomes)
    report = WorkflowReport(mode=mode, verdict=verdict, fact_sheet=facts,
                            summary=summary, completions=records,
                            artifacts=manifest,
                            provider_error=outcomes.get("provider_error"))
    session.write_json("report.json", report.to_json_dict())
    session.append_message("assistant",
                           summary if summary else "run recorded")
    return report

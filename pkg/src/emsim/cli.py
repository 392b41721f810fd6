"""Command line entry points.

Commands: ``run`` (one-shot workflow), ``solve`` (mesh and solve a saved
layout, no LLM involved), ``check`` (DSL diagnostics), ``repl`` (loop over
run), ``serve`` (HTTP service). Exit codes are part of the contract:
0 success or needs-human, 2 usage, 3 provider failure, 4 validation
failure. ``--json`` switches stdout to machine-readable JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import genai, geometry, mesher, pipeline, postdsl, solver, vtkio
from .errors import (AuthMissing, DslSyntaxError, EvalError, GeometryError,
                     MeshFailure)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROVIDER = 3
EXIT_VALIDATION = 4


def _load_config(args) -> pipeline.RunConfig:
    if getattr(args, "config", None):
        cfg = pipeline.RunConfig.load(args.config)
    else:
        cfg = pipeline.RunConfig()
    provider = getattr(args, "provider", None)
    if provider and provider != cfg.provider.kind:
        if provider == "stub":
            return dataclasses.replace(
                cfg, provider=genai.ProviderConfig(kind="stub"))
        return dataclasses.replace(
            cfg, provider=genai.ProviderConfig(
                kind="http", endpoint=genai.DEFAULT_HTTP_ENDPOINT,
                model=genai.DEFAULT_HTTP_MODEL))
    return cfg


def _print_ladder(report: pipeline.WorkflowReport, out=None):
    out = out if out is not None else sys.stdout
    for layer in pipeline.LAYERS:
        entry = report.verdict[layer]
        print(f"  {layer:<20s} {entry['status']}", file=out)
        for diag in entry["diagnostics"]:
            print(f"      {diag}", file=out)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    session = pipeline.Session(args.out, config=cfg)
    report = pipeline.run_workflow(session, args.prompt, args.mode)
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(f"session: {session.id}")
        _print_ladder(report)
        if report.summary:
            print("\n" + report.summary)
    if report.provider_error and not report.ladder_ok():
        print(f"provider error: {report.provider_error}", file=sys.stderr)
        return EXIT_PROVIDER
    return EXIT_OK if report.ladder_ok() else EXIT_VALIDATION


def cmd_solve(args) -> int:
    try:
        layout = geometry.ConductorLayout.load(args.layout)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load layout: {exc}", file=sys.stderr)
        return EXIT_USAGE
    overlap = geometry.check_overlap(layout)
    if overlap:
        pairs = ", ".join(f"({i}, {j})" for i, j in overlap)
        if args.json:
            print(json.dumps({"schema_version": pipeline.SCHEMA_VERSION,
                              "error": "overlap", "pairs": overlap},
                             sort_keys=True))
        else:
            print(f"overlapping conductor pairs: {pairs}", file=sys.stderr)
        return EXIT_VALIDATION
    excitation = geometry.ExcitationSpec(frequency_Hz=args.freq)
    try:
        mesh = mesher.generate_mesh(layout)
        problem = solver.FEProblem(mesh=mesh, excitation=excitation)
        result = solver.solve_problem(problem)
    except (GeometryError, MeshFailure) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    reports = solver.conductor_report(result, problem)
    total = solver.total_loss(result, problem)
    z = solver.impedance_per_length(result, problem)
    if args.json:
        payload = {
            "schema_version": pipeline.SCHEMA_VERSION,
            "frequency_Hz": args.freq,
            "dof_count": result.dof_count,
            "residual_norm": result.residual_norm,
            "conductors": [
                {"index": rep.index, "current_A": abs(rep.current_A),
                 "u_re": rep.u_V_per_m.real, "u_im": rep.u_V_per_m.imag,
                 "loss_W_per_m": rep.loss_W_per_m}
                for rep in reports],
            "total_loss_W_per_m": total,
            "impedance_per_length": {"R": z.real, "X": z.imag},
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"frequency: {args.freq:g} Hz, dofs: {result.dof_count}, "
              f"residual: {result.residual_norm:.2e}")
        print(f"{'idx':>4s} {'I [A]':>10s} {'Re u [V/m]':>14s} "
              f"{'Im u [V/m]':>14s} {'loss [W/m]':>14s}")
        for rep in reports:
            print(f"{rep.index:>4d} {abs(rep.current_A):>10.4g} "
                  f"{rep.u_V_per_m.real:>14.6e} {rep.u_V_per_m.imag:>14.6e} "
                  f"{rep.loss_W_per_m:>14.6e}")
        print(f"total loss: {total:.6e} W/m")
        print(f"impedance per length: {z.real:.6e} + {z.imag:.6e}j Ohm/m")
    if args.out:
        import os
        os.makedirs(args.out, exist_ok=True)
        mesh.save(os.path.join(args.out, "mesh.json"))
        vtkio.mesh_to_vtk(mesh, os.path.join(args.out, "mesh.vtk"))
        fields = solver.derive_fields(result, problem)
        vtkio.write_unstructured_grid(
            os.path.join(args.out, "solution.vtk"), mesh.nodes,
            mesh.triangles,
            cell_scalars=vtkio.complex_cell_arrays("Jz", fields.J_z),
            title="solution fields")
    return EXIT_OK


def _layer_statuses(diags, parse_error=None):
    layers = {"dsl_syntax": "ok", "dsl_semantics": "ok",
              "physics_syntax": "ok", "physics_semantics": "ok"}
    if parse_error is not None:
        layers["dsl_syntax"] = "failed"
        for layer in ("dsl_semantics", "physics_syntax", "physics_semantics"):
            layers[layer] = "skipped"
        return layers
    for diag in diags:
        if diag.layer == "physics_semantics":
            layers[diag.layer] = "failed"
        elif diag.severity == "error":
            layers[diag.layer] = "failed"
    return layers


def cmd_check(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.layout:
        layout = geometry.ConductorLayout.load(args.layout)
        count = layout.count
    else:
        count = args.conductors
    groups = {"Omega_i": 0, "Gamma_out": count + 1,
              **{f"Omega_c_{k}": k for k in range(1, count + 1)}}
    parse_error = None
    diags = []
    try:
        program = postdsl.parse_post(source)
    except DslSyntaxError as exc:
        parse_error = exc
    else:
        diags = postdsl.validate_post(program, groups)
        if not any(d.severity == "error" for d in diags):
            diags.extend(postdsl.physics_lint(program))
    layers = _layer_statuses(diags, parse_error)
    if args.json:
        payload = {"schema_version": pipeline.SCHEMA_VERSION,
                   "layers": layers,
                   "diagnostics": [
                       {"severity": d.severity, "layer": d.layer,
                        "message": d.message, "line": d.line,
                        "column": d.column} for d in diags]}
        if parse_error is not None:
            payload["diagnostics"].append(
                {"severity": "error", "layer": "dsl_syntax",
                 "message": str(parse_error), "line": parse_error.line,
                 "column": parse_error.column})
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        if parse_error is not None:
            hint = f" ({parse_error.hint})" if parse_error.hint else ""
            print(f"[dsl_syntax] error: {parse_error} at line "
                  f"{parse_error.line}, column {parse_error.column}{hint}")
        for diag in diags:
            print(str(diag))
        for layer, status in layers.items():
            print(f"  {layer:<20s} {status}")
    failed = any(status == "failed" for status in layers.values())
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_repl(args) -> int:
    cfg = _load_config(args)
    print("emsim repl; enter a prompt, or 'exit' to leave.")
    while True:
        try:
            line = input("emsim> ")
        except EOFError:
            print()
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        if line in ("exit", "quit"):
            return EXIT_OK
        session = pipeline.Session(args.out, config=cfg)
        report = pipeline.run_workflow(session, line, args.mode)
        _print_ladder(report)
        if report.summary:
            print("\n" + report.summary)


def cmd_serve(args) -> int:
    import uvicorn

    from . import server
    cfg = _load_config(args)
    app = server.create_app(args.out, cfg)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emsim",
        description="Natural-language driven 2D eddy-current simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="emsim_out",
                       help="artifact directory")
        p.add_argument("--json", action="store_true",
                       help="machine-readable stdout")

    p_run = sub.add_parser("run", help="run one prompt through the workflow")
    p_run.add_argument("--prompt", required=True)
    p_run.add_argument("--mode", choices=pipeline.MODES,
                       default="with_post_and_summary")
    p_run.add_argument("--provider", choices=("stub", "http"))
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_solve = sub.add_parser("solve", help="mesh and solve a saved layout")
    p_solve.add_argument("layout", help="layout JSON file")
    p_solve.add_argument("--freq", type=float,
                         default=geometry.DEFAULT_FREQUENCY_HZ)
    p_solve.add_argument("--out", default="")
    p_solve.add_argument("--json", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_check = sub.add_parser("check", help="check a post-processing file")
    p_check.add_argument("file")
    p_check.add_argument("--layout", help="layout JSON for region names")
    p_check.add_argument("--conductors", type=int, default=1,
                         help="conductor count when no layout is given")
    p_check.add_argument("--json", action="store_true")
    p_check.set_defaults(func=cmd_check)

    p_repl = sub.add_parser("repl", help="interactive prompt loop")
    p_repl.add_argument("--mode", choices=pipeline.MODES,
                        default="with_post_and_summary")
    p_repl.add_argument("--provider", choices=("stub", "http"))
    common(p_repl)
    p_repl.set_defaults(func=cmd_repl)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--provider", choices=("stub", "http"))
    common(p_serve)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AuthMissing as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (EvalError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

"""LLM gateway: prompt templates, completion providers, output cleaning.

Prompt bodies live as versioned text assets next to this module. A body
uses ``{user_input}`` and ``{stage_output}`` as placeholders; every literal
brace is doubled and collapses back to a single brace on rendering, so a
rendered prompt can contain code blocks full of braces.

Two provider kinds exist. ``http`` speaks a minimal chat-completion wire
shape (one system message carrying the whole rendered prompt) against a
configurable endpoint and needs an API key in the environment. ``stub`` is
deterministic and network-free: it keys canned outputs off the request
text, which keeps the whole pipeline reproducible in tests and offline
runs. Stub records use a fixed epoch timestamp for byte-stable artifacts.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources

import requests

from ..errors import (AuthMissing, MissingPlaceholder, ProviderTimeout,
                      ProviderUnavailable)

TEMPLATE_IDS = ("layout_gen", "dsl_with_examples", "dsl_without_examples",
                "summary")
DEFAULT_KEY_ENV = "EMSIM_LLM_API_KEY"
DEFAULT_HTTP_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_HTTP_MODEL = "gpt-4o-mini"
_STUB_TIMESTAMP = "1970-01-01T00:00:00Z"
_PLACEHOLDERS = ("user_input", "stage_output")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    examples: tuple[str, ...] = ()
    version: str = "1"


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = DEFAULT_KEY_ENV
    timeout_s: float = 30.0
    max_retries: int = 2
    kind: str = "stub"

    def __post_init__(self):
        if self.kind not in ("http", "stub"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http provider needs an endpoint")

    def to_json_dict(self):
        return {"endpoint": self.endpoint, "model": self.model,
                "api_key_env": self.api_key_env, "timeout_s": self.timeout_s,
                "max_retries": self.max_retries, "kind": self.kind}

    @classmethod
    def from_json_dict(cls, data):
        return cls(**{k: data[k] for k in
                      ("endpoint", "model", "api_key_env", "timeout_s",
                       "max_retries", "kind") if k in data})


@dataclass(frozen=True)
class CompletionRecord:
    prompt: str
    raw: str
    cleaned: str
    latency_ms: int
    provider: str
    timestamp: str
    retries: int = 0

    def to_json_dict(self):
        return {"prompt": self.prompt, "raw": self.raw,
                "cleaned": self.cleaned, "latency_ms": self.latency_ms,
                "provider": self.provider, "timestamp": self.timestamp,
                "retries": self.retries}


# -- templates --------------------------------------------------------------

def _scan_body(body: str):
    """Split a template body into literal parts and placeholder names."""
    parts: list[str] = []
    names: list[str] = []
    buf: list[str] = []
    i, n = 0, len(body)
    while i < n:
        ch = body[i]
        if ch == "{":
            if body[i + 1:i + 2] == "{":
                buf.append("{")
                i += 2
                continue
            j = body.find("}", i)
            if j < 0:
                raise MissingPlaceholder("unterminated placeholder in template")
            name = body[i + 1:j]
            if name not in _PLACEHOLDERS:
                raise MissingPlaceholder(f"unknown placeholder {{{name}}}")
            parts.append("".join(buf))
            buf = []
            names.append(name)
            i = j + 1
            continue
        if ch == "}":
            if body[i + 1:i + 2] == "}":
                buf.append("}")
                i += 2
                continue
            raise MissingPlaceholder("stray '}' in template (double literal "
                                     "braces)")
        buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts, names


def _audit(template: PromptTemplate):
    parts, names = _scan_body(template.body)
    if names.count("user_input") != 1:
        raise MissingPlaceholder(
            f"template {template.id!r} must contain {{user_input}} exactly "
            f"once, found {names.count('user_input')}")
    if names.count("stage_output") > 1:
        raise MissingPlaceholder(
            f"template {template.id!r} repeats {{stage_output}}")
    return parts, names


def load_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise KeyError(f"unknown template {template_id!r}")
    asset = resources.files(__package__) / "templates" / f"{template_id}.txt"
    text = asset.read_text(encoding="utf-8")
    version = "1"
    lines = text.splitlines()
    while lines and lines[0].startswith("#:"):
        header = lines.pop(0)[2:].strip()
        if header.startswith("version "):
            version = header.split(None, 1)[1]
    body = "\n".join(lines).lstrip("\n")
    examples = tuple(m.group(0).strip() for m in re.finditer(
        r"^Example \d+:.*?(?=^Example \d+:|^The |\Z)", body,
        re.MULTILINE | re.DOTALL))
    template = PromptTemplate(id=template_id, body=body, examples=examples,
                              version=version)
    _audit(template)
    return template


def render_prompt(template: PromptTemplate, user_input: str,
                  context: dict | None = None) -> str:
    """Substitute placeholders; blank input is rejected before any call."""
    if not user_input or not user_input.strip():
        raise MissingPlaceholder("blank user input")
    context = context or {}
    parts, names = _audit(template)
    values = []
    for name in names:
        if name == "user_input":
            values.append(user_input)
        elif name in context:
            values.append(str(context[name]))
        else:
            raise MissingPlaceholder(f"no value for {{{name}}}")
    out = [parts[0]]
    for value, part in zip(values, parts[1:]):
        out.append(value)
        out.append(part)
    return "".join(out)


# -- output cleaning --------------------------------------------------------

_BLANK_EDGE_RE = (re.compile(r"\A(?:[ \t]*\r?\n)+"),
                  re.compile(r"(?:\r?\n[ \t]*)+\Z"))


def clean_output(raw: str) -> str:
    """Strip code fences and edge blank lines; idempotent, nothing else."""
    text = raw
    while True:
        text = _BLANK_EDGE_RE[0].sub("", text)
        text = _BLANK_EDGE_RE[1].sub("", text)
        lines = text.split("\n")
        if lines and lines[0].strip().startswith("```"):
            lines = lines[1:]
            if lines and lines[-1].strip() == "```":
                lines = lines[:-1]
            text = "\n".join(lines)
            continue
        return text


# -- canned stub outputs ----------------------------------------------------

_LAYOUT_SINGLE = """```
emit point(0.0, 0.0)
```"""

_LAYOUT_THREE_POINTS = """emit point(0.0, 0.0)
emit point(0.02, 0.0)
emit point(0.0, 0.02)"""

_LAYOUT_CIRCLE_12 = """for i in 0..12 {
    emit point(0.03 * cos(2 * pi * i / 12), 0.03 * sin(2 * pi * i / 12))
}"""

_LAYOUT_CIRCLE_10 = """for i in 0..10 {
    emit point(0.02 * cos(2 * pi * i / 10), 0.02 * sin(2 * pi * i / 10))
}"""

_LAYOUT_HEX_GRID = """let s = 0.02
for i in 0..10 {
    for j in 0..10 {
        emit point(i * s + (j - 2 * floor(j / 2)) * s / 2, j * s * sqrt(3) / 2)
    }
}"""

_LAYOUT_Y_AXIS_10 = """for i in 0..10 {
    emit point(0.0, i * 0.012)
}"""

_LAYOUT_SINUS_12 = """for i in 0..12 {
    emit point(0.2 * i / 11, 0.05 * sin(2 * pi * (0.2 * i / 11) / 0.2))
}"""

_LAYOUT_SQUARE_5 = """emit point(0.0, 0.0)
emit point(0.05, 0.0)
emit point(0.05, 0.05)
emit point(0.0, 0.05)
emit point(0.025, 0.025)"""

_LAYOUT_LETTER_A = """emit point(0.0, 0.0)
emit point(0.015, 0.03)
emit point(0.03, 0.06)
emit point(0.045, 0.09)
emit point(0.06, 0.12)
emit point(0.12, 0.0)
emit point(0.105, 0.03)
emit point(0.09, 0.06)
emit point(0.075, 0.09)
emit point(0.025, 0.045)
emit point(0.04, 0.045)
emit point(0.055, 0.045)
emit point(0.07, 0.045)
emit point(0.085, 0.045)
emit point(0.1, 0.045)"""

_LAYOUT_TRAPEZOID = """emit point(0.0, 0.0)
emit point(0.015, 0.0)
emit point(0.03, 0.0)
emit point(0.045, 0.0)
emit point(0.06, 0.0)
emit point(0.0075, 0.015)
emit point(0.0225, 0.015)
emit point(0.0375, 0.015)
emit point(0.0525, 0.015)
emit point(0.015, 0.03)
emit point(0.03, 0.03)
emit point(0.045, 0.03)
emit point(0.0225, 0.045)
emit point(0.0375, 0.045)"""

_LAYOUT_BROKEN = """for i in 0..3 {
    emit point(i * 0.02, 0.0)"""

_LAYOUT_DIV_ZERO = """let x = 1 / 0
emit point(x, 0.0)"""

_LAYOUT_OVERLAP = """emit point(0.0, 0.0)
emit point(0.004, 0.0)"""

_LAYOUT_EMPTY = """let spacing = 0.02"""

_DSL_LOSS_C1 = """PostProcessing {
    { Name MagDyn_b ; NameOfFormulation MagDyn_a ;
        PostQuantity {
            { Name OhmicLossDensity_conductor_1 ; Value { Local { [ sigma[]/2 * Norm[ (- Dt[{a}] - {grad_phi}) ]^2 ] ; In Region[{Omega_c_1}] ; Jacobian Vol ; } } }
        }
    }
}
PostOperation {
    { Name MagDyn_b ; NameOfPostProcessing MagDyn_b ;
        Operation {
            Print[ OhmicLossDensity_conductor_1 , OnElementsOf Omega , File "Results/p_V_conductor_selected.pos" , Name "p_V_c_1(xyz) [W/m^3] " , Format Gmsh ];
        }
    }
}"""

_DSL_EVERY_SECOND = """PostProcessing {
    { Name MagDyn_b ; NameOfFormulation MagDyn_a ;
        PostQuantity {
            { Name OhmicLossDensity_every_second ; Value { Local { [ sigma[]/2 * Norm[ (- Dt[{a}] - {grad_phi}) ]^2 ] ; In Region[{Omega_c_1, Omega_c_3, Omega_c_5, Omega_c_7, Omega_c_9}] ; Jacobian Vol ; } } }
        }
    }
}
PostOperation {
    { Name MagDyn_b ; NameOfPostProcessing MagDyn_b ;
        Operation {
            Print[ OhmicLossDensity_every_second , OnElementsOf Omega , File "Results/p_V_every_second.pos" , Name "p_V_every_second(xyz) [W/m^3] " , Format Gmsh ];
        }
    }
}"""

_DSL_H_FIELD = """PostProcessing {
    { Name MagDyn_c ; NameOfFormulation MagDyn_a ;
        PostQuantity {
            { Name h_vector_field ; Value { Term { [ nu[] * {d a} ] ; In Omega ; Jacobian Vol ; } } }
        }
    }
}
PostOperation {
    { Name MagDyn_c ; NameOfPostProcessing MagDyn_c ;
        Operation {
            Print[ h_vector_field , OnElementsOf Omega , File "Results/h_vector_field.pos" , Name "H(xyz) [A/m] " , Format Gmsh ];
        }
    }
}"""

_DSL_ENERGY_DIAGONAL = """PostProcessing {
    { Name MagDyn_c ; NameOfFormulation MagDyn_a ;
        PostQuantity {
            { Name MagneticEnergyDensity_Diagonal ; Value { Local { [ 0.25 * nu[] * Norm[{d a}]^2 ] ; In Region[{Omega_c_1, Omega_c_5, Omega_c_9}] ; Jacobian Vol ; } } }
        }
    }
}
PostOperation {
    { Name MagDyn_c ; NameOfPostProcessing MagDyn_c ;
        Operation {
            Print[ MagneticEnergyDensity_Diagonal , OnElementsOf Omega , File "Results/magnetic_energy_density_diagonal.pos" , Name "w_m_diagonal(xyz) [J/m^3]" , Format Gmsh ];
        }
    }
}"""

_DSL_UNBALANCED = _DSL_LOSS_C1[:_DSL_LOSS_C1.rindex("}")]

_DSL_UNKNOWN_REGION = _DSL_LOSS_C1.replace("Omega_c_1", "Omega_c_9")

_DSL_WRONG_FACTOR = _DSL_ENERGY_DIAGONAL.replace("0.25 *", "0.5 *")

_DSL_KIND_ERROR = _DSL_H_FIELD.replace("[ nu[] * {d a} ]",
                                       "[ Norm[{a}] + {d a} ]")

_LAYOUT_RULES = (
    (("12", "circle"), _LAYOUT_CIRCLE_12),
    (("hexagonal",), _LAYOUT_HEX_GRID),
    (("100", "grid"), _LAYOUT_HEX_GRID),
    (("10", "circle"), _LAYOUT_CIRCLE_10),
    (("one conductor",), _LAYOUT_SINGLE),
    (("single conductor",), _LAYOUT_SINGLE),
    (("vertices of a square",), _LAYOUT_SQUARE_5),
    (("letter",), _LAYOUT_LETTER_A),
    (("trapezoidal",), _LAYOUT_TRAPEZOID),
    (("10", "y-axis"), _LAYOUT_Y_AXIS_10),
    (("sinus",), _LAYOUT_SINUS_12),
    (("curve",), _LAYOUT_SINUS_12),
    (("unterminated",), _LAYOUT_BROKEN),
    (("division by zero",), _LAYOUT_DIV_ZERO),
    (("divide by zero",), _LAYOUT_DIV_ZERO),
    (("overlap",), _LAYOUT_OVERLAP),
    (("no points",), _LAYOUT_EMPTY),
    (("initial points",), _LAYOUT_THREE_POINTS),
)

_DSL_RULES = (
    (("every second",), _DSL_EVERY_SECOND),
    (("vector field",), _DSL_H_FIELD),
    (("unbalanced",), _DSL_UNBALANCED),
    (("unknown region",), _DSL_UNKNOWN_REGION),
    (("wrong factor",), _DSL_WRONG_FACTOR),
    (("mixed kinds",), _DSL_KIND_ERROR),
    (("energy",), _DSL_ENERGY_DIAGONAL),
    (("first conductor",), _DSL_LOSS_C1),
)


def _request_text(prompt: str) -> str:
    marker = "The user input is:"
    idx = prompt.rfind(marker)
    text = prompt[idx + len(marker):] if idx >= 0 else prompt
    return text.strip().lower()


def _stub_raw(prompt: str) -> str:
    request = _request_text(prompt)
    if "layout script that emits" in prompt:
        rules = _LAYOUT_RULES
        fallback = _LAYOUT_THREE_POINTS
    elif "PostProcessing and PostOperation" in prompt:
        rules = _DSL_RULES
        fallback = _DSL_LOSS_C1
    else:
        return "The simulation completed; see the fact sheet for details."
    for keywords, canned in rules:
        if all(k in request for k in keywords):
            return canned
    return fallback


def _stub_completion(prompt: str) -> CompletionRecord:
    raw = _stub_raw(prompt)
    return CompletionRecord(prompt=prompt, raw=raw, cleaned=clean_output(raw),
                            latency_ms=0, provider="stub",
                            timestamp=_STUB_TIMESTAMP, retries=0)


# -- HTTP provider ----------------------------------------------------------

def _http_completion(config: ProviderConfig, prompt: str) -> CompletionRecord:
    key = os.environ.get(config.api_key_env, "")
    if not key:
        raise AuthMissing(f"environment variable {config.api_key_env} is "
                          f"not set")
    payload = {"model": config.model,
               "messages": [{"role": "system", "content": prompt}]}
    headers = {"Authorization": f"Bearer {key}",
               "Content-Type": "application/json"}
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        start = time.monotonic()
        try:
            resp = requests.post(config.endpoint, json=payload,
                                 headers=headers, timeout=config.timeout_s)
        except requests.Timeout as exc:
            last_error = ProviderTimeout(str(exc))
            continue
        except requests.RequestException as exc:
            last_error = ProviderUnavailable(str(exc))
            continue
        if resp.status_code >= 500:
            last_error = ProviderUnavailable(
                f"server error {resp.status_code}")
            continue
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"request rejected "
                                      f"({resp.status_code}): {resp.text}")
        latency_ms = int((time.monotonic() - start) * 1000)
        try:
            data = resp.json()
        except Exception:
            data = None
        try:
            text = data["choices"][0]["message"]["content"]
        except Exception:
            text = None
        if text is None and isinstance(data, dict):
            text = data.get("content") or data.get("text")
        if not isinstance(text, str):
            raise ProviderUnavailable("unrecognized response shape")
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return CompletionRecord(prompt=prompt, raw=text,
                                cleaned=clean_output(text),
                                latency_ms=latency_ms, provider="http",
                                timestamp=stamp, retries=attempt)
    raise last_error if last_error else ProviderUnavailable("no attempts made")


def complete(config: ProviderConfig, prompt: str) -> CompletionRecord:
    if config.kind == "stub":
        return _stub_completion(prompt)
    return _http_completion(config, prompt)


# -- summaries --------------------------------------------------------------

def render_fact_text(facts) -> str:
    """Plain fact-sheet rendering; the numbers all come from the solver."""
    lines = [f"conductor count: {facts.conductor_count}",
             f"arrangement: {facts.layout_descriptor}",
             f"conductor radius: {facts.conductor_radius_m} m",
             f"boundary radius: {facts.boundary_radius_m:.6g} m",
             f"frequency: {facts.frequency_Hz:g} Hz",
             f"skin depth: {facts.skin_depth_m:.6g} m"]
    for cond in facts.conductors:
        lines.append(
            f"conductor {cond['index']}: center ({cond['center'][0]:.6g}, "
            f"{cond['center'][1]:.6g}), current {cond['current_A']:g} A, "
            f"loss {cond['loss_W_per_m']:.6g} W/m")
    lines.append(f"total loss: {facts.total_loss_W_per_m:.6g} W/m")
    for art in facts.artifacts:
        lines.append(f"artifact: {art['quantity']} ({art['label'].strip()})")
    return "\n".join(lines)


def _stub_summary(facts) -> str:
    n = facts.conductor_count
    radius_mm = facts.conductor_radius_m * 1e3
    parts = [f"The model contains {n} conductor{'s' if n != 1 else ''} of "
             f"radius {radius_mm:g} mm ({facts.layout_descriptor})."]
    currents = {f"{c['current_A']:.9g}" for c in facts.conductors}
    if len(currents) == 1:
        amp = float(next(iter(currents)))
        parts.append(f"Each conductor carries a sinusoidal current of "
                     f"{amp:g} A at {facts.frequency_Hz:g} Hz.")
    else:
        parts.append(f"The conductors carry individual sinusoidal currents "
                     f"at {facts.frequency_Hz:g} Hz.")
    depth_mm = facts.skin_depth_m * 1e3
    if facts.skin_depth_m > facts.conductor_radius_m:
        parts.append(f"The skin depth of {depth_mm:.3g} mm exceeds the "
                     f"conductor radius, so the current density stays close "
                     f"to uniform across each conductor despite the skin "
                     f"effect.")
    else:
        parts.append(f"The skin depth of {depth_mm:.3g} mm is smaller than "
                     f"the conductor radius, so the skin effect crowds the "
                     f"current toward each conductor surface.")
    if n > 1:
        parts.append("Because several conductors carry current, the "
                     "proximity effect additionally redistributes the "
                     "current density according to the fields of the "
                     "neighbouring conductors.")
    losses = "; ".join(f"conductor {c['index']}: {c['loss_W_per_m']:.4g} W/m"
                       for c in facts.conductors)
    parts.append(f"Ohmic losses per unit length: {losses}; total "
                 f"{facts.total_loss_W_per_m:.4g} W/m.")
    for art in facts.artifacts:
        label = art["label"].strip() or art["quantity"]
        parts.append(f"A field map of {art['quantity']} ({label}) was "
                     f"written for region {art.get('region', 'Omega')}.")
    return " ".join(parts)


def summarize(config: ProviderConfig, facts,
              first_stage: CompletionRecord | None = None) -> CompletionRecord:
    """Second-stage textual summary of a completed simulation.

    Returns the full completion record so callers can log it next to the
    layout and DSL stages; the summary text is its ``cleaned`` field.
    """
    template = load_template("summary")
    stage_text = first_stage.cleaned if first_stage is not None else ""
    prompt = render_prompt(template, render_fact_text(facts),
                           {"stage_output": stage_text})
    if config is None or config.kind == "stub":
        text = _stub_summary(facts)
        return CompletionRecord(prompt=prompt, raw=text,
                                cleaned=clean_output(text), latency_ms=0,
                                provider="stub", timestamp=_STUB_TIMESTAMP)
    return complete(config, prompt)

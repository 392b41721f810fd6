import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { mount } from "../src/app.js";
import type { ReportJson, SessionStatus } from "../src/types.js";
import { RecordingPainter, emptyReport, verdictWith } from "./helpers.js";

/** In-memory stand-in for the service; tests flip its status/report. */
class FakeServer {
  status: SessionStatus = "idle";
  report: ReportJson | null = null;
  messagePosts = 0;
  rejectWith: { status: number; detail: string } | null = null;

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), {
        status, headers: { "content-type": "application/json" } });

    if (method === "POST" && url.endsWith("/api/sessions")) {
      return json({ schema_version: 1, id: "s1" }, 201);
    }
    if (method === "POST" && url.endsWith("/messages")) {
      this.messagePosts += 1;
      if (this.rejectWith) {
        return json({ detail: this.rejectWith.detail },
                    this.rejectWith.status);
      }
      this.status = "running";
      return json({ schema_version: 1, run_id: "s1-r1" }, 202);
    }
    if (url.endsWith("/report")) {
      if (this.report === null) return new Response(null, { status: 204 });
      return json(this.report);
    }
    if (url.includes("/fields/")) {
      return json({ detail: "no solved model in this session" }, 404);
    }
    if (url.endsWith("/api/sessions/s1")) {
      return json({ schema_version: 1, id: "s1", status: this.status });
    }
    return json({ detail: `unexpected ${method} ${url}` }, 500);
  };
}

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

describe("app", () => {
  let server: FakeServer;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    server = new FakeServer();
  });

  async function mountApp() {
    return mount(document, {
      api: new ApiClient("", server.fetch),
      pollIntervalMs: 5,
      painter: () => new RecordingPainter(),
    });
  }

  it("shows a notice for a blank prompt and sends nothing", async () => {
    const app = await mountApp();
    el<HTMLTextAreaElement>("prompt-input").value = "   ";
    el<HTMLFormElement>("prompt-form").dispatchEvent(
      new Event("submit", { cancelable: true }));
    await app.whenSettled();
    expect(el("notice").hidden).toBe(false);
    expect(el("notice").textContent).toContain("enter a prompt");
    expect(server.messagePosts).toBe(0);
  });

  it("disables input while running and re-enables on done", async () => {
    const app = await mountApp();
    el<HTMLTextAreaElement>("prompt-input").value = "one conductor";
    el<HTMLFormElement>("prompt-form").dispatchEvent(
      new Event("submit", { cancelable: true }));
    await app.whenSettled();
    expect(server.messagePosts).toBe(1);
    expect(el("status").textContent).toBe("running");
    expect(el<HTMLTextAreaElement>("prompt-input").disabled).toBe(true);
    expect(el<HTMLButtonElement>("send").disabled).toBe(true);

    // sending again while running must not hit the server
    el<HTMLFormElement>("prompt-form").dispatchEvent(
      new Event("submit", { cancelable: true }));
    await app.whenSettled();
    expect(server.messagePosts).toBe(1);

    server.status = "done";
    server.report = emptyReport({ summary: "a quiet little layout" });
    await vi.waitFor(() => {
      expect(el("summary-text")?.textContent).toBe("a quiet little layout");
    });
    await app.whenSettled();
    expect(el<HTMLTextAreaElement>("prompt-input").disabled).toBe(false);
    expect(document.querySelectorAll(".ladder-row")).toHaveLength(10);
    const log = Array.from(document.querySelectorAll(".msg-system"))
      .map((n) => n.textContent);
    expect(log).toContain("system: status: running");
    expect(log).toContain("system: status: done");
  });

  it("surfaces a server rejection as an inline notice", async () => {
    const app = await mountApp();
    server.rejectWith = { status: 422, detail: "text is blank" };
    el<HTMLTextAreaElement>("prompt-input").value = "something";
    el<HTMLFormElement>("prompt-form").dispatchEvent(
      new Event("submit", { cancelable: true }));
    await app.whenSettled();
    expect(el("notice").hidden).toBe(false);
    expect(el("notice").textContent).toContain("text is blank");
    expect(el("status").textContent).toBe("idle");
  });

  it("falls back to an empty state when no field data exists", async () => {
    const app = await mountApp();
    el<HTMLTextAreaElement>("prompt-input").value = "broken fixture";
    el<HTMLFormElement>("prompt-form").dispatchEvent(
      new Event("submit", { cancelable: true }));
    await app.whenSettled();
    server.status = "done";
    server.report = emptyReport({
      verdict: verdictWith({ layout_syntax: "failed" }, "skipped"),
    });
    await vi.waitFor(() => {
      expect(el<HTMLCanvasElement>("canvas").dataset.empty)
        .toContain("no field data");
    });
    await app.whenSettled();
  });
});

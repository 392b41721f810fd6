import { ApiClient } from "./api.js";
import type { ReportJson, SessionStatus } from "./types.js";

export interface PollEvents {
  onStatus(status: SessionStatus): void;
  onReport(report: ReportJson): void;
  onError(err: unknown): void;
}

/** Polls a session until its run settles. At most one timer exists per
 * poller; starting again first stops the previous loop. */
export class ReportPoller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;

  constructor(private api: ApiClient, private intervalMs = 500) {}

  start(sessionId: string, events: PollEvents): void {
    this.stop();
    this.stopped = false;
    const tick = async () => {
      if (this.stopped) return;
      try {
        const info = await this.api.status(sessionId);
        events.onStatus(info.status);
        if (info.status === "running") {
          this.schedule(tick);
          return;
        }
        const report = await this.api.report(sessionId);
        if (report === null && info.status !== "failed") {
          // run finished between the two requests; look again shortly
          this.schedule(tick);
          return;
        }
        this.stopped = true;
        if (report !== null) events.onReport(report);
      } catch (err) {
        this.stopped = true;
        events.onError(err);
      }
    };
    void tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private schedule(tick: () => Promise<void>): void {
    this.timer = setTimeout(() => {
      this.timer = null;
      void tick();
    }, this.intervalMs);
  }
}

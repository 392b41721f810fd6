import type { RangeMode } from "./colormap.js";
import type { ReportJson, SessionStatus } from "./types.js";

export interface ChatMessage {
  role: "user" | "system";
  text: string;
}

/** Everything the view needs; populated only from server responses. */
export interface ChatViewState {
  sessionId: string | null;
  messages: ChatMessage[];
  status: SessionStatus;
  report: ReportJson | null;
  selectedField: string;
  rangeMode: RangeMode;
  fixedMin: number;
  fixedMax: number;
}

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    messages: [],
    status: "idle",
    report: null,
    selectedField: "Jz_abs",
    rangeMode: "auto",
    fixedMin: 0,
    fixedMax: 1,
  };
}

export function pushMessage(state: ChatViewState, role: "user" | "system",
                            text: string): void {
  state.messages.push({ role, text });
}

/** Record a status change as a system message so the transcript shows the
 * idle -> running -> done/failed progression. */
export function setStatus(state: ChatViewState, status: SessionStatus): void {
  if (state.status === status) return;
  state.status = status;
  pushMessage(state, "system", `status: ${status}`);
}

// Pure view-state transitions. Rendering reads this and nothing else,
// which keeps every displayed status traceable to an API payload or to
// the one explicit optimistic marker ("Cancelling…").

import type {
  CaseRow,
  CaseStatusName,
  EventBatch,
  SecondaryPayload,
  StudySummary,
} from "./types.js";

export const CANCELLING = "Cancelling…";

export interface ChartSelection {
  x: string;
  y: string;
  group: string;
}

export interface ViewState {
  studies: StudySummary[];
  selected: string | null;
  cases: CaseRow[];
  secondary: SecondaryPayload | null;
  chart: ChartSelection | null;
  /** Event cursor for the selected study's stream. Never decreases. */
  cursor: number;
  /** Case ids whose cancel request has not been confirmed by the API yet. */
  cancelling: Set<string>;
  banner: string | null;
  toast: string | null;
}

export function initialState(): ViewState {
  return {
    studies: [],
    selected: null,
    cases: [],
    secondary: null,
    chart: null,
    cursor: 0,
    cancelling: new Set(),
    banner: null,
    toast: null,
  };
}

/** Replace the study list with the latest snapshot. Counts are never
 * recomputed client side; they always come from the server. */
export function applyStudies(state: ViewState, studies: StudySummary[]): ViewState {
  return { ...state, studies };
}

/** Switch study: a different event stream, so the cursor restarts. */
export function selectStudy(state: ViewState, name: string | null): ViewState {
  if (name === state.selected) return state;
  return {
    ...state,
    selected: name,
    cases: [],
    secondary: null,
    chart: null,
    cursor: 0,
    cancelling: new Set(),
  };
}

const TERMINAL: ReadonlySet<CaseStatusName> = new Set([
  "Succeeded",
  "Failed",
  "Cancelled",
]);

export function applyCases(state: ViewState, cases: CaseRow[]): ViewState {
  // an authoritative snapshot reconciles optimistic markers
  const cancelling = new Set(
    [...state.cancelling].filter((id) => {
      const row = cases.find((c) => c.id === id);
      return row !== undefined && !TERMINAL.has(row.status);
    }),
  );
  return { ...state, cases, cancelling };
}

export function applySecondary(
  state: ViewState,
  secondary: SecondaryPayload | null,
): ViewState {
  const chart =
    state.chart && secondary && chartValid(secondary, state.chart)
      ? state.chart
      : secondary
        ? defaultChart(secondary)
        : null;
  return { ...state, secondary, chart };
}

function chartValid(table: SecondaryPayload, sel: ChartSelection): boolean {
  return (
    table.columns.includes(sel.x) &&
    table.result_columns.includes(sel.y) &&
    table.metadata_columns.includes(sel.group)
  );
}

/** Metadata columns group, result columns plot: first numeric result is y,
 * the x default prefers a second numeric result over reusing y. */
export function defaultChart(table: SecondaryPayload): ChartSelection | null {
  const numeric = (c: string) => table.column_types[c] !== "str";
  const results = table.result_columns.filter(numeric);
  const groups = table.metadata_columns;
  if (results.length === 0 || groups.length === 0) return null;
  const y = results[results.length - 1]!;
  const x = results.find((c) => c !== y) ?? table.columns.find(numeric) ?? y;
  // prefer a group that actually partitions the rows
  const varied = groups.find((g) => {
    const i = table.columns.indexOf(g);
    return new Set(table.rows.map((r) => r[i])).size > 1;
  });
  return { x, y, group: varied ?? groups[0]! };
}

export function setChart(state: ViewState, chart: ChartSelection): ViewState {
  return { ...state, chart };
}

function statusFromEvent(kind: string, detail: string): CaseStatusName | null {
  switch (kind) {
    case "CaseStarted":
      return "Running";
    case "CaseFinished":
      return detail === "exit 0" ? "Succeeded" : "Failed";
    case "CaseCancelled":
      return "Cancelled";
    default:
      return null;
  }
}

export interface EventOutcome {
  state: ViewState;
  /** Case ids whose displayed status changed (render hint). */
  changed: string[];
  /** True when a case or the study reached a terminal state. */
  finished: boolean;
}

/** Merge an event batch into the state. The cursor only moves forward,
 * even if a stale response arrives out of order. */
export function applyEvents(state: ViewState, batch: EventBatch): EventOutcome {
  const changed: string[] = [];
  let finished = false;
  if (batch.study !== state.selected) {
    return { state, changed, finished };
  }
  const byId = new Map(state.cases.map((c) => [c.id, c]));
  const cancelling = new Set(state.cancelling);
  for (const event of batch.events) {
    if (event.kind === "StudyFinished") {
      finished = true;
      continue;
    }
    const status = statusFromEvent(event.kind, event.detail);
    if (status === null || event.case_id === "") continue;
    const row = byId.get(event.case_id);
    if (row === undefined || row.status === status) continue;
    byId.set(event.case_id, { ...row, status });
    changed.push(event.case_id);
    if (TERMINAL.has(status)) {
      finished = true;
      cancelling.delete(event.case_id);
    }
  }
  const next: ViewState = {
    ...state,
    cases: changed.length ? state.cases.map((c) => byId.get(c.id) ?? c) : state.cases,
    cancelling,
    cursor: Math.max(state.cursor, batch.latest_seq),
  };
  return { state: next, changed, finished };
}

export function markCancelling(state: ViewState, caseId: string): ViewState {
  const cancelling = new Set(state.cancelling);
  cancelling.add(caseId);
  return { ...state, cancelling };
}

/** What the badge shows: the optimistic marker wins until reconciled. */
export function displayedStatus(state: ViewState, row: CaseRow): string {
  return state.cancelling.has(row.id) ? CANCELLING : row.status;
}

export function setBanner(state: ViewState, banner: string | null): ViewState {
  return state.banner === banner ? state : { ...state, banner };
}

export function setToast(state: ViewState, toast: string | null): ViewState {
  return { ...state, toast };
}

// Payload shapes of the status API, schema 1.

export type CaseStatusName =
  | "Pending"
  | "Running"
  | "Succeeded"
  | "Failed"
  | "Cancelled";

export type StatusCounts = Record<CaseStatusName, number>;

export interface StudySummary {
  name: string;
  total: number;
  counts: StatusCounts;
  latest_seq: number;
  started_at: string | null;
  finished_at: string | null;
}

export interface StudyDetail extends StudySummary {
  mode: string;
  varied: string[];
  constants: Record<string, unknown>;
}

export interface CaseRow {
  id: string;
  status: CaseStatusName;
  params: Record<string, unknown>;
}

export interface CasesPayload {
  study: string;
  cases: CaseRow[];
}

export type ColumnType = "int" | "float" | "str";

// Cells are typed per column_types; non-finite floats arrive as the
// strings "nan" / "inf" / "-inf" because JSON has no literal for them.
export type Cell = string | number | boolean;

export interface SecondaryPayload {
  study: string;
  columns: string[];
  metadata_columns: string[];
  result_columns: string[];
  column_types: Record<string, ColumnType>;
  rows: Cell[][];
}

export interface EventRecord {
  seq: number;
  time: string;
  kind:
    | "StudyStarted"
    | "CaseStarted"
    | "CaseFinished"
    | "CaseCancelled"
    | "StudyFinished";
  case_id: string;
  detail: string;
}

export interface EventBatch {
  study: string;
  since: number;
  events: EventRecord[];
  latest_seq: number;
}

export interface CancelAck {
  study: string;
  case_id: string;
  action: "requested" | "cancelled" | "noop";
  status: string;
}

/** Wire types mirroring the detection service payloads. */

export type SpanCategory = "COL" | "VAL" | "AMB" | "UNK";

export type Verdict = "answerable" | "ambiguous" | "unanswerable";

export interface CandidatePayload {
  kind: "column" | "value";
  text: string;
  column: string;
  score: number;
}

export interface SpanPayload {
  /** Character offsets into the submitted question, end-exclusive. */
  start: number;
  end: number;
  category: SpanCategory;
  candidates: CandidatePayload[];
}

export interface DetectPayload {
  labels: string[];
  spans: SpanPayload[];
  verdict: Verdict;
  response: string;
}

export interface TablePayload {
  table_id: string;
  columns: string[];
  cells: Record<string, string[]>;
}

export interface TablesPayload {
  tables: TablePayload[];
}

/** Split a question into render segments from service span offsets.
 *
 * Offsets are used verbatim -- the client never re-tokenizes. A malformed
 * payload (out-of-range or overlapping spans) throws, which the app turns
 * into an error banner.
 */

import type { CandidatePayload, SpanCategory, SpanPayload } from "./types.js";

export interface Segment {
  text: string;
  start: number;
  end: number;
  /** null for plain text between highlighted spans */
  category: SpanCategory | null;
  candidates: CandidatePayload[];
}

export function segmentQuestion(question: string, spans: SpanPayload[]): Segment[] {
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  const segments: Segment[] = [];
  let cursor = 0;
  for (const span of ordered) {
    if (span.start < 0 || span.end > question.length || span.start >= span.end) {
      throw new Error(`span offsets [${span.start}, ${span.end}) outside question`);
    }
    if (span.start < cursor) {
      throw new Error(`overlapping spans at offset ${span.start}`);
    }
    if (span.start > cursor) {
      segments.push({
        text: question.slice(cursor, span.start),
        start: cursor,
        end: span.start,
        category: null,
        candidates: [],
      });
    }
    segments.push({
      text: question.slice(span.start, span.end),
      start: span.start,
      end: span.end,
      category: span.category,
      candidates: span.candidates,
    });
    cursor = span.end;
  }
  if (cursor < question.length) {
    segments.push({
      text: question.slice(cursor),
      start: cursor,
      end: question.length,
      category: null,
      candidates: [],
    });
  }
  return segments;
}

/** Replace a span with the chosen column name for the next submission. */
export function rewriteSpan(
  question: string,
  span: { start: number; end: number },
  replacement: string,
): string {
  return question.slice(0, span.start) + replacement + question.slice(span.end);
}

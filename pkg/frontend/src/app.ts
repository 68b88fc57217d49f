/** Ask -> explain -> revise loop against the detection service. */

import { ApiError, detect, fetchTables } from "./api.js";
import { rewriteSpan, segmentQuestion } from "./highlight.js";
import type { DetectPayload, TablePayload } from "./types.js";

const SAMPLE_VALUES = 5;

interface HistoryEntry {
  question: string;
  verdict: string;
}

export class App {
  private readonly root: Document;
  private readonly base: string;
  private tables: TablePayload[] = [];
  private history: HistoryEntry[] = [];
  private pending = false;

  constructor(root: Document, base = "") {
    this.root = root;
    this.base = base;
  }

  async start(): Promise<void> {
    this.select.addEventListener("change", () => this.renderPreview());
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    try {
      const payload = await fetchTables(this.base);
      this.tables = payload.tables;
      this.renderTableOptions();
      this.renderPreview();
    } catch (error) {
      this.showError(error);
    }
  }

  get select(): HTMLSelectElement {
    return this.root.querySelector("#table-select") as HTMLSelectElement;
  }

  get form(): HTMLFormElement {
    return this.root.querySelector("#ask-form") as HTMLFormElement;
  }

  get questionBox(): HTMLTextAreaElement {
    return this.root.querySelector("#question") as HTMLTextAreaElement;
  }

  get submitButton(): HTMLButtonElement {
    return this.root.querySelector("#submit") as HTMLButtonElement;
  }

  private element(id: string): HTMLElement {
    return this.root.querySelector(id) as HTMLElement;
  }

  private renderTableOptions(): void {
    const select = this.select;
    select.innerHTML = "";
    for (const table of this.tables) {
      const option = this.root.createElement("option");
      option.value = table.table_id;
      option.textContent = table.table_id;
      select.appendChild(option);
    }
  }

  renderPreview(): void {
    const table = this.tables.find((t) => t.table_id === this.select.value);
    const preview = this.element("#table-preview");
    preview.innerHTML = "";
    if (!table) {
      return;
    }
    for (const column of table.columns) {
      const entry = this.root.createElement("div");
      entry.className = "preview-column";
      const name = this.root.createElement("span");
      name.className = "column-name";
      name.textContent = column;
      entry.appendChild(name);
      const values = (table.cells[column] ?? []).slice(0, SAMPLE_VALUES);
      if (values.length > 0) {
        const samples = this.root.createElement("span");
        samples.className = "column-samples";
        samples.textContent = values.join(" · ");
        entry.appendChild(samples);
      }
      preview.appendChild(entry);
    }
  }

  async submit(): Promise<void> {
    if (this.pending) {
      return;
    }
    const question = this.questionBox.value;
    const tableId = this.select.value;
    if (!question.trim() || !tableId) {
      return;
    }
    this.pending = true;
    this.submitButton.disabled = true;
    this.hideError();
    try {
      const payload = await detect(tableId, question, this.base);
      this.renderDetection(question, payload);
      this.history.unshift({ question, verdict: payload.verdict });
      this.renderHistory();
    } catch (error) {
      // input is preserved; only the banner changes
      this.showError(error);
    } finally {
      this.pending = false;
      this.submitButton.disabled = false;
    }
  }

  renderDetection(question: string, payload: DetectPayload): void {
    const result = this.element("#result");
    const verdict = this.element("#verdict");
    const highlighted = this.element("#highlighted");
    const explanation = this.element("#explanation");
    const chips = this.element("#chips");
    result.classList.remove("hidden");
    verdict.textContent = payload.verdict;
    verdict.className = `verdict verdict-${payload.verdict}`;
    highlighted.innerHTML = "";
    chips.innerHTML = "";

    const spans = payload.verdict === "answerable" ? [] : payload.spans;
    for (const segment of segmentQuestion(question, spans)) {
      const piece = this.root.createElement("span");
      piece.textContent = segment.text;
      if (segment.category !== null) {
        piece.className = `span-${segment.category.toLowerCase()}`;
        piece.dataset.start = String(segment.start);
        piece.dataset.end = String(segment.end);
      }
      highlighted.appendChild(piece);
    }

    explanation.textContent = payload.response;

    for (const span of payload.spans) {
      if (span.category !== "AMB") {
        continue;
      }
      for (const candidate of span.candidates) {
        const chip = this.root.createElement("button");
        chip.type = "button";
        chip.className = "chip";
        chip.textContent = candidate.text;
        chip.addEventListener("click", () => {
          this.questionBox.value = rewriteSpan(this.questionBox.value, span, candidate.text);
        });
        chips.appendChild(chip);
      }
    }
  }

  renderHistory(): void {
    const list = this.element("#history");
    list.innerHTML = "";
    for (const entry of this.history) {
      const item = this.root.createElement("li");
      const badge = this.root.createElement("span");
      badge.className = `verdict verdict-${entry.verdict}`;
      badge.textContent = entry.verdict;
      const text = this.root.createElement("span");
      text.textContent = entry.question;
      item.appendChild(badge);
      item.appendChild(text);
      list.appendChild(item);
    }
  }

  showError(error: unknown): void {
    const banner = this.element("#error-banner");
    banner.classList.remove("hidden");
    banner.textContent =
      error instanceof ApiError || error instanceof Error
        ? error.message
        : "unexpected error";
  }

  hideError(): void {
    this.element("#error-banner").classList.add("hidden");
  }
}

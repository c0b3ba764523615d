// Coding-queue view: show the queried document, accept one code per
// action, and advance only after the server acknowledges the label.

import { api, ApiError, NextDocument } from "./api";

export interface CodingViewOptions {
  session: string;
  codes: { id: string; name: string }[];
  client?: typeof api;
}

export class CodingQueueView {
  readonly root: HTMLElement;
  private readonly client: typeof api;
  private readonly session: string;
  private current: NextDocument | null = null;
  private busy = false;

  private readonly title: HTMLElement;
  private readonly body: HTMLElement;
  private readonly posterior: HTMLElement;
  private readonly buttons: HTMLElement;
  private readonly status: HTMLElement;
  private readonly metrics: HTMLElement;

  constructor(options: CodingViewOptions) {
    this.client = options.client ?? api;
    this.session = options.session;

    this.root = document.createElement("div");
    this.root.className = "coding-view";
    this.title = this.child("h3", "doc-title");
    this.body = this.child("div", "doc-body");
    this.posterior = this.child("div", "posterior-bars");
    this.buttons = this.child("div", "code-buttons");
    this.status = this.child("div", "status-line");
    this.metrics = this.child("div", "metrics-history");

    for (const code of options.codes) {
      const button = document.createElement("button");
      button.textContent = code.name;
      button.dataset.code = code.id;
      button.addEventListener("click", () => void this.submit(code.id));
      this.buttons.appendChild(button);
    }
  }

  private child(tag: string, className: string): HTMLElement {
    const el = document.createElement(tag);
    el.className = className;
    this.root.appendChild(el);
    return el;
  }

  get currentDocument(): NextDocument | null {
    return this.current;
  }

  async load(): Promise<void> {
    try {
      this.current = await this.client.nextDocument(this.session);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.current = null;
        this.title.textContent = "queue empty";
        this.body.textContent = "";
        this.posterior.textContent = "";
        return;
      }
      throw err;
    }
    this.title.textContent = `${this.current.doc_id} ${this.current.title}`.trim();
    this.body.textContent = this.current.body;
    this.renderPosterior(this.current.posterior);
    this.status.textContent = `model v${this.current.model_version}, ${this.current.queue_length} queued`;
  }

  private renderPosterior(posterior: Record<string, number> | null): void {
    this.posterior.textContent = "";
    if (posterior === null) {
      this.posterior.textContent = "no classifier yet";
      return;
    }
    for (const [code, p] of Object.entries(posterior)) {
      const row = document.createElement("div");
      row.className = "bar-row";
      const label = document.createElement("span");
      label.textContent = `${code} ${(100 * p).toFixed(1)}%`;
      const bar = document.createElement("div");
      bar.className = "bar";
      bar.style.width = `${(100 * p).toFixed(1)}%`;
      row.append(label, bar);
      this.posterior.appendChild(row);
    }
  }

  /**
   * POST one label. The view advances to the next queued document only
   * after the server acknowledges; a rejection shows inline and leaves
   * the current document in place.
   */
  async submit(code: string): Promise<void> {
    if (this.current === null || this.busy) {
      return;
    }
    this.busy = true;
    const doc = this.current.doc_id;
    try {
      const ack = await this.client.submitLabel(
        this.session,
        doc,
        code,
        this.current.model_version,
      );
      this.status.textContent = `labeled ${doc} (${ack.labeled} total, model v${ack.model_version})`;
      await this.load();
      void this.refreshMetrics();
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.status.textContent = `rejected: ${message}`;
    } finally {
      this.busy = false;
    }
  }

  private async refreshMetrics(): Promise<void> {
    try {
      const report = await this.client.sessionMetrics(this.session);
      const macro = (report as { macro?: { f1?: number } }).macro;
      if (macro && typeof macro.f1 === "number") {
        const entry = document.createElement("div");
        entry.textContent = `macro F1 ${macro.f1.toFixed(3)}`;
        this.metrics.prepend(entry);
      }
    } catch {
      // not enough labels for cross-validation yet; panel stays as-is
    }
  }
}

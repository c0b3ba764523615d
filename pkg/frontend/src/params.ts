// Analysis parameterization form. Client-side validation mirrors the
// server schema so most mistakes surface before submission; server 422
// details map back onto fields either way.

import { api, ApiError, JobStatus } from "./api";

export interface ParamsFormOptions {
  project: string;
  kind: "LDA" | "COOC";
  client?: typeof api;
  pollIntervalMs?: number;
}

interface FieldSpec {
  name: string;
  label: string;
  value: string;
  parse: "int" | "float" | "string";
}

const SHARED_FIELDS: FieldSpec[] = [
  { name: "min_char", label: "min word length", value: "2", parse: "int" },
  { name: "max_char", label: "max word length", value: "50", parse: "int" },
  { name: "prune_min_df", label: "min rel. df", value: "0", parse: "float" },
  { name: "prune_max_df", label: "max rel. df", value: "1", parse: "float" },
];

const KIND_FIELDS: Record<string, FieldSpec[]> = {
  LDA: [
    { name: "k", label: "topics (K)", value: "10", parse: "int" },
    { name: "iterations", label: "sweeps", value: "1000", parse: "int" },
    { name: "burn_in", label: "burn-in", value: "500", parse: "int" },
    { name: "seed", label: "seed", value: "7", parse: "int" },
  ],
  COOC: [
    { name: "unit", label: "context (SENTENCE/DOCUMENT)", value: "SENTENCE", parse: "string" },
    { name: "measure", label: "measure (DICE/PMI/LOGLIK)", value: "DICE", parse: "string" },
    { name: "min_pair_count", label: "min pair count", value: "2", parse: "int" },
  ],
};

export function validateParams(values: Record<string, unknown>): string[] {
  const errors: string[] = [];
  const minChar = values.min_char as number;
  const maxChar = values.max_char as number;
  if (minChar < 1) errors.push("min_char must be >= 1");
  if (maxChar < minChar) {
    errors.push(`max_char (${maxChar}) must be >= min_char (${minChar})`);
  }
  const minDf = values.prune_min_df as number;
  const maxDf = values.prune_max_df as number;
  if (minDf < 0 || minDf >= 1) errors.push("prune_min_df must be in [0, 1)");
  if (maxDf <= 0 || maxDf > 1) errors.push("prune_max_df must be in (0, 1]");
  if (minDf >= maxDf) errors.push("prune_min_df must be < prune_max_df");
  if ("k" in values && (values.k as number) < 1) errors.push("k must be >= 1");
  if ("iterations" in values && "burn_in" in values) {
    if ((values.burn_in as number) >= (values.iterations as number)) {
      errors.push("burn_in must be < iterations");
    }
  }
  if ("unit" in values && !["SENTENCE", "DOCUMENT"].includes(values.unit as string)) {
    errors.push("unit must be SENTENCE or DOCUMENT");
  }
  if ("measure" in values && !["DICE", "PMI", "LOGLIK"].includes(values.measure as string)) {
    errors.push("measure must be DICE, PMI or LOGLIK");
  }
  return errors;
}

export class ParamsForm {
  readonly root: HTMLElement;
  private readonly client: typeof api;
  private readonly options: ParamsFormOptions;
  private readonly inputs = new Map<string, HTMLInputElement>();
  private readonly errorBox: HTMLElement;
  private readonly progress: HTMLElement;
  lastJob: JobStatus | null = null;

  constructor(options: ParamsFormOptions) {
    this.options = options;
    this.client = options.client ?? api;
    this.root = document.createElement("form");
    this.root.className = "params-form";

    for (const field of [...SHARED_FIELDS, ...(KIND_FIELDS[options.kind] ?? [])]) {
      const row = document.createElement("label");
      row.textContent = field.label + " ";
      const input = document.createElement("input");
      input.name = field.name;
      input.value = field.value;
      input.dataset.parse = field.parse;
      row.appendChild(input);
      this.root.appendChild(row);
      this.inputs.set(field.name, input);
    }

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = `run ${options.kind}`;
    this.root.appendChild(submit);
    this.errorBox = document.createElement("div");
    this.errorBox.className = "field-errors";
    this.progress = document.createElement("div");
    this.progress.className = "job-progress";
    this.root.append(this.errorBox, this.progress);

    this.root.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
  }

  values(): Record<string, unknown> {
    const out: Record<string, unknown> = {};
    for (const [name, input] of this.inputs) {
      const parse = input.dataset.parse;
      out[name] =
        parse === "int" ? parseInt(input.value, 10)
        : parse === "float" ? parseFloat(input.value)
        : input.value.trim();
    }
    return out;
  }

  async submit(): Promise<string | null> {
    this.errorBox.textContent = "";
    const values = this.values();
    const errors = validateParams(values);
    if (errors.length > 0) {
      this.showErrors(errors);
      return null;
    }
    const { min_char, max_char, prune_min_df, prune_max_df, ...rest } = values;
    const params = {
      analysis_params: { min_char, max_char, prune_min_df, prune_max_df },
      ...rest,
    };
    try {
      const { id } = await this.client.submitJob(
        this.options.project,
        this.options.kind,
        params,
      );
      this.progress.textContent = `job ${id}: QUEUED`;
      await this.poll(id);
      return id;
    } catch (err) {
      if (err instanceof ApiError) {
        this.showErrors(err.details.length > 0 ? err.details.map((d) => d.msg) : [err.message]);
      } else {
        this.showErrors([String(err)]);
      }
      return null;
    }
  }

  private showErrors(messages: string[]): void {
    this.errorBox.textContent = "";
    for (const message of messages) {
      const item = document.createElement("div");
      item.className = "field-error";
      item.textContent = message;
      this.errorBox.appendChild(item);
    }
  }

  private async poll(job: string): Promise<void> {
    const interval = this.options.pollIntervalMs ?? 500;
    for (;;) {
      const status = await this.client.jobStatus(this.options.project, job);
      this.lastJob = status;
      this.progress.textContent =
        `job ${job}: ${status.status} ${(100 * status.progress).toFixed(0)}%`;
      if (status.status === "DONE" || status.status === "FAILED"
          || status.status === "CANCELLED") {
        if (status.error) {
          this.progress.textContent += ` (${status.error})`;
        }
        return;
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}

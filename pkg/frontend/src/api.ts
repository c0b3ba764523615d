// Typed client for the workbench HTTP API. The UI performs no statistical
// computation of its own: every number rendered comes from these payloads.

export interface HighlightSpan {
  start: number; // Unicode scalar-value offset, inclusive
  end: number; // exclusive
  weight: number; // (0, 1], phi-derived
}

export interface HighlightPayload {
  doc_id: string;
  topic: number;
  text: string;
  spans: HighlightSpan[];
}

export interface TopicWord {
  term: string;
  relevance: number;
}

export interface TopicEntry {
  topic: number;
  label: string | null;
  words: TopicWord[];
}

export interface TopicsPayload {
  model: string;
  k: number;
  topics: TopicEntry[];
}

export interface NextDocument {
  doc_id: string;
  title: string;
  body: string;
  posterior: Record<string, number> | null;
  model_version: number;
  queue_length: number;
}

export interface LabelAck {
  ok: boolean;
  labeled: number;
  queue_length: number;
  model_version: number;
}

export interface JobStatus {
  id: string;
  kind: string;
  status: "QUEUED" | "RUNNING" | "DONE" | "FAILED" | "CANCELLED";
  progress: number;
  result_id: string | null;
  error: string | null;
}

export interface ValidationDetail {
  loc: (string | number)[];
  msg: string;
}

export class ApiError extends Error {
  status: number;
  details: ValidationDetail[];

  constructor(status: number, message: string, details: ValidationDetail[] = []) {
    super(message);
    this.status = status;
    this.details = details;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let details: ValidationDetail[] = [];
    let message = `${response.status} ${response.statusText}`;
    try {
      const body = await response.json();
      if (Array.isArray(body.detail)) {
        details = body.detail;
        message = details.map((d) => d.msg).join("; ");
      } else if (typeof body.detail === "string") {
        message = body.detail;
      }
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(response.status, message, details);
  }
  return response.json() as Promise<T>;
}

export const api = {
  topics(project: string, model: string): Promise<TopicsPayload> {
    return request(`/projects/${project}/models/${model}/topics`);
  },

  highlight(
    project: string,
    model: string,
    topic: number,
    doc: string,
    minWeight = 0,
  ): Promise<HighlightPayload> {
    return request(
      `/projects/${project}/models/${model}/topics/${topic}/highlight/${doc}?min_weight=${minWeight}`,
    );
  },

  labelTopic(
    project: string,
    model: string,
    topic: number,
    label: string,
    author = "",
  ): Promise<{ topic: number; label: string }> {
    return request(`/projects/${project}/models/${model}/topics/${topic}/label`, {
      method: "POST",
      body: JSON.stringify({ label, author }),
    });
  },

  nextDocument(session: string): Promise<NextDocument> {
    return request(`/sessions/${session}/next`);
  },

  submitLabel(
    session: string,
    doc: string,
    code: string,
    modelVersion?: number,
  ): Promise<LabelAck> {
    return request(`/sessions/${session}/labels`, {
      method: "POST",
      body: JSON.stringify({ doc, code, model_version: modelVersion }),
    });
  },

  sessionMetrics(session: string): Promise<Record<string, unknown>> {
    return request(`/sessions/${session}/metrics`);
  },

  submitJob(
    project: string,
    kind: string,
    params: Record<string, unknown>,
  ): Promise<{ id: string; status: string }> {
    return request(`/projects/${project}/jobs`, {
      method: "POST",
      body: JSON.stringify({ kind, params }),
    });
  },

  jobStatus(project: string, job: string): Promise<JobStatus> {
    return request(`/projects/${project}/jobs/${job}`);
  },
};

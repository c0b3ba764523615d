import { beforeEach, describe, expect, it, vi } from "vitest";

import { api, ApiError, JobStatus } from "../api";
import { ParamsForm, validateParams } from "../params";

function mockClient(overrides: Partial<typeof api> = {}): typeof api {
  return {
    ...api,
    submitJob: vi.fn().mockResolvedValue({ id: "j00001", status: "QUEUED" }),
    jobStatus: vi.fn(),
    ...overrides,
  } as typeof api;
}

function form(client: typeof api): ParamsForm {
  const f = new ParamsForm({
    project: "p0001",
    kind: "LDA",
    client,
    pollIntervalMs: 1,
  });
  document.body.appendChild(f.root);
  return f;
}

function setField(f: ParamsForm, name: string, value: string): void {
  const input = f.root.querySelector(`input[name=${name}]`) as HTMLInputElement;
  input.value = value;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("validateParams mirrors the server schema", () => {
  it("accepts the defaults", () => {
    expect(
      validateParams({
        min_char: 2,
        max_char: 50,
        prune_min_df: 0,
        prune_max_df: 1,
        k: 10,
        iterations: 1000,
        burn_in: 500,
      }),
    ).toEqual([]);
  });

  it("rejects min_char greater than max_char, naming both fields", () => {
    const errors = validateParams({
      min_char: 9,
      max_char: 3,
      prune_min_df: 0,
      prune_max_df: 1,
    });
    expect(errors.some((e) => e.includes("max_char") && e.includes("min_char")))
      .toBe(true);
  });

  it("rejects burn_in >= iterations and bad pruning bounds", () => {
    expect(
      validateParams({
        min_char: 2,
        max_char: 50,
        prune_min_df: 0.8,
        prune_max_df: 0.4,
        iterations: 100,
        burn_in: 100,
      }).length,
    ).toBeGreaterThanOrEqual(2);
  });
});

describe("ParamsForm", () => {
  it("valid submit posts the job and polls it to DONE", async () => {
    const statuses: JobStatus[] = [
      { id: "j00001", kind: "LDA", status: "QUEUED", progress: 0, result_id: null, error: null },
      { id: "j00001", kind: "LDA", status: "RUNNING", progress: 0.5, result_id: null, error: null },
      { id: "j00001", kind: "LDA", status: "DONE", progress: 1, result_id: "j00001", error: null },
    ];
    const jobStatus = vi.fn().mockImplementation(() =>
      Promise.resolve(statuses[Math.min(jobStatus.mock.calls.length - 1, 2)]),
    );
    const client = mockClient({ jobStatus });
    const f = form(client);
    const job = await f.submit();
    expect(job).toBe("j00001");
    expect(client.submitJob).toHaveBeenCalledWith(
      "p0001",
      "LDA",
      expect.objectContaining({
        analysis_params: expect.objectContaining({ min_char: 2, max_char: 50 }),
        k: 10,
        seed: 7,
      }),
    );
    expect(f.lastJob!.status).toBe("DONE");
    expect(f.root.querySelector(".job-progress")!.textContent).toContain("DONE");
  });

  it("min > max is rejected client-side without touching the server", async () => {
    const client = mockClient();
    const f = form(client);
    setField(f, "min_char", "9");
    setField(f, "max_char", "3");
    const job = await f.submit();
    expect(job).toBeNull();
    expect(client.submitJob).not.toHaveBeenCalled();
    const text = f.root.querySelector(".field-errors")!.textContent!;
    expect(text).toContain("min_char");
    expect(text).toContain("max_char");
  });

  it("server 422 details land in the field error box", async () => {
    const client = mockClient({
      submitJob: vi.fn().mockRejectedValue(
        new ApiError(422, "alpha must be > 0", [
          { loc: ["body", "params", "lda"], msg: "alpha must be > 0" },
        ]),
      ),
    });
    const f = form(client);
    const job = await f.submit();
    expect(job).toBeNull();
    expect(f.root.querySelector(".field-errors")!.textContent).toContain(
      "alpha must be > 0",
    );
  });
});

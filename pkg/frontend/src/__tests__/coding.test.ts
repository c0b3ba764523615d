import { beforeEach, describe, expect, it, vi } from "vitest";

import { api, ApiError, LabelAck, NextDocument } from "../api";
import { CodingQueueView } from "../coding";

function doc(id: string, queue: number, version = 1): NextDocument {
  return {
    doc_id: id,
    title: `title ${id}`,
    body: `body of ${id}`,
    posterior: { support: 0.7, risk: 0.3 },
    model_version: version,
    queue_length: queue,
  };
}

function mockClient(overrides: Partial<typeof api> = {}): typeof api {
  return {
    ...api,
    nextDocument: vi.fn(),
    submitLabel: vi.fn(),
    sessionMetrics: vi.fn().mockRejectedValue(new ApiError(409, "not enough")),
    ...overrides,
  } as typeof api;
}

function view(client: typeof api): CodingQueueView {
  const v = new CodingQueueView({
    session: "s0001",
    codes: [
      { id: "support", name: "support" },
      { id: "risk", name: "risk" },
    ],
    client,
  });
  document.body.appendChild(v.root);
  return v;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("CodingQueueView", () => {
  it("shows the queried document with its posterior bars", async () => {
    const client = mockClient({
      nextDocument: vi.fn().mockResolvedValue(doc("d1", 5)),
    });
    const v = view(client);
    await v.load();
    expect(v.root.querySelector(".doc-title")!.textContent).toContain("d1");
    expect(v.root.querySelectorAll(".bar-row").length).toBe(2);
  });

  it("advances to the next document only after the server acknowledges", async () => {
    let resolveAck: (ack: LabelAck) => void = () => {};
    const ackPromise = new Promise<LabelAck>((resolve) => {
      resolveAck = resolve;
    });
    const nextDocument = vi
      .fn()
      .mockResolvedValueOnce(doc("d1", 5))
      .mockResolvedValueOnce(doc("d2", 4, 2));
    const client = mockClient({
      nextDocument,
      submitLabel: vi.fn().mockReturnValue(ackPromise),
    });
    const v = view(client);
    await v.load();
    expect(v.currentDocument!.doc_id).toBe("d1");

    const submitting = v.submit("support");
    // ack still pending: the view must not have advanced
    expect(v.currentDocument!.doc_id).toBe("d1");
    expect(nextDocument).toHaveBeenCalledTimes(1);

    resolveAck({ ok: true, labeled: 1, queue_length: 4, model_version: 2 });
    await submitting;
    expect(v.currentDocument!.doc_id).toBe("d2");
    expect(nextDocument).toHaveBeenCalledTimes(2);
    expect(client.submitLabel).toHaveBeenCalledWith("s0001", "d1", "support", 1);
  });

  it("keeps the current document and shows the rejection inline", async () => {
    const client = mockClient({
      nextDocument: vi.fn().mockResolvedValue(doc("d1", 5)),
      submitLabel: vi
        .fn()
        .mockRejectedValue(new ApiError(422, "'d1' already labeled")),
    });
    const v = view(client);
    await v.load();
    await v.submit("risk");
    expect(v.currentDocument!.doc_id).toBe("d1");
    expect(v.root.querySelector(".status-line")!.textContent).toContain(
      "rejected",
    );
    expect(client.nextDocument).toHaveBeenCalledTimes(1);
  });

  it("sends the model version it labeled under, so stale labels are detectable", async () => {
    const submitLabel = vi.fn().mockResolvedValue({
      ok: true,
      labeled: 1,
      queue_length: 0,
      model_version: 7,
    });
    const client = mockClient({
      nextDocument: vi
        .fn()
        .mockResolvedValueOnce(doc("d9", 1, 6))
        .mockRejectedValueOnce(new ApiError(404, "queue is empty")),
      submitLabel,
    });
    const v = view(client);
    await v.load();
    await v.submit("support");
    expect(submitLabel).toHaveBeenCalledWith("s0001", "d9", "support", 6);
    // queue drained: the view reports it rather than crashing
    expect(v.currentDocument).toBeNull();
    expect(v.root.querySelector(".doc-title")!.textContent).toBe("queue empty");
  });

  it("label click posts exactly one label per action", async () => {
    const submitLabel = vi.fn().mockResolvedValue({
      ok: true,
      labeled: 1,
      queue_length: 4,
      model_version: 1,
    });
    const client = mockClient({
      nextDocument: vi.fn().mockResolvedValue(doc("d1", 5)),
      submitLabel,
    });
    const v = view(client);
    await v.load();
    (v.root.querySelector("button[data-code=support]") as HTMLButtonElement).click();
    await Promise.resolve();
    expect(submitLabel).toHaveBeenCalledTimes(1);
  });
});

import { beforeEach, describe, expect, it } from "vitest";

import type {
  AdjudicationRequest,
  AdjudicationResult,
  AgreementReportPayload,
  DisagreementQueuePayload,
} from "../src/api.js";
import type { AdjudicationApi } from "../src/adjudication.js";
import { AdjudicationView } from "../src/adjudication.js";

/**
 * In-memory stand-in for the adjudication endpoints: two global sets, a
 * decision map, and reject/replace semantics applied when reporting.
 */
class FakeApi implements AdjudicationApi {
  requests: AdjudicationRequest[] = [];
  failNext = false;
  private decisions = new Map<string, AdjudicationRequest>();

  constructor(
    private readonly setA: Set<string>,
    private readonly setB: Set<string>,
  ) {}

  private adjudicated(source: Set<string>): Set<string> {
    const out = new Set<string>();
    for (const concept of source) {
      const decision = this.decisions.get(concept);
      if (decision?.verdict === "reject") continue;
      if (decision?.verdict === "replace" && decision.replacement) {
        out.add(decision.replacement);
      } else {
        out.add(concept);
      }
    }
    return out;
  }

  async disagreements(
    dataset: string,
    a: string,
    b: string,
  ): Promise<DisagreementQueuePayload> {
    const items = [...this.setA, ...this.setB]
      .filter((c) => this.setA.has(c) !== this.setB.has(c))
      .sort()
      .map((concept) => ({
        concept,
        present_in: [this.setA.has(concept) ? a : b],
        absent_from: [this.setA.has(concept) ? b : a],
        example_sentence_ids: ["000"],
        resolved: this.decisions.has(concept),
      }));
    return { dataset, a, b, items };
  }

  async adjudicate(req: AdjudicationRequest): Promise<AdjudicationResult> {
    if (this.failNext) {
      this.failNext = false;
      throw new Error("adjudication rejected by server");
    }
    this.requests.push(req);
    this.decisions.set(req.concept, req);
    return {
      decision: {
        dataset: req.dataset,
        concept: req.concept,
        source_annotators: req.source_annotators,
        verdict: req.verdict,
        replacement: req.replacement ?? null,
        adjudicator: req.adjudicator ?? "",
        timestamp: "",
      },
      final: {},
    };
  }

  async agreementReport(
    dataset: string,
    annotators: string[],
  ): Promise<AgreementReportPayload> {
    const a = this.adjudicated(this.setA);
    const b = this.adjudicated(this.setB);
    const common = [...a].filter((c) => b.has(c));
    const union = new Set([...a, ...b]);
    const jaccard = union.size === 0 ? 0 : common.length / union.size;
    const [nameA = "a", nameB = "b"] = annotators;
    return {
      annotators,
      counts: { [nameA]: a.size, [nameB]: b.size },
      union_size: union.size,
      full_agreement_count: common.length,
      full_agreement_rate: jaccard,
      pairwise: [{ a: nameA, b: nameB, jaccard }],
      diffs: [],
    };
  }
}

describe("AdjudicationView", () => {
  let api: FakeApi;
  let view: AdjudicationView;

  beforeEach(async () => {
    api = new FakeApi(
      new Set(["Lie algebra", "sheaf", "probability distribution"]),
      new Set(["Lie algebra", "sheaf", "previous work"]),
    );
    view = new AdjudicationView(api);
    await view.load("demo", "human", "llm", "judge");
  });

  it("loads the symmetric difference with provenance", () => {
    expect(view.items.map((i) => i.concept)).toEqual([
      "previous work",
      "probability distribution",
    ]);
    const llmOnly = view.items.find((i) => i.concept === "previous work");
    expect(llmOnly?.present_in).toEqual(["llm"]);
    expect(llmOnly?.absent_from).toEqual(["human"]);
    expect(view.pending).toHaveLength(2);
    expect(view.resolved).toHaveLength(0);
    expect(view.isEmpty).toBe(false);
    // Initial agreement: 2 common of 4 distinct concepts.
    expect(view.report?.pairwise[0]?.jaccard).toBeCloseTo(0.5, 10);
  });

  it("reject resolves the item and updates the agreement report", async () => {
    await view.decide("previous work", "reject");
    expect(api.requests).toEqual([
      {
        dataset: "demo",
        concept: "previous work",
        source_annotators: ["llm"],
        verdict: "reject",
        adjudicator: "judge",
      },
    ]);
    expect(view.pending.map((i) => i.concept)).toEqual(["probability distribution"]);
    expect(view.resolved.map((i) => i.concept)).toEqual(["previous work"]);
    expect(view.verdicts.get("previous work")).toBe("reject");
    // llm shrinks to {Lie algebra, sheaf}: 2 common of 3.
    expect(view.report?.pairwise[0]?.jaccard).toBeCloseTo(2 / 3, 10);
  });

  it("keep resolves the item without changing either set", async () => {
    await view.decide("probability distribution", "keep");
    expect(view.resolved.map((i) => i.concept)).toEqual(["probability distribution"]);
    expect(view.report?.counts["human"]).toBe(3);
    expect(view.report?.counts["llm"]).toBe(3);
    expect(view.report?.pairwise[0]?.jaccard).toBeCloseTo(0.5, 10);
  });

  it("replace posts the replacement term", async () => {
    await view.decide("previous work", "replace", "prior result");
    expect(api.requests[0]?.verdict).toBe("replace");
    expect(api.requests[0]?.replacement).toBe("prior result");
  });

  it("refuses to decide a concept that is not queued", async () => {
    await expect(view.decide("nonexistent", "keep")).rejects.toThrow(/not in the queue/);
    expect(api.requests).toEqual([]);
  });

  it("keeps the item pending and surfaces the error on API failure", async () => {
    api.failNext = true;
    await expect(view.decide("previous work", "reject")).rejects.toThrow(/rejected/);
    expect(view.error).toMatch(/rejected/);
    expect(view.pending).toHaveLength(2);
    expect(view.verdicts.size).toBe(0);
    // A later retry goes through and clears the error.
    await view.decide("previous work", "reject");
    expect(view.error).toBe("");
    expect(view.pending).toHaveLength(1);
  });

  it("reports an empty queue distinctly", async () => {
    const agreeing = new FakeApi(new Set(["sheaf"]), new Set(["sheaf"]));
    const emptyView = new AdjudicationView(agreeing);
    await emptyView.load("demo", "human", "llm");
    expect(emptyView.isEmpty).toBe(true);
    expect(emptyView.pending).toEqual([]);
  });
});

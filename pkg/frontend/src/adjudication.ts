/**
 * View state for the disagreement adjudication screen.
 *
 * The queue is the server's symmetric difference between two annotators'
 * concept sets; each item carries who listed it and example sentence ids.
 * keep / reject / replace post a decision and then re-pull the queue and
 * the agreement report, so what the screen shows is always the server's
 * adjudicated view, not a local simulation of it.
 */

import type {
  AdjudicationRequest,
  AdjudicationResult,
  AgreementReportPayload,
  DisagreementQueuePayload,
  QueueItemPayload,
  Verdict,
} from "./api.js";

export interface AdjudicationApi {
  disagreements(dataset: string, a: string, b: string): Promise<DisagreementQueuePayload>;
  adjudicate(req: AdjudicationRequest): Promise<AdjudicationResult>;
  agreementReport(
    dataset: string,
    annotators: string[],
    decisions?: boolean,
  ): Promise<AgreementReportPayload>;
}

export class AdjudicationView {
  dataset = "";
  annotatorA = "";
  annotatorB = "";
  adjudicator = "";
  items: QueueItemPayload[] = [];
  /** Verdicts recorded this session, keyed by concept. */
  verdicts: Map<string, Verdict> = new Map();
  report: AgreementReportPayload | null = null;
  error = "";
  loaded = false;

  constructor(private readonly api: AdjudicationApi) {}

  get pending(): QueueItemPayload[] {
    return this.items.filter((item) => !item.resolved);
  }

  get resolved(): QueueItemPayload[] {
    return this.items.filter((item) => item.resolved);
  }

  get isEmpty(): boolean {
    return this.loaded && this.items.length === 0;
  }

  async load(
    dataset: string,
    annotatorA: string,
    annotatorB: string,
    adjudicator = "",
  ): Promise<void> {
    this.dataset = dataset;
    this.annotatorA = annotatorA;
    this.annotatorB = annotatorB;
    this.adjudicator = adjudicator;
    const queue = await this.api.disagreements(dataset, annotatorA, annotatorB);
    this.items = queue.items;
    this.loaded = true;
    this.error = "";
    await this.refreshAgreement();
  }

  /**
   * Post one verdict. The concept's holders from the queue item become the
   * decision's source annotators. On success the queue and report are
   * refreshed from the server; on failure the item stays pending and the
   * error is surfaced inline.
   */
  async decide(concept: string, verdict: Verdict, replacement?: string): Promise<void> {
    const item = this.items.find((i) => i.concept === concept);
    if (!item) {
      throw new Error(`concept ${JSON.stringify(concept)} is not in the queue`);
    }
    const request: AdjudicationRequest = {
      dataset: this.dataset,
      concept,
      source_annotators: item.present_in,
      verdict,
      adjudicator: this.adjudicator,
    };
    if (replacement !== undefined) request.replacement = replacement;
    try {
      await this.api.adjudicate(request);
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
      throw err;
    }
    this.verdicts.set(concept, verdict);
    this.error = "";
    await this.refresh();
  }

  /** Re-pull the queue so resolved flags come from the server. */
  async refresh(): Promise<void> {
    const queue = await this.api.disagreements(this.dataset, this.annotatorA, this.annotatorB);
    this.items = queue.items;
    await this.refreshAgreement();
  }

  async refreshAgreement(): Promise<void> {
    this.report = await this.api.agreementReport(
      this.dataset,
      [this.annotatorA, this.annotatorB],
      true,
    );
  }
}

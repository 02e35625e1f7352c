/**
 * Typed client for the annotation service HTTP API.
 *
 * Every request goes through the documented /api/v1 endpoints; the UI has
 * no other channel to the backend. Error responses carry a JSON body of
 * the form {error, detail}, surfaced here as ApiError.
 */

export interface DatasetInfo {
  name: string;
  sentence_count: number;
}

export interface SentencePayload {
  id: string;
  text: string;
  source: string;
  context?: string;
  index: number;
  total: number;
}

export interface ConceptPayload {
  surface: string;
  normalized: string;
  status: string;
  reason?: string;
  verdict?: string;
}

export interface AnnotationResult {
  dataset: string;
  sentence_id: string;
  annotator: string;
  concepts: ConceptPayload[];
}

export interface QueueItemPayload {
  concept: string;
  present_in: string[];
  absent_from: string[];
  example_sentence_ids: string[];
  resolved: boolean;
}

export interface DisagreementQueuePayload {
  dataset: string;
  a: string;
  b: string;
  items: QueueItemPayload[];
}

export type Verdict = "keep" | "reject" | "replace";

export interface AdjudicationRequest {
  dataset: string;
  concept: string;
  source_annotators: string[];
  verdict: Verdict;
  replacement?: string;
  adjudicator?: string;
}

export interface AdjudicationResult {
  decision: {
    dataset: string;
    concept: string;
    source_annotators: string[];
    verdict: string;
    replacement: string | null;
    adjudicator: string;
    timestamp: string;
  };
  final: Record<string, string[]>;
}

export interface PairwiseEntry {
  a: string;
  b: string;
  jaccard: number;
}

export interface DiffEntry {
  a: string;
  b: string;
  only_a: string[];
  only_b: string[];
  common: string[];
}

export interface AgreementReportPayload {
  annotators: string[];
  counts: Record<string, number>;
  union_size: number;
  full_agreement_count: number;
  full_agreement_rate: number;
  pairwise: PairwiseEntry[];
  diffs: DiffEntry[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

const API = "/api/v1";

function query(params: Record<string, string | boolean | undefined>): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined) search.set(key, String(value));
  }
  const rendered = search.toString();
  return rendered ? `?${rendered}` : "";
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly token?: string,
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const out: Record<string, string> = { ...extra };
    if (this.token) out["Authorization"] = `Bearer ${this.token}`;
    return out;
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + API + path, {
        ...init,
        headers: this.headers((init.headers as Record<string, string>) ?? {}),
      });
    } catch (err) {
      throw new ApiError(0, "network", `request failed: ${String(err)}`);
    }
    if (!response.ok) {
      let code = "error";
      let detail = `${response.status} ${response.statusText}`;
      try {
        const body = (await response.json()) as { error?: string; detail?: string };
        if (body.error) code = body.error;
        if (body.detail) detail = body.detail;
      } catch {
        // Non-JSON error body; keep the status line.
      }
      throw new ApiError(response.status, code, detail);
    }
    return response;
  }

  async uploadDataset(
    name: string,
    body: string,
    format: "jsonl" | "csv" = "jsonl",
  ): Promise<DatasetInfo> {
    const response = await this.request(`/datasets${query({ name, format })}`, {
      method: "POST",
      body,
      headers: { "Content-Type": "application/octet-stream" },
    });
    return (await response.json()) as DatasetInfo;
  }

  async listDatasets(): Promise<DatasetInfo[]> {
    const response = await this.request("/datasets");
    return (await response.json()) as DatasetInfo[];
  }

  async getSentence(dataset: string, index: number): Promise<SentencePayload> {
    const response = await this.request(
      `/datasets/${encodeURIComponent(dataset)}/sentences/${index}`,
    );
    return (await response.json()) as SentencePayload;
  }

  async submitAnnotation(
    dataset: string,
    sentenceId: string,
    annotator: string,
    concepts: string[],
  ): Promise<AnnotationResult> {
    const response = await this.request("/annotations", {
      method: "POST",
      body: JSON.stringify({ dataset, sentence_id: sentenceId, annotator, concepts }),
      headers: { "Content-Type": "application/json" },
    });
    return (await response.json()) as AnnotationResult;
  }

  async fetchAnnotations(dataset: string, annotator?: string): Promise<string> {
    const response = await this.request(
      `/annotations${query({ dataset, annotator })}`,
    );
    return await response.text();
  }

  async disagreements(
    dataset: string,
    a: string,
    b: string,
  ): Promise<DisagreementQueuePayload> {
    const response = await this.request(`/disagreements${query({ dataset, a, b })}`);
    return (await response.json()) as DisagreementQueuePayload;
  }

  async adjudicate(req: AdjudicationRequest): Promise<AdjudicationResult> {
    const response = await this.request("/adjudications", {
      method: "POST",
      body: JSON.stringify(req),
      headers: { "Content-Type": "application/json" },
    });
    return (await response.json()) as AdjudicationResult;
  }

  /** Href for the download link; the browser follows it natively. */
  exportUrl(dataset: string, opts: { annotator?: string; decisions?: boolean } = {}): string {
    return (
      this.baseUrl +
      API +
      `/export${query({ dataset, annotator: opts.annotator, decisions: opts.decisions })}`
    );
  }

  async downloadExport(
    dataset: string,
    opts: { annotator?: string; decisions?: boolean } = {},
  ): Promise<string> {
    const response = await this.request(
      `/export${query({ dataset, annotator: opts.annotator, decisions: opts.decisions })}`,
    );
    return await response.text();
  }

  async agreementReport(
    dataset: string,
    annotators: string[],
    decisions = true,
  ): Promise<AgreementReportPayload> {
    const response = await this.request(
      `/reports/agreement${query({ dataset, annotators: annotators.join(","), decisions })}`,
    );
    return (await response.json()) as AgreementReportPayload;
  }
}

/**
 * View state for the sentence annotation screen.
 *
 * Holds the current sentence as word tokens, a pending contiguous span
 * selection, an editable draft concept, and the list of concepts committed
 * so far. Nothing is persisted until submitAndAdvance posts the committed
 * list; on success the list mirrors what the server stored and the view
 * moves to the next sentence. Concepts travel verbatim: the only client
 * side cleanup is trimming, singularization and the other rules run on the
 * server.
 */

import type { ConceptPayload, SentencePayload } from "./api.js";
import { sliceTokens, tokenize } from "./tokenize.js";

/** The slice of the API client this view needs. */
export interface AnnotationApi {
  getSentence(dataset: string, index: number): Promise<SentencePayload>;
  submitAnnotation(
    dataset: string,
    sentenceId: string,
    annotator: string,
    concepts: string[],
  ): Promise<{ concepts: ConceptPayload[] }>;
}

export interface TokenRange {
  start: number;
  end: number;
}

export class AnnotationView {
  dataset = "";
  annotator = "";
  sentenceIndex = 0;
  sentence: SentencePayload | null = null;
  tokens: string[] = [];
  pendingSelection: TokenRange | null = null;
  draftConcept = "";
  committedConcepts: string[] = [];
  /** Server echo of the last successful submit. */
  lastStored: ConceptPayload[] = [];
  error = "";
  finished = false;

  constructor(private readonly api: AnnotationApi) {}

  get total(): number {
    return this.sentence?.total ?? 0;
  }

  /** Bind the session and load the starting sentence. */
  async start(dataset: string, annotator: string, startIndex = 0): Promise<void> {
    if (!dataset || !annotator.trim()) {
      throw new Error("dataset and annotator must be selected");
    }
    this.dataset = dataset;
    this.annotator = annotator.trim();
    this.finished = false;
    await this.loadSentence(startIndex);
  }

  async loadSentence(index: number): Promise<void> {
    const sentence = await this.api.getSentence(this.dataset, index);
    this.sentence = sentence;
    this.sentenceIndex = index;
    this.tokens = tokenize(sentence.text);
    this.pendingSelection = null;
    this.draftConcept = "";
    this.committedConcepts = [];
    this.error = "";
  }

  /**
   * Select a contiguous token range; the joined text becomes the draft,
   * which the user may edit freely before committing.
   */
  selectSpan(start: number, end: number): void {
    if (
      !Number.isInteger(start) ||
      !Number.isInteger(end) ||
      start < 0 ||
      end < start ||
      end >= this.tokens.length
    ) {
      throw new RangeError(
        `selection must be a contiguous token range within 0..${this.tokens.length - 1}`,
      );
    }
    this.pendingSelection = { start, end };
    this.draftConcept = sliceTokens(this.tokens, start, end);
  }

  clearSelection(): void {
    this.pendingSelection = null;
  }

  /** Free edits to the draft, including typing a concept with no selection. */
  editDraft(text: string): void {
    this.draftConcept = text;
  }

  /** Append the draft to the committed list (deduped); nothing is persisted yet. */
  commitConcept(): void {
    const concept = this.draftConcept.trim();
    if (!concept) {
      throw new Error("draft concept is empty");
    }
    if (!this.committedConcepts.includes(concept)) {
      this.committedConcepts.push(concept);
    }
    this.draftConcept = "";
    this.pendingSelection = null;
  }

  removeConcept(concept: string): void {
    this.committedConcepts = this.committedConcepts.filter((c) => c !== concept);
  }

  /**
   * POST the committed list for the current sentence and move on. An empty
   * list is a deliberate skip and is recorded as such. On failure the
   * committed list and position are untouched and the error is surfaced.
   */
  async submitAndAdvance(): Promise<void> {
    if (!this.dataset || !this.annotator) {
      throw new Error("dataset and annotator must be selected");
    }
    if (!this.sentence) {
      throw new Error("no sentence loaded");
    }
    let stored: { concepts: ConceptPayload[] };
    try {
      stored = await this.api.submitAnnotation(
        this.dataset,
        this.sentence.id,
        this.annotator,
        [...this.committedConcepts],
      );
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
      throw err;
    }
    this.lastStored = stored.concepts;
    this.committedConcepts = stored.concepts.map((c) => c.surface);
    this.error = "";
    const next = this.sentenceIndex + 1;
    if (next < this.total) {
      await this.loadSentence(next);
    } else {
      this.finished = true;
    }
  }

  /** Record an explicit empty annotation for this sentence and move on. */
  async skipAndAdvance(): Promise<void> {
    this.committedConcepts = [];
    this.draftConcept = "";
    this.pendingSelection = null;
    await this.submitAndAdvance();
  }
}

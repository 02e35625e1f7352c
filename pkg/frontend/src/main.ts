/**
 * Single-page app glue: tabs for dataset upload, sentence annotation, and
 * disagreement adjudication. All state lives in AnnotationView and
 * AdjudicationView; this module only renders them and forwards DOM events.
 */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationView } from "./annotation.js";
import { AdjudicationView } from "./adjudication.js";

const api = new ApiClient();
const annotation = new AnnotationView(api);
const adjudication = new AdjudicationView(api);

type TabName = "datasets" | "annotate" | "adjudicate";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function showError(err: unknown): void {
  const banner = el<HTMLDivElement>("error-banner");
  const message =
    err instanceof ApiError
      ? `${err.code}: ${err.message}`
      : err instanceof Error
        ? err.message
        : String(err);
  banner.textContent = message;
  banner.style.display = "block";
}

function clearError(): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = "";
  banner.style.display = "none";
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    clearError();
    await action();
  } catch (err) {
    showError(err);
  }
}

// ------------------------------------------------------------------ tabs

function switchTab(name: TabName): void {
  for (const tab of ["datasets", "annotate", "adjudicate"] as TabName[]) {
    el(`panel-${tab}`).style.display = tab === name ? "block" : "none";
    el(`tab-${tab}`).classList.toggle("active", tab === name);
  }
}

// -------------------------------------------------------------- datasets

async function refreshDatasetLists(): Promise<void> {
  const datasets = await api.listDatasets();
  const listing = el<HTMLUListElement>("dataset-list");
  listing.innerHTML = "";
  for (const info of datasets) {
    const item = document.createElement("li");
    item.textContent = `${info.name} (${info.sentence_count} sentences)`;
    listing.appendChild(item);
  }
  for (const selectId of ["annotate-dataset", "adjudicate-dataset"]) {
    const select = el<HTMLSelectElement>(selectId);
    const previous = select.value;
    select.innerHTML = "";
    for (const info of datasets) {
      const option = document.createElement("option");
      option.value = info.name;
      option.textContent = info.name;
      select.appendChild(option);
    }
    if (datasets.some((d) => d.name === previous)) select.value = previous;
  }
}

function setupUpload(): void {
  const fileInput = el<HTMLInputElement>("upload-file");
  const textInput = el<HTMLTextAreaElement>("upload-text");
  el<HTMLButtonElement>("upload-button").addEventListener("click", () =>
    guard(async () => {
      const name = el<HTMLInputElement>("upload-name").value.trim();
      if (!name) throw new Error("dataset name is required");
      const format = el<HTMLSelectElement>("upload-format").value as "jsonl" | "csv";
      let body = textInput.value;
      const file = fileInput.files?.[0];
      if (file) body = await file.text();
      if (!body.trim()) throw new Error("choose a file or paste sentences first");
      const info = await api.uploadDataset(name, body, format);
      el("upload-status").textContent =
        `uploaded ${info.name}: ${info.sentence_count} sentences`;
      fileInput.value = "";
      textInput.value = "";
      await refreshDatasetLists();
    }),
  );
  el<HTMLButtonElement>("dataset-refresh").addEventListener("click", () =>
    guard(refreshDatasetLists),
  );
}

// -------------------------------------------------------------- annotate

let dragAnchor: number | null = null;
let dragEnd: number | null = null;
let dragging = false;

function renderSentence(): void {
  const holder = el<HTMLDivElement>("sentence-tokens");
  holder.innerHTML = "";
  const selection = annotation.pendingSelection;
  annotation.tokens.forEach((token, index) => {
    const span = document.createElement("span");
    span.className = "token";
    span.textContent = token;
    span.dataset["index"] = String(index);
    if (selection && index >= selection.start && index <= selection.end) {
      span.classList.add("selected");
    }
    holder.appendChild(span);
    if (index < annotation.tokens.length - 1) {
      holder.appendChild(document.createTextNode(" "));
    }
  });
}

function renderCommitted(): void {
  const listing = el<HTMLUListElement>("committed-list");
  listing.innerHTML = "";
  for (const concept of annotation.committedConcepts) {
    const item = document.createElement("li");
    item.className = "chip";
    const label = document.createElement("span");
    label.textContent = concept;
    item.appendChild(label);
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.title = "remove";
    remove.addEventListener("click", () => {
      annotation.removeConcept(concept);
      renderCommitted();
    });
    item.appendChild(remove);
    listing.appendChild(item);
  }
}

function renderAnnotatePanel(): void {
  const progress = el<HTMLDivElement>("annotate-progress");
  const workspace = el<HTMLDivElement>("annotate-workspace");
  const done = el<HTMLDivElement>("annotate-done");
  if (annotation.finished) {
    workspace.style.display = "none";
    done.style.display = "block";
    progress.textContent = `all ${annotation.total} sentences submitted`;
    return;
  }
  if (!annotation.sentence) {
    workspace.style.display = "none";
    done.style.display = "none";
    progress.textContent = "";
    return;
  }
  workspace.style.display = "block";
  done.style.display = "none";
  progress.textContent =
    `sentence ${annotation.sentenceIndex + 1} of ${annotation.total}` +
    ` (id ${annotation.sentence.id})`;
  renderSentence();
  el<HTMLInputElement>("draft-input").value = annotation.draftConcept;
  renderCommitted();
  const download = el<HTMLAnchorElement>("download-link");
  download.href = api.exportUrl(annotation.dataset);
  download.style.display = "inline";
}

function finalizeDrag(): void {
  if (dragAnchor === null || dragEnd === null) return;
  const start = Math.min(dragAnchor, dragEnd);
  const end = Math.max(dragAnchor, dragEnd);
  try {
    annotation.selectSpan(start, end);
  } catch (err) {
    showError(err);
    return;
  }
  renderAnnotatePanel();
  el<HTMLInputElement>("draft-input").focus();
}

function setupAnnotate(): void {
  el<HTMLButtonElement>("annotate-start").addEventListener("click", () =>
    guard(async () => {
      const dataset = el<HTMLSelectElement>("annotate-dataset").value;
      const annotator = el<HTMLInputElement>("annotate-annotator").value;
      const startIndex = Number.parseInt(
        el<HTMLInputElement>("annotate-index").value || "0",
        10,
      );
      await annotation.start(dataset, annotator, startIndex);
      renderAnnotatePanel();
    }),
  );

  const holder = el<HTMLDivElement>("sentence-tokens");
  holder.addEventListener("mousedown", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>(".token");
    if (!target) return;
    event.preventDefault();
    dragAnchor = Number.parseInt(target.dataset["index"] ?? "0", 10);
    dragEnd = dragAnchor;
    dragging = true;
  });
  holder.addEventListener("mouseover", (event) => {
    if (!dragging) return;
    const target = (event.target as HTMLElement).closest<HTMLElement>(".token");
    if (!target) return;
    dragEnd = Number.parseInt(target.dataset["index"] ?? "0", 10);
  });
  document.addEventListener("mouseup", () => {
    if (!dragging) return;
    dragging = false;
    finalizeDrag();
    dragAnchor = null;
    dragEnd = null;
  });

  const draft = el<HTMLInputElement>("draft-input");
  draft.addEventListener("input", () => annotation.editDraft(draft.value));
  draft.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      event.preventDefault();
      commitDraft();
    }
  });
  el<HTMLButtonElement>("draft-commit").addEventListener("click", commitDraft);

  function commitDraft(): void {
    try {
      annotation.commitConcept();
    } catch (err) {
      showError(err);
      return;
    }
    clearError();
    renderAnnotatePanel();
  }

  el<HTMLButtonElement>("annotate-submit").addEventListener("click", () =>
    guard(async () => {
      await annotation.submitAndAdvance();
      renderAnnotatePanel();
    }),
  );
  el<HTMLButtonElement>("annotate-skip").addEventListener("click", () =>
    guard(async () => {
      await annotation.skipAndAdvance();
      renderAnnotatePanel();
    }),
  );
}

// ------------------------------------------------------------ adjudicate

function renderReport(): void {
  const holder = el<HTMLDivElement>("agreement-report");
  const report = adjudication.report;
  if (!report) {
    holder.textContent = "";
    return;
  }
  const lines: string[] = [];
  for (const entry of report.pairwise) {
    lines.push(`${entry.a} and ${entry.b} | jaccard ${entry.jaccard.toFixed(3)}`);
  }
  lines.push(
    `full agreement | ${report.full_agreement_count}/${report.union_size}` +
      ` = ${report.full_agreement_rate.toFixed(3)}`,
  );
  for (const [name, count] of Object.entries(report.counts)) {
    lines.push(`${name}: ${count} concepts`);
  }
  holder.innerHTML = lines.map((line) => `<div>${escapeHtml(line)}</div>`).join("");
}

function renderQueue(): void {
  const listing = el<HTMLDivElement>("queue-items");
  listing.innerHTML = "";
  if (adjudication.isEmpty) {
    listing.innerHTML = '<p class="muted">no disagreements</p>';
    renderReport();
    return;
  }
  for (const item of adjudication.items) {
    const row = document.createElement("div");
    row.className = item.resolved ? "queue-item resolved" : "queue-item";

    const head = document.createElement("div");
    head.className = "queue-head";
    const concept = document.createElement("strong");
    concept.textContent = item.concept;
    head.appendChild(concept);
    const provenance = document.createElement("span");
    provenance.className = "muted";
    provenance.textContent =
      ` listed by ${item.present_in.join(", ")},` +
      ` missing from ${item.absent_from.join(", ")}`;
    head.appendChild(provenance);
    row.appendChild(head);

    if (item.example_sentence_ids.length > 0) {
      const examples = document.createElement("div");
      examples.className = "muted";
      examples.textContent = `seen in: ${item.example_sentence_ids.join(", ")}`;
      row.appendChild(examples);
    }

    if (item.resolved) {
      const badge = document.createElement("span");
      badge.className = "badge";
      const verdict = adjudication.verdicts.get(item.concept);
      badge.textContent = verdict ? `resolved: ${verdict}` : "resolved";
      row.appendChild(badge);
    } else {
      const actions = document.createElement("div");
      actions.className = "queue-actions";
      const keep = document.createElement("button");
      keep.textContent = "keep";
      keep.addEventListener("click", () =>
        guard(async () => {
          await adjudication.decide(item.concept, "keep");
          renderQueue();
        }),
      );
      const reject = document.createElement("button");
      reject.textContent = "reject";
      reject.addEventListener("click", () =>
        guard(async () => {
          await adjudication.decide(item.concept, "reject");
          renderQueue();
        }),
      );
      const replacement = document.createElement("input");
      replacement.placeholder = "replacement term";
      const replaceBtn = document.createElement("button");
      replaceBtn.textContent = "replace";
      replaceBtn.addEventListener("click", () =>
        guard(async () => {
          await adjudication.decide(item.concept, "replace", replacement.value);
          renderQueue();
        }),
      );
      actions.append(keep, reject, replacement, replaceBtn);
      row.appendChild(actions);
    }
    listing.appendChild(row);
  }
  renderReport();
}

function setupAdjudicate(): void {
  el<HTMLButtonElement>("adjudicate-load").addEventListener("click", () =>
    guard(async () => {
      await adjudication.load(
        el<HTMLSelectElement>("adjudicate-dataset").value,
        el<HTMLInputElement>("adjudicate-a").value.trim(),
        el<HTMLInputElement>("adjudicate-b").value.trim(),
        el<HTMLInputElement>("adjudicate-who").value.trim(),
      );
      renderQueue();
    }),
  );
}

// ------------------------------------------------------------------ init

function init(): void {
  for (const tab of ["datasets", "annotate", "adjudicate"] as TabName[]) {
    el(`tab-${tab}`).addEventListener("click", () => switchTab(tab));
  }
  setupUpload();
  setupAnnotate();
  setupAdjudicate();
  switchTab("datasets");
  void guard(refreshDatasetLists);
}

init();

/**
 * One editor pane: a loaded document, its render tree, the active text
 * selection (in resource coordinates) and per-pane context overrides.
 */

import type { RenderQuery, RenderTree, StoreApi } from "./api.js";
import { renderNode } from "./view.js";

export interface TextSelection {
  resource: string;
  start: number;
  end: number;
}

export class Pane {
  documentId: string | null = null;
  tree: RenderTree | null = null;
  selection: TextSelection | null = null;
  contextOverrides: Record<string, string> = {};
  mode: "snapshot" | "live" = "snapshot";

  readonly body: HTMLElement;
  readonly status: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    readonly name: string
  ) {
    root.classList.add("pane");
    root.dataset.pane = name;
    this.body = document.createElement("div");
    this.body.className = "pane-body";
    this.status = document.createElement("div");
    this.status.className = "pane-status";
    root.appendChild(this.body);
    root.appendChild(this.status);
    this.body.addEventListener("mouseup", () => this.captureSelection());
  }

  renderQuery(): RenderQuery {
    return { mode: this.mode, context: { ...this.contextOverrides } };
  }

  async load(api: StoreApi, documentId: string): Promise<void> {
    this.documentId = documentId;
    await this.refresh(api);
  }

  async refresh(api: StoreApi): Promise<void> {
    if (!this.documentId) return;
    this.tree = await api.render(this.documentId, this.renderQuery());
    this.draw();
  }

  draw(): void {
    this.body.replaceChildren();
    if (this.tree) this.body.appendChild(renderNode(this.tree.root));
  }

  /** Map the browser selection to resource coordinates via span metadata. */
  captureSelection(): TextSelection | null {
    const selection = window.getSelection();
    if (!selection || selection.rangeCount === 0) return this.selection;
    const range = selection.getRangeAt(0);
    const startSpan = spanOf(range.startContainer);
    const endSpan = spanOf(range.endContainer);
    if (!startSpan || startSpan !== endSpan) return this.selection;
    if (!this.body.contains(startSpan)) return this.selection;
    const resource = startSpan.dataset.resource;
    const offset = Number(startSpan.dataset.offset ?? "0");
    if (!resource) return this.selection;
    const lo = Math.min(range.startOffset, range.endOffset);
    const hi = Math.max(range.startOffset, range.endOffset);
    this.setSelection({ resource, start: offset + lo, end: offset + hi });
    return this.selection;
  }

  setSelection(selection: TextSelection | null): void {
    this.selection = selection;
    this.status.textContent = selection
      ? `selection: ${selection.resource.slice(0, 8)}… [${selection.start}, ${selection.end})`
      : "";
  }

  /** Zero-length selections act as the caret for transclusion targets. */
  get caret(): TextSelection | null {
    return this.selection && this.selection.start === this.selection.end
      ? this.selection
      : null;
  }
}

function spanOf(node: Node | null): HTMLElement | null {
  let current: Node | null = node;
  while (current) {
    if (current instanceof HTMLElement && current.classList.contains("text-span")) {
      return current;
    }
    current = current.parentNode;
  }
  return null;
}

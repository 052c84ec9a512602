/**
 * Render-tree to DOM.
 *
 * Hard rule: a node whose `accessible` flag is false is drawn as a
 * redaction block and none of its text or children ever reach the DOM,
 * no matter what the payload contains.
 */

import type { RenderNode } from "./api.js";

const MARKER_LABEL: Record<string, string> = {
  cycle: "cycle",
  depth_limit: "depth limit",
  unresolved_remote: "unresolved",
};

export function renderNode(node: RenderNode): HTMLElement {
  if (!node.accessible || node.kind === "redacted") {
    return redactionBlock(node);
  }
  switch (node.kind) {
    case "text_span":
    case "stale":
      return textSpan(node);
    case "transclusion":
      return transclusionSpan(node);
    case "composite":
      return compositeBlock(node);
    default:
      return markerChip(node);
  }
}

function baseElement(tag: string, node: RenderNode, className: string): HTMLElement {
  const el = document.createElement(tag);
  el.className = className;
  el.dataset.entity = node.entity.id;
  if (node.entity.store) el.dataset.store = node.entity.store;
  return el;
}

function redactionBlock(node: RenderNode): HTMLElement {
  const el = baseElement("span", node, "redacted");
  el.setAttribute("role", "note");
  el.title = `no access (entity ${node.entity.id})`;
  el.textContent = "███";
  return el;
}

function textSpan(node: RenderNode): HTMLElement {
  const el = baseElement("span", node, "text-span accessible");
  el.textContent = node.text ?? "";
  const resource = node.annotations?.["resource"];
  const offset = node.annotations?.["offset"];
  if (resource) el.dataset.resource = resource;
  if (offset) el.dataset.offset = offset;
  if (node.stale) {
    el.classList.add("stale");
    const badge = document.createElement("sup");
    badge.className = "stale-badge";
    badge.textContent = "stale";
    el.appendChild(badge);
  }
  return el;
}

function transclusionSpan(node: RenderNode): HTMLElement {
  const el = baseElement("span", node, "transclusion accessible");
  if (node.origin) {
    el.dataset.origin = node.origin.id;
    el.title = `transcluded from ${node.origin.id}`;
  }
  const label = document.createElement("span");
  label.className = "transclusion-origin";
  label.textContent = "⧉"; // two joined squares: reused content
  el.appendChild(label);
  for (const child of node.children) el.appendChild(renderNode(child));
  return el;
}

function compositeBlock(node: RenderNode): HTMLElement {
  const inline = node.annotations?.["layout"] === "inline";
  const el = baseElement(inline ? "span" : "div", node,
    inline ? "composite-inline accessible" : "composite accessible");
  for (const child of node.children) el.appendChild(renderNode(child));
  return el;
}

function markerChip(node: RenderNode): HTMLElement {
  const el = baseElement("span", node, `marker marker-${node.kind}`);
  const reason = node.annotations?.["reason"];
  el.textContent = `[${MARKER_LABEL[node.kind] ?? node.kind}]`;
  if (reason) el.title = reason;
  return el;
}

/** True iff any rendered text in `root` came from `entityId`'s subtree. */
export function containsText(root: HTMLElement, needle: string): boolean {
  return (root.textContent ?? "").includes(needle);
}

/**
 * Editor application: two panes side by side, a session bar and the
 * interactions from the prototype — create links between selections,
 * transclude a selection at a caret, switch context, edit a snippet.
 */

import { ApiError, StoreApi, WireRef } from "./api.js";
import { Pane, TextSelection } from "./panes.js";

export interface SessionState {
  baseUrl: string;
  token?: string;
  activeUserName: string;
}

export class EditorApp {
  session: SessionState = { baseUrl: "", activeUserName: "anonymous" };
  api: StoreApi | null = null;
  readonly left: Pane;
  readonly right: Pane;
  readonly banner: HTMLElement;
  /** selectors created this session, per pane, for link affordances */
  private paneSelectors: [string[], string[]] = [[], []];

  constructor(readonly root: HTMLElement) {
    root.classList.add("editor");
    this.banner = el("div", "banner");
    const panes = el("div", "panes");
    const leftRoot = el("section", "");
    const rightRoot = el("section", "");
    panes.appendChild(leftRoot);
    panes.appendChild(rightRoot);
    root.appendChild(this.banner);
    root.appendChild(panes);
    this.left = new Pane(leftRoot, "left");
    this.right = new Pane(rightRoot, "right");
  }

  get panes(): [Pane, Pane] {
    return [this.left, this.right];
  }

  connect(baseUrl: string, token?: string, userName = "anonymous"): void {
    this.session = { baseUrl, token, activeUserName: token ? userName : "anonymous" };
    this.api = new StoreApi(baseUrl, token);
    this.paneSelectors = [[], []];
    this.status(`connected to ${baseUrl} as ${this.session.activeUserName}`);
  }

  private need(): StoreApi {
    if (!this.api) throw new ApiError("not_connected", "connect to a store first", 0);
    return this.api;
  }

  async loadPane(side: "left" | "right", documentId: string): Promise<void> {
    await this.guarded(async () => {
      await (side === "left" ? this.left : this.right).load(this.need(), documentId);
    });
  }

  async refresh(): Promise<void> {
    await this.guarded(async () => {
      const api = this.need();
      await Promise.all(this.panes.map((p) => (p.documentId ? p.refresh(api) : null)));
    });
  }

  async setPaneContext(side: "left" | "right", entries: Record<string, string>): Promise<void> {
    const pane = side === "left" ? this.left : this.right;
    pane.contextOverrides = { ...entries };
    if (pane.documentId) await this.guarded(() => pane.refresh(this.need()));
  }

  /**
   * Create a link between the two pane selections. Two selectors are
   * posted, then one link; both panes refresh and show the affordance.
   */
  async linkSelections(kind = "navigational"): Promise<string | null> {
    return this.guarded(async () => {
      const api = this.need();
      const [from, to] = [this.left.selection, this.right.selection];
      if (!from || !to) {
        throw new ApiError("missing_selection", "select text in both panes", 0);
      }
      const sourceSel = await api.createSelector(from.resource, from.start, from.end);
      const targetSel = await api.createSelector(to.resource, to.start, to.end);
      const linkId = await api.createLink(kind, [{ id: sourceSel }], [{ id: targetSel }]);
      this.paneSelectors[0].push(sourceSel);
      this.paneSelectors[1].push(targetSel);
      await this.refresh();
      await this.showLinkAffordances();
      this.status(`linked: ${linkId}`);
      return linkId;
    });
  }

  /** Badge each pane with the links touching its session selectors. */
  async showLinkAffordances(): Promise<void> {
    const api = this.need();
    for (const [index, pane] of this.panes.entries()) {
      const linkIds = new Set<string>();
      for (const selector of this.paneSelectors[index]) {
        for (const id of await api.linksOf(selector, "any")) linkIds.add(id);
      }
      let bar = pane.root.querySelector<HTMLElement>(".link-affordances");
      if (!bar) {
        bar = el("div", "link-affordances");
        pane.root.appendChild(bar);
      }
      bar.replaceChildren(
        ...[...linkIds].map((id) => {
          const chip = el("span", "link-chip");
          chip.dataset.link = id;
          chip.textContent = `↔ ${id.slice(0, 8)}…`;
          return chip;
        })
      );
    }
  }

  /**
   * Transclude the origin selection (the pane with a non-empty selection)
   * at the caret of the other pane: zero-length anchor + transclusion link.
   */
  async transcludeSelection(): Promise<string | null> {
    return this.guarded(async () => {
      const api = this.need();
      const origin = this.pickOrigin();
      const caretPane = this.panes.find((p) => p !== origin.pane && p.caret);
      if (!caretPane || !caretPane.caret) {
        throw new ApiError("missing_selection", "place a caret in the other pane", 0);
      }
      const caret = caretPane.caret;
      const originSel = await api.createSelector(
        origin.selection.resource, origin.selection.start, origin.selection.end
      );
      const anchor = await api.createSelector(caret.resource, caret.start, caret.start);
      const linkId = await api.createLink(
        "transclusion", [{ id: originSel }], [{ id: anchor }]
      );
      await this.refresh();
      this.status(`transcluded: ${linkId}`);
      return linkId;
    });
  }

  private pickOrigin(): { pane: Pane; selection: TextSelection } {
    for (const pane of this.panes) {
      const sel = pane.selection;
      if (sel && sel.end > sel.start) return { pane, selection: sel };
    }
    throw new ApiError("missing_selection", "select origin text first", 0);
  }

  /** Snippet-granular editing: upload new content, repoint the resource. */
  async editResource(resource: string, newText: string): Promise<void> {
    await this.guarded(async () => {
      const api = this.need();
      const fingerprint = await api.putContent(newText);
      await api.setResourceContent(resource, fingerprint);
      await this.refresh();
      this.status(`updated ${resource.slice(0, 8)}…`);
    });
  }

  private async guarded<T>(body: () => Promise<T>): Promise<T | null> {
    try {
      const result = await body();
      this.banner.classList.remove("error");
      return result;
    } catch (err) {
      if (err instanceof ApiError) {
        this.error(`${err.code}: ${err.message}`);
        return null;
      }
      this.error(String(err));
      return null;
    }
  }

  status(message: string): void {
    this.banner.classList.remove("error");
    this.banner.textContent = message;
  }

  error(message: string): void {
    this.banner.classList.add("error");
    this.banner.textContent = message;
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

export function refOf(id: string): WireRef {
  return { id };
}

/**
 * REST client for a fluid-document store.
 *
 * The editor holds no authoritative state: every mutation goes through
 * these calls and panes re-render from the service afterwards.
 */

export interface WireRef {
  id: string;
  store?: string;
}

export interface RenderNode {
  kind: string;
  entity: WireRef;
  text?: string;
  accessible: boolean;
  stale?: boolean;
  origin?: WireRef;
  children: RenderNode[];
  annotations?: Record<string, string>;
}

export interface RenderTree {
  root: RenderNode;
}

export interface RenderQuery {
  mode?: "snapshot" | "live";
  maxDepth?: number;
  context?: Record<string, string>;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number
  ) {
    super(message);
  }
}

/** Context entries travel as ctx.<key> query parameters, nothing else. */
export function renderQueryParams(query: RenderQuery): URLSearchParams {
  const params = new URLSearchParams();
  if (query.mode) params.set("mode", query.mode);
  if (query.maxDepth !== undefined) params.set("max_depth", String(query.maxDepth));
  for (const [key, value] of Object.entries(query.context ?? {})) {
    params.set(`ctx.${key}`, value);
  }
  return params;
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = await resp.json();
    return new ApiError(body.error.code, body.error.message, resp.status);
  } catch {
    return new ApiError("protocol_error", `HTTP ${resp.status}`, resp.status);
  }
}

export class StoreApi {
  constructor(
    public baseUrl: string,
    public token?: string
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(json = true): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) throw await parseError(resp);
    return resp;
  }

  async render(documentId: string, query: RenderQuery = {}): Promise<RenderTree> {
    const params = renderQueryParams(query).toString();
    const path = `/documents/${documentId}/render` + (params ? `?${params}` : "");
    const resp = await this.request(path, { headers: this.headers(false) });
    return (await resp.json()) as RenderTree;
  }

  async createSelector(resource: string, start: number, end: number): Promise<string> {
    const resp = await this.request("/selectors", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ resource, start, end }),
    });
    return (await resp.json()).id as string;
  }

  async createLink(
    kind: string,
    sources: WireRef[],
    targets: WireRef[]
  ): Promise<string> {
    const resp = await this.request("/links", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ kind, sources, targets }),
    });
    return (await resp.json()).id as string;
  }

  async linksOf(
    entityId: string,
    direction: "incoming" | "outgoing" | "any" = "any",
    kind?: string
  ): Promise<string[]> {
    const params = new URLSearchParams({ direction });
    if (kind) params.set("kind", kind);
    const resp = await this.request(
      `/entities/${entityId}/links?${params.toString()}`,
      { headers: this.headers(false) }
    );
    return (await resp.json()).links as string[];
  }

  async entityRecord(entityId: string): Promise<Record<string, unknown>> {
    const resp = await this.request(`/entities/${entityId}`, {
      headers: this.headers(false),
    });
    return (await resp.json()) as Record<string, unknown>;
  }

  async putContent(text: string): Promise<string> {
    const resp = await this.request("/content", {
      method: "POST",
      headers: this.headers(false),
      body: new TextEncoder().encode(text),
    });
    return (await resp.json()).fingerprint as string;
  }

  async setResourceContent(resource: string, fingerprint: string): Promise<void> {
    await this.request(`/resources/${resource}/content`, {
      method: "PUT",
      headers: this.headers(),
      body: JSON.stringify({ fingerprint }),
    });
  }
}

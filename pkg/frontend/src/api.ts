/**
 * Typed client for the annotation server. All state flows through these
 * endpoints; the client never touches files directly.
 */

export interface DiagramSummary {
  id: string;
  semanticCategory: string | null;
  status: "ok" | "error";
  version: number;
}

export interface LayoutElement {
  id: string;
  kind: "blob" | "text" | "arrow" | "arrowhead" | "imageConstant";
  outline: [number, number][];
  text: string | null;
}

export interface GroupingSection {
  nodes: { id: string; kind: string }[];
  edges: [string, string][];
  macro: { node: string; label: string }[];
}

export interface ConnectivitySection {
  nodes: string[];
  edges: { source: string; target: string; kind: string }[];
}

export interface RstSection {
  nodes: { id: string; kind: string; name?: string; originalId?: string }[];
  edges: { child: string; parent: string; nuclearity: string }[];
}

export interface DiagramDoc {
  id: string;
  version: number;
  grouping: GroupingSection;
  connectivity: ConnectivitySection;
  rst: RstSection;
  layout: { width: number; height: number; elements: LayoutElement[] };
  imagePath: string | null;
  semanticCategory: string | null;
  lastModified?: string | null;
}

export interface SchemaInfo {
  relations: string[];
  multinuclear: string[];
  macroGroups: string[];
  connectionKinds: string[];
  actions: string[];
}

export interface MutationResult {
  version: number;
  results: { groupId?: string; relationId?: string; copyId?: string };
  report: { valid: boolean; findings: unknown[] };
}

export interface Task {
  taskId: string;
  layer: string;
  diagram: string;
  unit: string;
  highlight: string[];
  question: string;
  choices: string[];
  hopDepth: number | null;
  position: number;
  total: number;
}

export type MutationArgs = Record<string, unknown>;

/** Server rejected the request; `code` carries the structured error token. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly currentVersion?: number,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorFromResponse(response: Response): Promise<ApiError> {
  let code = `HTTP_${response.status}`;
  let message = response.statusText;
  let currentVersion: number | undefined;
  try {
    const body = await response.json();
    const detail = body?.detail ?? body;
    if (typeof detail === "string") {
      message = detail;
    } else if (detail && typeof detail === "object") {
      code = detail.code ?? code;
      message = detail.message ?? JSON.stringify(detail);
      currentVersion = detail.currentVersion;
    }
  } catch {
    /* non-JSON error body; keep defaults */
  }
  return new ApiError(response.status, code, message, currentVersion);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as T;
  }

  listDiagrams(): Promise<DiagramSummary[]> {
    return this.getJson("/diagrams");
  }

  getDiagram(id: string): Promise<DiagramDoc> {
    return this.getJson(`/diagrams/${encodeURIComponent(id)}`);
  }

  getSchema(): Promise<SchemaInfo> {
    return this.getJson("/schema");
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/diagrams/${encodeURIComponent(id)}/image`;
  }

  async mutate(
    id: string,
    expectedVersion: number,
    action: string,
    args: MutationArgs,
  ): Promise<MutationResult> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/diagrams/${encodeURIComponent(id)}/mutations`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ expectedVersion, action, args }),
      },
    );
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as MutationResult;
  }

  /** Next task in the feed, or null once the stream is exhausted (410). */
  async nextTask(
    layer: string,
    params: { fraction: number; seed: number; session: string; annotator: string },
  ): Promise<Task | null> {
    const query = new URLSearchParams({
      fraction: String(params.fraction),
      seed: String(params.seed),
      session: params.session,
      annotator: params.annotator,
    });
    const response = await this.fetchImpl(
      `${this.baseUrl}/tasks/${encodeURIComponent(layer)}?${query}`,
    );
    if (response.status === 410) return null;
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as Task;
  }

  async postResponse(
    layer: string,
    body: { session: string; taskId: string; annotator: string; label: string },
  ): Promise<{ recorded: boolean; remaining: number; complete: boolean }> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/tasks/${encodeURIComponent(layer)}/responses`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as { recorded: boolean; remaining: number; complete: boolean };
  }
}

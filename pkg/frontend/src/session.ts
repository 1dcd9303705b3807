/**
 * Editing session for one diagram: optimistic preview with rollback.
 *
 * The acknowledged document is the only state the panels trust. An edit
 * shows up immediately as a provisional preview; the server's answer then
 * either replaces the preview with acknowledged truth (refetch) or rolls
 * it back, surfacing the structured error code. A 409 marks the session
 * conflicted and refetches.
 */

import { ApiClient, ApiError, DiagramDoc, MutationArgs } from "./api.js";
import { buildPanel, GraphPanelModel } from "./graphview.js";

export interface PendingEdit {
  action: string;
  args: MutationArgs;
}

export interface EditOutcome {
  ok: boolean;
  code?: string;
  message?: string;
  results?: { groupId?: string; relationId?: string; copyId?: string };
}

export interface SessionError {
  code: string;
  message: string;
}

export type SessionListener = () => void;

export class AnnotationSession {
  private acknowledged: DiagramDoc | null = null;
  private preview: DiagramDoc | null = null;
  private pendingEdit: PendingEdit | null = null;
  private error: SessionError | null = null;
  private conflicted = false;
  private listeners: SessionListener[] = [];

  constructor(
    private readonly client: ApiClient,
    readonly diagramId: string,
  ) {}

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async load(): Promise<void> {
    this.acknowledged = await this.client.getDiagram(this.diagramId);
    this.preview = null;
    this.pendingEdit = null;
    this.conflicted = false;
    this.notify();
  }

  get doc(): DiagramDoc | null {
    return this.acknowledged;
  }

  get version(): number {
    return this.acknowledged?.version ?? 0;
  }

  get pending(): PendingEdit | null {
    return this.pendingEdit;
  }

  get lastError(): SessionError | null {
    return this.error;
  }

  get hasConflict(): boolean {
    return this.conflicted;
  }

  clearError(): void {
    this.error = null;
    this.notify();
  }

  /**
   * Panel state: acknowledged truth, or the provisional preview (every
   * node and edge flagged provisional) while an edit is in flight.
   */
  panel(layer: GraphPanelModel["layer"]): GraphPanelModel {
    if (this.preview) return buildPanel(this.preview, layer, true);
    if (!this.acknowledged) return { layer, nodes: [], edges: [] };
    return buildPanel(this.acknowledged, layer, false);
  }

  /** Apply one edit through the server, previewing it locally meanwhile. */
  async apply(action: string, args: MutationArgs): Promise<EditOutcome> {
    if (!this.acknowledged) throw new Error("session not loaded");
    this.pendingEdit = { action, args };
    this.preview = previewAction(this.acknowledged, action, args);
    this.error = null;
    this.notify();
    try {
      const result = await this.client.mutate(
        this.diagramId,
        this.acknowledged.version,
        action,
        args,
      );
      // acknowledged state comes from the server, never from the preview
      this.acknowledged = await this.client.getDiagram(this.diagramId);
      if (this.acknowledged.version !== result.version) {
        // someone else won a race between our write and refetch
        this.conflicted = true;
      }
      this.preview = null;
      this.pendingEdit = null;
      this.notify();
      return { ok: true, results: result.results };
    } catch (err) {
      this.preview = null;
      this.pendingEdit = null;
      if (err instanceof ApiError) {
        if (err.status === 409) {
          this.conflicted = true;
          this.acknowledged = await this.client.getDiagram(this.diagramId);
          this.notify();
          return { ok: false, code: "VersionConflict", message: err.message };
        }
        this.error = { code: err.code, message: err.message };
        this.notify();
        return { ok: false, code: err.code, message: err.message };
      }
      this.notify();
      throw err;
    }
  }

  acknowledgeConflict(): void {
    this.conflicted = false;
    this.notify();
  }
}

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

function nextId(prefix: string, used: Iterable<string>): string {
  const taken = new Set<number>();
  for (const id of used) {
    const match = /^([A-Z])(\d+)$/.exec(id);
    if (match && match[1] === prefix) taken.add(Number(match[2]));
  }
  let i = 0;
  while (taken.has(i)) i += 1;
  return `${prefix}${i}`;
}

/**
 * Best-effort local application of an edit for the provisional preview.
 * No validation happens here; the server remains the gatekeeper.
 */
export function previewAction(
  doc: DiagramDoc,
  action: string,
  args: MutationArgs,
): DiagramDoc {
  const next = deepCopy(doc);
  switch (action) {
    case "addGroup": {
      const children = (args.children as string[]) ?? [];
      const gid = nextId("G", next.grouping.nodes.map((n) => n.id));
      const childSet = new Set(children);
      const kept = next.grouping.edges.filter(([, child]) => !childSet.has(child));
      const parent =
        next.grouping.edges.find(([, child]) => childSet.has(child))?.[0] ?? "I0";
      next.grouping.nodes.push({ id: gid, kind: "group" });
      next.grouping.edges = [
        ...kept,
        [parent, gid],
        ...children.map((c): [string, string] => [gid, c]),
      ];
      break;
    }
    case "dissolveGroup": {
      const gid = args.node as string;
      const parent = next.grouping.edges.find(([, child]) => child === gid)?.[0];
      next.grouping.nodes = next.grouping.nodes.filter((n) => n.id !== gid);
      next.grouping.macro = next.grouping.macro.filter((m) => m.node !== gid);
      next.grouping.edges = next.grouping.edges
        .filter(([, child]) => child !== gid)
        .map(([p, c]): [string, string] => (p === gid ? [parent ?? "I0", c] : [p, c]));
      break;
    }
    case "setMacro": {
      const node = args.node as string;
      const label = args.label as string;
      next.grouping.macro = [
        ...next.grouping.macro.filter((m) => m.node !== node),
        { node, label },
      ];
      break;
    }
    case "addConnection": {
      next.connectivity.edges.push({
        source: args.source as string,
        target: args.target as string,
        kind: args.kind as string,
      });
      break;
    }
    case "removeConnection": {
      next.connectivity.edges = next.connectivity.edges.filter(
        (e) =>
          !(
            e.source === args.source &&
            e.target === args.target &&
            e.kind === args.kind
          ),
      );
      break;
    }
    case "addRelation": {
      const rid = nextId("R", next.rst.nodes.map((n) => n.id));
      const present = new Set(next.rst.nodes.map((n) => n.id));
      const nuclei = (args.nuclei as string[]) ?? [];
      const satellites = (args.satellites as string[]) ?? [];
      for (const unit of [...nuclei, ...satellites]) {
        if (!present.has(unit)) {
          next.rst.nodes.push({ id: unit, kind: "participant" });
        }
      }
      next.rst.nodes.push({ id: rid, kind: "relation", name: args.name as string });
      for (const unit of nuclei) {
        next.rst.edges.push({ child: unit, parent: rid, nuclearity: "nucleus" });
      }
      for (const unit of satellites) {
        next.rst.edges.push({ child: unit, parent: rid, nuclearity: "satellite" });
      }
      break;
    }
    case "removeRelation": {
      const rid = args.node as string;
      next.rst.nodes = next.rst.nodes.filter((n) => n.id !== rid);
      next.rst.edges = next.rst.edges.filter(
        (e) => e.parent !== rid && e.child !== rid,
      );
      break;
    }
    case "splitNode": {
      const base = (args.node as string).split(".")[0];
      const existing = next.rst.nodes
        .map((n) => n.id)
        .filter((id) => id.startsWith(`${base}.`))
        .map((id) => Number(id.split(".")[1]));
      let k = 1;
      while (existing.includes(k)) k += 1;
      next.rst.nodes.push({
        id: `${base}.${k}`,
        kind: "participant",
        originalId: base,
      });
      break;
    }
    default:
      break;
  }
  return next;
}

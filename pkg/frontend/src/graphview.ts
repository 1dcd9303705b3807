/**
 * Node-link view models for the three annotation layers, derived from the
 * last server-acknowledged document (plus, when present, a provisional
 * overlay marked pending). Rendering is left to the host page.
 */

import type { DiagramDoc } from "./api.js";

export interface PanelNode {
  id: string;
  label: string;
  kind: "element" | "group" | "imageConstant" | "relation" | "split";
  /** split copies badge the identifier they duplicate */
  splitOf?: string;
  relationName?: string;
  macroLabel?: string;
  provisional: boolean;
}

export interface PanelEdge {
  from: string;
  to: string;
  /** "n" / "s" on discourse edges; arrow style on connectivity edges */
  label: string;
  style: "plain" | "arrow" | "doubleArrow" | "nucleus" | "satellite";
  provisional: boolean;
}

export interface GraphPanelModel {
  layer: "grouping" | "connectivity" | "rst";
  nodes: PanelNode[];
  edges: PanelEdge[];
}

function groupingNodeKind(id: string): PanelNode["kind"] {
  if (id.startsWith("G")) return "group";
  if (id.startsWith("I")) return "imageConstant";
  return "element";
}

export function groupingPanel(doc: DiagramDoc, provisional = false): GraphPanelModel {
  const macro = new Map(doc.grouping.macro.map((m) => [m.node, m.label]));
  const nodes = doc.grouping.nodes.map((node) => ({
    id: node.id,
    label: macro.has(node.id) ? `${node.id} [${macro.get(node.id)}]` : node.id,
    kind: groupingNodeKind(node.id),
    macroLabel: macro.get(node.id),
    provisional,
  }));
  const edges = doc.grouping.edges.map(([parent, child]) => ({
    from: parent,
    to: child,
    label: "",
    style: "plain" as const,
    provisional,
  }));
  return { layer: "grouping", nodes, edges };
}

const CONNECTION_STYLE: Record<string, PanelEdge["style"]> = {
  undirected: "plain",
  directed: "arrow",
  bidirectional: "doubleArrow",
};

export function connectivityPanel(doc: DiagramDoc, provisional = false): GraphPanelModel {
  const ids = new Set<string>(doc.connectivity.nodes);
  for (const edge of doc.connectivity.edges) {
    ids.add(edge.source);
    ids.add(edge.target);
  }
  const nodes = [...ids].sort().map((id) => ({
    id,
    label: id,
    kind: groupingNodeKind(id),
    provisional,
  }));
  const edges = doc.connectivity.edges.map((edge) => ({
    from: edge.source,
    to: edge.target,
    label: edge.kind,
    style: CONNECTION_STYLE[edge.kind] ?? ("plain" as const),
    provisional,
  }));
  return { layer: "connectivity", nodes, edges };
}

export function rstPanel(doc: DiagramDoc, provisional = false): GraphPanelModel {
  const nodes = doc.rst.nodes.map((node) => {
    if (node.kind === "relation") {
      return {
        id: node.id,
        label: `${node.id}: ${node.name ?? "?"}`,
        kind: "relation" as const,
        relationName: node.name,
        provisional,
      };
    }
    if (node.originalId) {
      return {
        id: node.id,
        label: `${node.id} (copy of ${node.originalId})`,
        kind: "split" as const,
        splitOf: node.originalId,
        provisional,
      };
    }
    return { id: node.id, label: node.id, kind: "element" as const, provisional };
  });
  const edges = doc.rst.edges.map((edge) => ({
    from: edge.child,
    to: edge.parent,
    label: edge.nuclearity === "nucleus" ? "n" : "s",
    style: (edge.nuclearity === "nucleus" ? "nucleus" : "satellite") as PanelEdge["style"],
    provisional,
  }));
  return { layer: "rst", nodes, edges };
}

export function buildPanel(
  doc: DiagramDoc,
  layer: GraphPanelModel["layer"],
  provisional = false,
): GraphPanelModel {
  switch (layer) {
    case "grouping":
      return groupingPanel(doc, provisional);
    case "connectivity":
      return connectivityPanel(doc, provisional);
    case "rst":
      return rstPanel(doc, provisional);
  }
}

/** Ids a participant picker may offer: parentless rst units plus grouping
 * nodes not yet bound in the discourse layer. */
export function bindableUnits(doc: DiagramDoc): string[] {
  const bound = new Set(doc.rst.edges.map((edge) => edge.child));
  const inRst = new Set(doc.rst.nodes.map((node) => node.id));
  const candidates = new Set<string>();
  for (const node of doc.rst.nodes) {
    if (!bound.has(node.id) && node.kind !== "relation") candidates.add(node.id);
  }
  for (const relation of doc.rst.nodes) {
    if (relation.kind === "relation" && !bound.has(relation.id)) {
      candidates.add(relation.id);
    }
  }
  for (const node of doc.grouping.nodes) {
    if (node.id !== "I0" && !inRst.has(node.id)) candidates.add(node.id);
  }
  return [...candidates].sort();
}

/**
 * Browser entry: wires the session, overlay and panels to the DOM.
 * Logic lives in the imported modules; this file only renders and routes
 * events.
 */

import { ApiClient, SchemaInfo } from "./api.js";
import { buildOverlay, hitTest, toggleSelection, LayerTab } from "./overlay.js";
import { AnnotationSession } from "./session.js";
import { TaskFlow } from "./tasks.js";

const client = new ApiClient("");

let session: AnnotationSession | null = null;
let schema: SchemaInfo | null = null;
let selection = new Set<string>();
let activeLayer: LayerTab = "grouping";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  schema = await client.getSchema();
  const listing = await client.listDiagrams();
  const picker = el<HTMLSelectElement>("diagram-picker");
  picker.innerHTML = "";
  for (const entry of listing) {
    const option = document.createElement("option");
    option.value = entry.id;
    option.textContent = `${entry.id} (${entry.status}, v${entry.version})`;
    picker.appendChild(option);
  }
  picker.onchange = () => openDiagram(picker.value);
  if (listing.length) await openDiagram(listing[0].id);
  el<HTMLButtonElement>("group-button").onclick = onGroup;
  el<HTMLButtonElement>("connect-button").onclick = onConnect;
  el<HTMLButtonElement>("relation-button").onclick = onRelation;
  el<HTMLButtonElement>("macro-button").onclick = onMacro;
  for (const layer of ["grouping", "connectivity", "rst"] as const) {
    el<HTMLButtonElement>(`tab-${layer}`).onclick = () => {
      activeLayer = layer;
      render();
    };
  }
  populateVocabulary();
}

async function openDiagram(id: string): Promise<void> {
  session = new AnnotationSession(client, id);
  session.onChange(render);
  selection = new Set();
  await session.load();
  const image = el<HTMLImageElement>("diagram-image");
  image.src = client.imageUrl(id);
  image.onerror = () => {
    image.removeAttribute("src");
  };
}

function populateVocabulary(): void {
  if (!schema) return;
  const relationPicker = el<HTMLSelectElement>("relation-name");
  relationPicker.innerHTML = "";
  for (const name of schema.relations) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = schema.multinuclear.includes(name)
      ? `${name} (multinuclear)`
      : name;
    relationPicker.appendChild(option);
  }
  const macroPicker = el<HTMLSelectElement>("macro-label");
  macroPicker.innerHTML = "";
  for (const label of schema.macroGroups) {
    const option = document.createElement("option");
    option.value = label;
    option.textContent = label;
    macroPicker.appendChild(option);
  }
  const kindPicker = el<HTMLSelectElement>("connection-kind");
  kindPicker.innerHTML = "";
  for (const kind of schema.connectionKinds) {
    const option = document.createElement("option");
    option.value = kind;
    option.textContent = kind;
    kindPicker.appendChild(option);
  }
}

function render(): void {
  if (!session?.doc) return;
  renderCanvas();
  renderPanel();
  renderStatus();
  el<HTMLButtonElement>("group-button").disabled = selection.size < 2;
}

function renderCanvas(): void {
  if (!session?.doc) return;
  const canvas = el<HTMLCanvasElement>("overlay-canvas");
  const model = buildOverlay(session.doc, selection);
  canvas.width = model.width || 600;
  canvas.height = model.height || 400;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const shape of model.shapes) {
    if (shape.kind === "imageConstant") continue;
    ctx.beginPath();
    const [startX, startY] = shape.outline[0];
    ctx.moveTo(startX, startY);
    for (const [x, y] of shape.outline.slice(1)) ctx.lineTo(x, y);
    if (shape.outline.length === 2) {
      // rectangle stored as two corners
      const [[x0, y0], [x1, y1]] = shape.outline;
      ctx.rect(Math.min(x0, x1), Math.min(y0, y1),
               Math.abs(x1 - x0), Math.abs(y1 - y0));
    } else {
      ctx.closePath();
    }
    ctx.lineWidth = shape.selected ? 3 : 1.5;
    ctx.strokeStyle = shape.color;
    ctx.stroke();
    if (shape.selected) {
      ctx.globalAlpha = 0.2;
      ctx.fillStyle = shape.color;
      ctx.fill();
      ctx.globalAlpha = 1;
    }
  }
  canvas.onclick = (event) => {
    const rect = canvas.getBoundingClientRect();
    const x = ((event.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((event.clientY - rect.top) / rect.height) * canvas.height;
    const hit = hitTest(model, x, y);
    if (hit && !hit.startsWith("I")) {
      selection = toggleSelection(selection, hit);
      render();
    }
  };
}

function renderPanel(): void {
  if (!session) return;
  const panel = session.panel(activeLayer);
  const list = el<HTMLUListElement>("panel-nodes");
  list.innerHTML = "";
  for (const node of panel.nodes) {
    const item = document.createElement("li");
    item.textContent = node.label + (node.provisional ? " (pending)" : "");
    item.className = `node-${node.kind}${node.provisional ? " provisional" : ""}`;
    item.onclick = () => {
      selection = toggleSelection(selection, node.id);
      render();
    };
    if (selection.has(node.id)) item.classList.add("selected");
    list.appendChild(item);
  }
  const edgeList = el<HTMLUListElement>("panel-edges");
  edgeList.innerHTML = "";
  for (const edge of panel.edges) {
    const item = document.createElement("li");
    const tag = edge.label ? ` [${edge.label}]` : "";
    item.textContent = `${edge.from} → ${edge.to}${tag}`;
    item.className = `edge-${edge.style}${edge.provisional ? " provisional" : ""}`;
    edgeList.appendChild(item);
  }
}

function renderStatus(): void {
  if (!session) return;
  const banner = el<HTMLDivElement>("status-banner");
  if (session.hasConflict) {
    banner.textContent =
      "Version conflict: the diagram changed elsewhere and was refetched.";
    banner.className = "conflict";
  } else if (session.lastError) {
    banner.textContent =
      `Rejected: ${session.lastError.code}: ${session.lastError.message}`;
    banner.className = "error";
  } else if (session.pending) {
    banner.textContent = `Waiting for server (${session.pending.action})`;
    banner.className = "pending";
  } else {
    banner.textContent = `v${session.version}`;
    banner.className = "ok";
  }
}

async function onGroup(): Promise<void> {
  if (!session || selection.size < 2) return;
  const outcome = await session.apply("addGroup", { children: [...selection] });
  if (outcome.ok) selection = new Set();
  render();
}

async function onConnect(): Promise<void> {
  if (!session || selection.size !== 2) return;
  const [source, target] = [...selection];
  const kind = el<HTMLSelectElement>("connection-kind").value;
  const outcome = await session.apply("addConnection", { source, target, kind });
  if (outcome.ok) selection = new Set();
  render();
}

async function onRelation(): Promise<void> {
  if (!session) return;
  const name = el<HTMLSelectElement>("relation-name").value;
  const nuclei = parseIds(el<HTMLInputElement>("relation-nuclei").value);
  const satellites = parseIds(el<HTMLInputElement>("relation-satellites").value);
  let outcome = await session.apply("addRelation", { name, nuclei, satellites });
  if (!outcome.ok && outcome.code === "ParticipantAlreadyBound") {
    // offer a split of the first bound unit and retry with the copy
    const bound = [...nuclei, ...satellites].find((unit) =>
      session!.doc!.rst.edges.some((edge) => edge.child === unit),
    );
    if (bound && window.confirm(`${bound} is already bound; split it?`)) {
      const split = await session.apply("splitNode", { node: bound });
      const copy = split.results?.copyId;
      if (split.ok && copy) {
        const swap = (units: string[]) =>
          units.map((unit) => (unit === bound ? copy : unit));
        outcome = await session.apply("addRelation", {
          name,
          nuclei: swap(nuclei),
          satellites: swap(satellites),
        });
      }
    }
  }
  render();
}

async function onMacro(): Promise<void> {
  if (!session || selection.size !== 1) return;
  const [node] = [...selection];
  const label = el<HTMLSelectElement>("macro-label").value;
  await session.apply("setMacro", { node, label });
  render();
}

function parseIds(value: string): string[] {
  return value
    .split(/[\s,]+/)
    .map((part) => part.trim())
    .filter(Boolean);
}

boot().catch((err) => {
  const banner = document.getElementById("status-banner");
  if (banner) {
    banner.textContent = `Failed to start: ${err}`;
    banner.className = "error";
  }
});

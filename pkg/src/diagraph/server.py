"""Local annotation service: corpus read/write with validate-on-write.

Serves the corpus over HTTP+JSON for the browser annotator. Writes go
through optimistic concurrency: each diagram carries an integer version
that a mutation must name; on success the mutated diagram is re-validated,
persisted to disk in canonical form and the version bumped by one. A
rejected mutation leaves both memory and disk untouched.

Also hosts the agreement-task feed used to run reliability experiments:
sampled units are served one at a time and responses accumulate in a
raw-annotation CSV under the corpus root.
"""

from __future__ import annotations

import csv
import datetime as _dt
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .agreement import AgreementTask, EmptyPopulation, sample_agreement_tasks
from .ingest import (
    CorpusManifest,
    ManifestEntry,
    load_diagram,
    read_manifest,
    serialize,
)
from .model import (
    ConnectionKind,
    CoreError,
    Diagram,
    MacroGroup,
    Nuclearity,
    RelationVocabulary,
    DEFAULT_RELATIONS,
)
from .validation import validate_diagram

ACTIONS = (
    "addGroup",
    "dissolveGroup",
    "setMacro",
    "addConnection",
    "removeConnection",
    "addRelation",
    "removeRelation",
    "splitNode",
)


class MutationRequest(BaseModel):
    expectedVersion: int
    action: str
    args: dict = {}


class TaskResponse(BaseModel):
    session: str
    taskId: str
    annotator: str
    label: str


@dataclass
class DiagramEntry:
    diagram: Diagram
    version: int
    manifest_entry: ManifestEntry
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_modified: str = ""


@dataclass
class TaskSession:
    session_id: str
    layer: str
    tasks: list[AgreementTask]
    cursors: dict[str, int] = field(default_factory=dict)
    responses: dict[tuple[str, str], str] = field(default_factory=dict)  # (task, annotator)
    annotators: list[str] = field(default_factory=list)


def _bad_mutation(code: str, message: str) -> HTTPException:
    return HTTPException(status_code=422, detail={"code": code, "message": message})


def apply_action(
    diagram: Diagram, action: str, args: dict, vocabulary: RelationVocabulary
) -> tuple[Diagram, dict]:
    """Run one mutation through the core model; returns the new diagram
    and any allocation results (new group/relation/copy ids)."""
    try:
        if action == "addGroup":
            new, gid = diagram.add_group(list(args["children"]))
            return new, {"groupId": gid}
        if action == "dissolveGroup":
            return diagram.dissolve_group(args["node"]), {}
        if action == "setMacro":
            label = MacroGroup(args["label"])
            return diagram.set_macro_label(args["node"], label), {}
        if action == "addConnection":
            kind = ConnectionKind(args["kind"])
            return diagram.add_connection(args["source"], args["target"], kind), {}
        if action == "removeConnection":
            kind = ConnectionKind(args["kind"])
            return diagram.remove_connection(args["source"], args["target"], kind), {}
        if action == "addRelation":
            new, rid = diagram.add_relation(
                args["name"],
                list(args.get("nuclei", [])),
                list(args.get("satellites", [])),
                vocabulary,
            )
            return new, {"relationId": rid}
        if action == "removeRelation":
            return diagram.remove_relation(args["node"]), {}
        if action == "splitNode":
            new, copy_id = diagram.split_node(args["node"])
            return new, {"copyId": copy_id}
    except CoreError as exc:
        raise _bad_mutation(exc.code, str(exc)) from exc
    except ValueError as exc:
        raise _bad_mutation("BadArgument", str(exc)) from exc
    except KeyError as exc:
        raise _bad_mutation("BadArgument", f"missing argument: {exc}") from exc
    raise _bad_mutation("UnknownAction", f"action must be one of {ACTIONS}")


def diagram_document(entry: DiagramEntry) -> dict:
    import json

    doc = json.loads(serialize(entry.diagram).decode("utf-8"))
    doc["version"] = entry.version
    doc["lastModified"] = entry.last_modified or None
    doc["imagePath"] = entry.manifest_entry.image_path
    doc["semanticCategory"] = (
        entry.diagram.semantic_category or entry.manifest_entry.semantic_category
    )
    layout = entry.diagram.layout
    doc["layout"] = {
        "width": layout.image_width,
        "height": layout.image_height,
        "elements": [
            {
                "id": e.id,
                "kind": e.kind.value,
                "outline": [list(p) for p in e.outline],
                "text": e.text_content,
            }
            for e in layout.elements
        ],
    }
    return doc


def create_app(
    corpus_root: str | Path | None = None,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> FastAPI:
    """Build the service around one mounted corpus.

    ``corpus_root`` falls back to the DIAGRAPH_CORPUS_ROOT environment
    variable; with neither set the API answers 503 until remounted.
    """
    app = FastAPI(title="diagraph annotation server")
    state: dict = {"entries": {}, "manifest": None, "sessions": {}}
    sessions_lock = threading.Lock()

    root = corpus_root or os.environ.get("DIAGRAPH_CORPUS_ROOT")
    if root:
        mount_corpus(state, Path(root), vocabulary)

    def require_mounted() -> dict[str, DiagramEntry]:
        if state["manifest"] is None:
            raise HTTPException(status_code=503, detail="no corpus mounted")
        return state["entries"]

    def require_entry(diagram_id: str) -> DiagramEntry:
        entries = require_mounted()
        entry = entries.get(diagram_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown diagram {diagram_id}")
        return entry

    @app.get("/schema")
    def get_schema() -> dict:
        return {
            "relations": sorted(vocabulary.names),
            "multinuclear": sorted(vocabulary.multinuclear),
            "macroGroups": [m.value for m in MacroGroup],
            "connectionKinds": [k.value for k in ConnectionKind],
            "actions": list(ACTIONS),
        }

    @app.get("/diagrams")
    def list_diagrams() -> list[dict]:
        entries = require_mounted()
        out = []
        for diagram_id in sorted(entries):
            entry = entries[diagram_id]
            report = validate_diagram(entry.diagram, vocabulary)
            out.append({
                "id": diagram_id,
                "semanticCategory": (
                    entry.diagram.semantic_category
                    or entry.manifest_entry.semantic_category
                ),
                "status": "ok" if report.ok else "error",
                "version": entry.version,
                "lastModified": entry.last_modified or None,
            })
        return out

    @app.get("/diagrams/{diagram_id}")
    def get_diagram(diagram_id: str, response: Response) -> dict:
        entry = require_entry(diagram_id)
        with entry.lock:
            doc = diagram_document(entry)
        response.headers["ETag"] = str(doc["version"])
        return doc

    @app.get("/diagrams/{diagram_id}/image")
    def get_image(diagram_id: str):
        entry = require_entry(diagram_id)
        image = entry.manifest_entry.image_path
        if not image:
            raise HTTPException(status_code=404, detail="diagram has no image")
        path = state["manifest"].resolve(image)
        if not path.is_file():
            raise HTTPException(status_code=404, detail="image file missing")
        return FileResponse(path)

    @app.post("/diagrams/{diagram_id}/mutations")
    def mutate(diagram_id: str, request: MutationRequest) -> JSONResponse:
        entry = require_entry(diagram_id)
        with entry.lock:
            if request.expectedVersion != entry.version:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "code": "VersionConflict",
                        "currentVersion": entry.version,
                    },
                )
            mutated, results = apply_action(
                entry.diagram, request.action, request.args, vocabulary
            )
            report = validate_diagram(mutated, vocabulary)
            if not report.ok:
                first = report.errors[0]
                raise _bad_mutation(first.code, f"{first.path}: {first.message}")
            # write-through before the version becomes visible
            path = state["manifest"].resolve(entry.manifest_entry.annotation_path)
            payload = serialize(mutated)
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(payload)
            tmp.replace(path)
            entry.diagram = mutated
            entry.version += 1
            entry.last_modified = _dt.datetime.now(_dt.timezone.utc).isoformat()
            return JSONResponse({
                "version": entry.version,
                "results": results,
                "report": report.to_dict(),
            })

    @app.get("/tasks/{layer}")
    def task_feed(
        layer: str,
        fraction: float = 0.1,
        seed: int = 0,
        session: str = "default",
        annotator: str = "anonymous",
    ) -> dict:
        require_mounted()
        key = f"{layer}:{session}"
        with sessions_lock:
            task_session = state["sessions"].get(key)
            if task_session is None:
                diagrams = [e.diagram for _, e in sorted(state["entries"].items())]
                try:
                    tasks = sample_agreement_tasks(
                        diagrams, layer, fraction, seed, vocabulary
                    )
                except EmptyPopulation as exc:
                    raise HTTPException(status_code=404, detail=str(exc)) from exc
                except ValueError as exc:
                    raise HTTPException(status_code=422, detail=str(exc)) from exc
                task_session = TaskSession(session, layer, tasks)
                state["sessions"][key] = task_session
            cursor = task_session.cursors.get(annotator, 0)
            if cursor >= len(task_session.tasks):
                raise HTTPException(status_code=410, detail="task stream exhausted")
            task = task_session.tasks[cursor]
            return {
                "taskId": task.id,
                "layer": task.layer,
                "diagram": task.diagram_id,
                "unit": task.unit,
                "highlight": list(task.highlight),
                "question": task.question,
                "choices": list(task.choices),
                "hopDepth": task.hop_depth,
                "position": cursor + 1,
                "total": len(task_session.tasks),
            }

    @app.post("/tasks/{layer}/responses")
    def post_response(layer: str, response: TaskResponse) -> dict:
        require_mounted()
        key = f"{layer}:{response.session}"
        with sessions_lock:
            task_session = state["sessions"].get(key)
            if task_session is None:
                raise HTTPException(status_code=404, detail="no such task session")
            by_id = {t.id: t for t in task_session.tasks}
            task = by_id.get(response.taskId)
            if task is None:
                raise HTTPException(status_code=404, detail="unknown task id")
            if response.annotator not in task_session.annotators:
                task_session.annotators.append(response.annotator)
            task_session.responses[(response.taskId, response.annotator)] = response.label
            cursor = task_session.cursors.get(response.annotator, 0)
            task_session.cursors[response.annotator] = max(
                cursor,
                task_session.tasks.index(task) + 1,
            )
            csv_path = _write_session_csv(state["manifest"], task_session)
            done = task_session.cursors[response.annotator] >= len(task_session.tasks)
            return {
                "recorded": True,
                "remaining": len(task_session.tasks)
                - task_session.cursors[response.annotator],
                "complete": done,
                "csv": str(csv_path),
            }

    app.state.mount = lambda path: mount_corpus(state, Path(path), vocabulary)
    app.state.corpus = state
    return app


def mount_corpus(
    state: dict, corpus_root: Path, vocabulary: RelationVocabulary
) -> None:
    manifest = read_manifest(corpus_root)
    entries: dict[str, DiagramEntry] = {}
    for manifest_entry in manifest.entries:
        diagram = load_diagram(manifest, manifest_entry, vocabulary)
        entries[manifest_entry.diagram_id] = DiagramEntry(
            diagram=diagram, version=1, manifest_entry=manifest_entry
        )
    state["manifest"] = manifest
    state["entries"] = entries
    state["sessions"] = {}


def _write_session_csv(manifest: CorpusManifest, session: TaskSession) -> Path:
    """Rewrite the session's raw-annotation CSV.

    Annotator columns are named annotator_1..n in first-response order
    (the mapping to reported names sits beside the CSV); incomplete cells
    stay empty until every annotator has answered.
    """
    out_dir = manifest.corpus_root / "responses"
    out_dir.mkdir(exist_ok=True)
    path = out_dir / f"{session.layer}_{session.session_id}.csv"
    columns = [f"annotator_{i + 1}" for i in range(len(session.annotators))]
    with_hop = session.layer == "rst"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        header = ["item", *columns, "layer", "diagram"]
        if with_hop:
            header.append("hop")
        writer.writerow(header)
        for task in session.tasks:
            cells = [
                session.responses.get((task.id, annotator), "")
                for annotator in session.annotators
            ]
            if not any(cells):
                continue
            row = [task.id, *cells, session.layer, task.diagram_id]
            if with_hop:
                row.append("" if task.hop_depth is None else str(task.hop_depth))
            writer.writerow(row)
    mapping = out_dir / f"{session.layer}_{session.session_id}.annotators.csv"
    with open(mapping, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["column", "annotator"])
        for i, annotator in enumerate(session.annotators):
            writer.writerow([f"annotator_{i + 1}", annotator])
    return path

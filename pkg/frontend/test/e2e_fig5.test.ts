/**
 * End-to-end: drive the real annotation server through the client session,
 * turning a bare layout skeleton into the classic title-over-labelled-
 * illustration discourse shape (a joint of labels under an elaboration,
 * preparation at the root). Every edit must be server-acknowledged, a bad
 * edit must visibly roll back, and the final corpus must pass the CLI
 * validator with exit 0.
 */

import assert from "node:assert/strict";
import { execFile, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync, rmSync, mkdirSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { test } from "node:test";

import { ApiClient } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";

const execFileAsync = promisify(execFile);

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "..");
const PYTHON_ENV = {
  ...process.env,
  PYTHONPATH: join(REPO_ROOT, "src"),
};

function faceLayoutDoc(): unknown {
  const texts: Record<string, unknown> = {};
  for (const i of [0, 1, 2, 3, 4, 5]) {
    texts[`T${i}`] = {
      rectangle: [[10, 10 + 20 * i], [80, 24 + 20 * i]],
      value: i === 3 ? "FACE" : `part ${i}`,
    };
  }
  return {
    id: "face",
    text: texts,
    blobs: { B0: { polygon: [[100, 10], [220, 10], [220, 180], [100, 180]] } },
    arrows: {},
    arrowheads: {},
    imageConstants: { I0: {} },
    imageDimensions: { width: 240, height: 200 },
  };
}

async function waitForServer(base: string, tries = 50): Promise<void> {
  for (let i = 0; i < tries; i++) {
    try {
      const response = await fetch(`${base}/diagrams`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("annotation server never came up");
}

test("scripted session reproduces the joint/elaboration/preparation tree", async () => {
  const workdir = mkdtempSync(join(tmpdir(), "diagraph-e2e-"));
  const srcDir = join(workdir, "layouts");
  const corpusDir = join(workdir, "corpus");
  mkdirSync(srcDir);
  writeFileSync(join(srcDir, "face.json"), JSON.stringify(faceLayoutDoc()));

  const convert = await execFileAsync(
    "python3",
    ["-m", "diagraph.cli", "convert", srcDir, "--out", corpusDir],
    { env: PYTHON_ENV },
  );
  assert.match(convert.stdout, /converted 1 diagram/);

  const port = 18000 + Math.floor(Math.random() * 10000);
  const base = `http://127.0.0.1:${port}`;
  let server: ChildProcess | null = null;
  try {
    server = spawn(
      "python3",
      ["-m", "diagraph.cli", "serve", "--port", String(port),
       "--corpus", corpusDir],
      { env: PYTHON_ENV, stdio: "ignore" },
    );
    await waitForServer(base);

    const client = new ApiClient(base);
    const session = new AnnotationSession(client, "face");
    await session.load();
    assert.equal(session.version, 1);
    assert.equal(session.doc?.rst.nodes.length, 0); // skeleton: empty layers

    // build the discourse tree bottom-up, every step acknowledged
    const joint = await session.apply("addRelation", {
      name: "joint",
      nuclei: ["T0", "T1", "T2", "T4", "T5"],
      satellites: [],
    });
    assert.equal(joint.ok, true);
    const jointId = joint.results!.relationId!;
    assert.equal(session.version, 2);

    // a single-nucleus joint must be rejected and visibly rolled back
    const beforeBadEdit = JSON.stringify(session.panel("rst"));
    const bad = await session.apply("addRelation", {
      name: "joint",
      nuclei: ["B0"],
      satellites: [],
    });
    assert.equal(bad.ok, false);
    assert.equal(bad.code, "NuclearityViolation");
    assert.equal(session.lastError?.code, "NuclearityViolation");
    assert.equal(session.version, 2); // nothing moved
    assert.equal(JSON.stringify(session.panel("rst")), beforeBadEdit);

    const elaboration = await session.apply("addRelation", {
      name: "elaboration",
      nuclei: ["B0"],
      satellites: [jointId],
    });
    assert.equal(elaboration.ok, true);
    const elaborationId = elaboration.results!.relationId!;

    const preparation = await session.apply("addRelation", {
      name: "preparation",
      nuclei: [elaborationId],
      satellites: ["T3"],
    });
    assert.equal(preparation.ok, true);
    const preparationId = preparation.results!.relationId!;
    assert.equal(session.version, 4);

    // the panel equals a fresh server read, edge for edge
    const fresh = await client.getDiagram("face");
    assert.deepEqual(session.doc, fresh);
    const edges = new Set(
      fresh.rst.edges.map((e) => `${e.child}>${e.parent}:${e.nuclearity}`),
    );
    for (const t of ["T0", "T1", "T2", "T4", "T5"]) {
      assert.ok(edges.has(`${t}>${jointId}:nucleus`));
    }
    assert.ok(edges.has(`B0>${elaborationId}:nucleus`));
    assert.ok(edges.has(`${jointId}>${elaborationId}:satellite`));
    assert.ok(edges.has(`${elaborationId}>${preparationId}:nucleus`));
    assert.ok(edges.has(`T3>${preparationId}:satellite`));
    assert.equal(fresh.rst.edges.length, 9);
  } finally {
    server?.kill();
  }

  // the persisted corpus passes the batch validator
  const validated = await execFileAsync(
    "python3",
    ["-m", "diagraph.cli", "validate", corpusDir],
    { env: PYTHON_ENV },
  ).catch((err) => {
    throw new Error(`validate exited nonzero: ${err.stdout}\n${err.stderr}`);
  });
  assert.match(validated.stdout, /face: ok/);

  rmSync(workdir, { recursive: true, force: true });
});

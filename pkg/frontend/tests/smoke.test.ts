/** End-to-end smoke test against a real server process.
 *
 * Builds a tiny two-theme demo model with the Python CLI, serves it, and
 * drives the explorer's client, state, and renderers against live responses.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, type DocumentView, type MapExport } from "../src/api.js";
import { emptyCache, renderApp, topLevelTopics } from "../src/render.js";
import { initialExplorer, openDocument, recordUpload, setQuery } from "../src/state.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const PACKAGE_SRC = path.resolve(HERE, "..", "..", "src");
const PYTHON = process.env.PYTHON ?? "python3";

const pythonEnv = {
  ...process.env,
  PYTHONPATH: process.env.PYTHONPATH
    ? `${PACKAGE_SRC}${path.delimiter}${process.env.PYTHONPATH}`
    : PACKAGE_SRC,
};

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("could not determine a free port"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

function runPython(args: string[]): Promise<void> {
  return new Promise((resolve, reject) => {
    const child = spawn(PYTHON, args, { env: pythonEnv });
    let output = "";
    child.stdout.on("data", (chunk) => (output += chunk));
    child.stderr.on("data", (chunk) => (output += chunk));
    child.on("error", reject);
    child.on("close", (code) => {
      if (code === 0) resolve();
      else reject(new Error(`${PYTHON} ${args.join(" ")} exited ${code}:\n${output}`));
    });
  });
}

describe("live explorer smoke", () => {
  let workDir: string;
  let server: ChildProcessWithoutNullStreams | null = null;
  let serverLog = "";
  let api: ApiClient;
  let map: MapExport;

  beforeAll(async () => {
    workDir = await mkdtemp(path.join(tmpdir(), "explorer-smoke-"));
    await runPython([path.join(HERE, "build_demo.py"), workDir]);

    const port = await freePort();
    const base = `http://127.0.0.1:${port}`;
    server = spawn(
      PYTHON,
      [
        "-m",
        "hiertm.cli",
        "serve",
        "--model-dir",
        path.join(workDir, "hier"),
        "--corpus",
        path.join(workDir, "demo.bow"),
        "--collection-id",
        "demo",
        "--sidecar",
        path.join(workDir, "sidecar.jsonl"),
        "--host",
        "127.0.0.1",
        "--port",
        String(port),
      ],
      { env: pythonEnv },
    );
    server.stdout.on("data", (chunk) => (serverLog += chunk));
    server.stderr.on("data", (chunk) => (serverLog += chunk));

    api = new ApiClient(base);
    const deadline = Date.now() + 60_000;
    for (;;) {
      if (server.exitCode !== null) {
        throw new Error(`server exited early (${server.exitCode}):\n${serverLog}`);
      }
      try {
        map = await api.getMap();
        break;
      } catch {
        if (Date.now() > deadline) {
          throw new Error(`server never became ready:\n${serverLog}`);
        }
        await new Promise((tick) => setTimeout(tick, 250));
      }
    }
  });

  afterAll(async () => {
    if (server && server.exitCode === null) {
      const gone = new Promise((resolve) => server?.once("close", resolve));
      server.kill("SIGTERM");
      await gone;
    }
    if (workDir) await rm(workDir, { recursive: true, force: true });
  });

  /** Doc with the strongest single assignment anywhere in the deepest level. */
  function strongestAssignment(): { docId: string; leafTopic: string } {
    const leafLevel = map.levels[map.levels.length - 1]!;
    let best = { weight: -1, docId: "", leafTopic: "" };
    for (const topicId of leafLevel.topic_ids) {
      for (const doc of map.documents[topicId] ?? []) {
        if (doc.weight > best.weight) {
          best = { weight: doc.weight, docId: doc.id, leafTopic: topicId };
        }
      }
    }
    expect(best.docId).not.toBe("");
    return best;
  }

  it("renders every top-level topic as a map tile", () => {
    const roots = topLevelTopics(map);
    expect(roots.length).toBeGreaterThan(1);
    for (const topic of roots) {
      expect(topic.spectre_rank).not.toBeNull();
    }

    const cache = emptyCache();
    cache.map = map;
    const html = renderApp(initialExplorer(), cache);
    for (const topic of roots) {
      expect(html).toContain(`data-topic="${topic.id}"`);
    }
    const positions = roots.map((t) => html.indexOf(`data-topic="${t.id}"`));
    expect(positions).toEqual([...positions].sort((a, b) => a - b));
  });

  it("highlights a topic when one of its top tokens is typed", async () => {
    const topic = topLevelTopics(map)[0]!;
    let token: string | null = null;
    let response = null;
    for (const candidate of topic.top_words["10"]) {
      const attempt = await api.search(candidate);
      if (!attempt.oov) {
        token = candidate;
        response = attempt;
        break;
      }
    }
    expect(token).not.toBeNull();
    expect(response!.topics[0]!.id).toBe(topic.id);
    expect(response!.topics[0]!.match_count).toBeGreaterThan(0);

    const explorer = setQuery(initialExplorer(), token!);
    const cache = emptyCache();
    cache.map = map;
    cache.search = response;
    const html = renderApp(explorer, cache);
    expect(html).toMatch(
      new RegExp(`class="cell highlight"[^>]*data-topic="${topic.id}"`),
    );
    expect(html).toContain("match");
  });

  it("highlights the dominant topic of an uploaded training document", async () => {
    const { docId, leafTopic } = strongestAssignment();
    const parents = topLevelTopics(map)
      .filter((t) => t.children.includes(leafTopic))
      .map((t) => t.id);
    expect(parents.length).toBeGreaterThan(0);

    const doc = await api.getDocument(docId);
    expect(doc.text.length).toBeGreaterThan(0);
    const response = await api.upload(doc.text);
    expect(response.topics.length).toBeGreaterThan(0);
    const winner = response.topics[0]!.id;
    expect(parents).toContain(winner);

    const explorer = recordUpload(initialExplorer(), doc.title, response);
    const cache = emptyCache();
    cache.map = map;
    const html = renderApp(explorer, cache);
    expect(html).toMatch(
      new RegExp(`class="cell highlight"[^>]*data-topic="${winner}"`),
    );
    expect(html).toContain("uploaded");
  });

  it("shows at most five tag and five similar-document suggestions", async () => {
    const { docId } = strongestAssignment();
    const doc: DocumentView = await api.getDocument(docId);
    expect(doc.suggested_tags.length).toBeGreaterThan(0);
    expect(doc.suggested_tags.length).toBeLessThanOrEqual(5);
    expect(doc.similar_docs.length).toBeGreaterThan(0);
    expect(doc.similar_docs.length).toBeLessThanOrEqual(5);

    const explorer = openDocument(initialExplorer(), docId);
    const cache = emptyCache();
    cache.map = map;
    cache.document = doc;
    const html = renderApp(explorer, cache);
    expect(html).toContain('class="suggested"');
    expect(html).toContain('class="similar"');
    expect(html).toContain(doc.suggested_tags[0]!.tag);
    expect(html).toContain(doc.similar_docs[0]!.title);
  });
});

/** Pure HTML renderers: every view is a function of the navigation state and
 * the most recent API responses, so rendering never mutates anything. */

import type {
  DocRef,
  DocumentView,
  HighlightResponse,
  MapExport,
  TopicCell,
} from "./api.js";
import { crumbLabel, current, type Explorer, type ViewState, MAX_LOD } from "./state.js";
import { layoutTreemap, type TileInput } from "./treemap.js";

export interface ResponseCache {
  map: MapExport | null;
  mapError: string | null;
  search: HighlightResponse | null;
  searchStale: boolean;
  document: DocumentView | null;
  documentMissing: string | null;
  pages: Record<string, DocRef[]>;
  pagesDone: Record<string, boolean>;
  notice: string | null;
}

export function emptyCache(): ResponseCache {
  return {
    map: null,
    mapError: null,
    search: null,
    searchStale: false,
    document: null,
    documentMissing: null,
    pages: {},
    pagesDone: {},
    notice: null,
  };
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const DOCS_PER_PAGE = 10;
/** Floor on relative tile area so shrunken topics stay clickable. */
const MIN_TILE_WEIGHT = 0.05;

function topicById(map: MapExport, id: string): TopicCell | undefined {
  return map.topics.find((t) => t.id === id);
}

export function topLevelTopics(map: MapExport): TopicCell[] {
  return map.topics
    .filter((t) => t.level === 0)
    .sort((a, b) => (a.spectre_rank ?? 0) - (b.spectre_rank ?? 0));
}

/** Documents of a cell: own list for deep topics, children's union for roots. */
export function cellDocuments(map: MapExport, topic: TopicCell): DocRef[] {
  if (topic.level > 0) return map.documents[topic.id] ?? [];
  const merged: DocRef[] = [];
  const seen = new Set<string>();
  for (const child of topic.children) {
    for (const doc of map.documents[child] ?? []) {
      if (!seen.has(doc.id)) {
        seen.add(doc.id);
        merged.push(doc);
      }
    }
  }
  return merged.sort((a, b) => b.weight - a.weight || a.id.localeCompare(b.id));
}

function activeHighlight(
  state: ViewState,
  cache: ResponseCache,
): HighlightResponse | null {
  if (state.upload) return state.upload.response;
  if (state.query.trim() && cache.search) return cache.search;
  return null;
}

function tileWeights(
  topics: TopicCell[],
  highlight: HighlightResponse | null,
): TileInput[] {
  if (!highlight || highlight.topics.length === 0) {
    return topics.map((t) => ({ id: t.id, weight: 1 }));
  }
  const relevance = new Map(highlight.topics.map((t) => [t.id, t.weight]));
  return topics.map((t) => ({
    id: t.id,
    weight: Math.max(relevance.get(t.id) ?? 0, MIN_TILE_WEIGHT),
  }));
}

function matchedDocIds(highlight: HighlightResponse | null): Set<string> {
  const ids = new Set<string>();
  for (const topic of highlight?.topics ?? []) {
    for (const id of topic.matched_doc_ids) ids.add(id);
  }
  return ids;
}

function docItem(doc: DocRef, matched: Set<string>): string {
  const cls = matched.has(doc.id) ? "doc match" : "doc";
  return (
    `<li><a href="#" class="${cls}" data-action="open-doc" ` +
    `data-doc="${escapeHtml(doc.id)}">${escapeHtml(doc.title)}</a></li>`
  );
}

function cellBody(
  topic: TopicCell,
  map: MapExport,
  state: ViewState,
  cache: ResponseCache,
  matched: Set<string>,
): string {
  const cell = state.cells[topic.id] ?? { lod: 0, pages: 0 };
  const parts: string[] = [];
  const tags = topic.top_tags.length > 0 ? topic.top_tags : topic.top_words["3"];
  parts.push(`<p class="tags">${tags.map(escapeHtml).join(", ")}</p>`);
  if (cell.lod >= 1 && topic.children.length > 0) {
    const subtags = topic.children.map((childId) => {
      const child = topicById(map, childId);
      const label = child
        ? (child.top_tags[0] ?? child.top_words["3"][0] ?? childId)
        : childId;
      return escapeHtml(label);
    });
    parts.push(`<p class="subtopics">${subtags.join(", ")}</p>`);
  }
  if (cell.lod >= 2) {
    const docs = cellDocuments(map, topic);
    const visible =
      cell.lod === MAX_LOD
        ? docs
            .slice(0, DOCS_PER_PAGE * (1 + cell.pages))
            .concat((cache.pages[topic.id] ?? []).slice(0))
        : docs.slice(0, DOCS_PER_PAGE);
    const items = visible.map((doc) => docItem(doc, matched)).join("");
    const scroll = cell.lod === MAX_LOD ? " scroll" : "";
    parts.push(`<ul class="docs${scroll}">${items}</ul>`);
    if (cell.lod === MAX_LOD && !cache.pagesDone[topic.id]) {
      parts.push(
        `<button class="more" data-action="more-docs" ` +
          `data-topic="${escapeHtml(topic.id)}" data-level="${topic.level}">(…)</button>`,
      );
    }
  }
  return parts.join("");
}

function renderMap(state: ViewState, cache: ResponseCache): string {
  if (cache.mapError) {
    return (
      `<div class="banner error">map unavailable: ${escapeHtml(cache.mapError)} ` +
      `<button data-action="retry-map">retry</button></div>`
    );
  }
  const map = cache.map;
  if (!map) return `<div class="banner">loading map…</div>`;

  const focus = state.view.kind === "map" ? state.view.focus : null;
  let topics: TopicCell[];
  if (focus === null) {
    topics = topLevelTopics(map);
  } else {
    const parent = topicById(map, focus);
    topics = (parent?.children ?? [])
      .map((id) => topicById(map, id))
      .filter((t): t is TopicCell => t !== undefined);
  }

  const highlight = activeHighlight(state, cache);
  const highlighted = new Map(
    (highlight?.topics ?? []).map((t) => [t.id, t.match_count]),
  );
  const matched = matchedDocIds(highlight);
  const weights = tileWeights(topics, focus === null ? highlight : null);
  const tiles = layoutTreemap(weights, { x: 0, y: 0, width: 100, height: 100 });

  const cells = tiles.map((tile, i) => {
    const topic = topics[i];
    if (!topic) return "";
    const marked = focus === null && highlighted.has(topic.id);
    const count = highlighted.get(topic.id);
    const badge =
      marked && state.query.trim()
        ? `<span class="count">${count} match${count === 1 ? "" : "es"}</span>`
        : "";
    const zoom =
      topic.children.length > 0
        ? `<button class="zoom" data-action="zoom" data-topic="${escapeHtml(topic.id)}">⊕</button>`
        : "";
    const style =
      `left:${tile.x.toFixed(3)}%;top:${tile.y.toFixed(3)}%;` +
      `width:${tile.width.toFixed(3)}%;height:${tile.height.toFixed(3)}%`;
    return (
      `<section class="cell${marked ? " highlight" : ""}" style="${style}" ` +
      `data-topic="${escapeHtml(topic.id)}" data-action="cell">` +
      `<header><h3>${escapeHtml(topic.id)}</h3>${badge}${zoom}</header>` +
      cellBody(topic, map, state, cache, matched) +
      `</section>`
    );
  });

  const notes: string[] = [];
  if (highlight && state.query.trim()) {
    if (highlight.oov) {
      notes.push(`<p class="note">query words are out of vocabulary</p>`);
    } else if (highlight.total_matches === 0) {
      notes.push(`<p class="note">no matches</p>`);
    } else {
      notes.push(
        `<p class="note">${highlight.total_matches} matching documents</p>`,
      );
    }
  }
  if (state.upload) {
    notes.push(
      `<p class="note">uploaded ${escapeHtml(state.upload.label)}; its topics are highlighted</p>`,
    );
  }
  if (cache.searchStale) {
    notes.push(`<p class="note stale">results may be stale</p>`);
  }
  const up =
    focus !== null
      ? `<button data-action="back" class="up">← up from ${escapeHtml(focus)}</button>`
      : "";
  return `${notes.join("")}${up}<div class="map">${cells.join("")}</div>`;
}

function renderDocument(state: ViewState, cache: ResponseCache): string {
  const docId = state.view.kind === "document" ? state.view.docId : "";
  if (cache.documentMissing === docId) {
    return (
      `<div class="panel notfound"><p>document ${escapeHtml(docId)} was not found.</p>` +
      `<a href="#" data-action="back">back</a></div>`
    );
  }
  const doc = cache.document;
  if (!doc || doc.id !== docId) {
    return `<div class="panel">loading document…</div>`;
  }
  const tagSection =
    doc.tags.length > 0
      ? `<p class="tags">tags: ${doc.tags.map(escapeHtml).join(", ")}</p>`
      : "";
  const suggested = doc.suggested_tags
    .map(
      (t) =>
        `<li>${escapeHtml(t.tag)} <span class="weight">${t.weight.toFixed(3)}</span></li>`,
    )
    .join("");
  const similar = doc.similar_docs
    .map(
      (s) =>
        `<li><a href="#" data-action="open-doc" data-doc="${escapeHtml(s.id)}">` +
        `${escapeHtml(s.title)}</a> <span class="weight">${s.similarity.toFixed(3)}</span></li>`,
    )
    .join("");
  return (
    `<article class="panel document">` +
    `<a href="#" data-action="back">← back</a>` +
    `<h2>${escapeHtml(doc.title)}</h2>` +
    `<p class="byline">${escapeHtml(doc.author)} · ` +
    `<span class="badge">${escapeHtml(doc.collection)}</span></p>` +
    tagSection +
    `<p class="text">${escapeHtml(doc.text)}</p>` +
    `<h4>suggested tags</h4><ul class="suggested">${suggested}</ul>` +
    `<h4>similar documents</h4><ul class="similar">${similar}</ul>` +
    `</article>`
  );
}

function renderBreadcrumbs(explorer: Explorer): string {
  const crumbs = explorer.trail.map((state, i) => {
    const label = escapeHtml(crumbLabel(state));
    if (i === explorer.trail.length - 1) {
      return `<span class="crumb here">${label}</span>`;
    }
    return `<a href="#" class="crumb" data-action="crumb" data-index="${i}">${label}</a>`;
  });
  return `<nav class="breadcrumbs">${crumbs.join(" / ")}</nav>`;
}

export function renderApp(explorer: Explorer, cache: ResponseCache): string {
  const state = current(explorer);
  const view =
    state.view.kind === "document"
      ? renderDocument(state, cache)
      : renderMap(state, cache);
  const notice = cache.notice
    ? `<div class="banner notice">${escapeHtml(cache.notice)} ` +
      `<button data-action="dismiss">dismiss</button></div>`
    : "";
  return (
    `<header class="toolbar">` +
    `<input type="search" id="query" placeholder="search as you type" ` +
    `value="${escapeHtml(state.query)}">` +
    `<textarea id="upload-text" placeholder="paste a document"></textarea>` +
    `<button data-action="upload">upload</button>` +
    `</header>` +
    renderBreadcrumbs(explorer) +
    notice +
    `<main>${view}</main>`
  );
}

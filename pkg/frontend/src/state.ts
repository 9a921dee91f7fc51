/** View-state machine for the explorer.
 *
 * Navigation is a strict stack: every view change pushes the state it leaves
 * behind, and popping restores that state exactly. In-place refinements of the
 * current view (typing a query, cycling a cell's level of detail, paging a
 * document list) replace the top of the stack without growing it, so clearing
 * a query is the identity round trip rather than a history entry.
 */

import type { HighlightResponse } from "./api.js";

export type View =
  | { kind: "map"; focus: string | null }
  | { kind: "document"; docId: string };

export interface CellView {
  /** 0 = top tags, 1 = + subtopic tags, 2 = + top docs, 3 = scrollable docs. */
  lod: number;
  /** Extra pages of documents revealed while in the scroll state. */
  pages: number;
}

export interface UploadHighlight {
  label: string;
  response: HighlightResponse;
}

export interface ViewState {
  view: View;
  query: string;
  upload: UploadHighlight | null;
  cells: Record<string, CellView>;
}

export interface Explorer {
  /** Breadcrumb trail; never empty, the last entry is the current state. */
  trail: ViewState[];
}

export const MAX_LOD = 3;

export const ROOT_VIEW_STATE: ViewState = {
  view: { kind: "map", focus: null },
  query: "",
  upload: null,
  cells: {},
};

export function initialExplorer(): Explorer {
  return { trail: [ROOT_VIEW_STATE] };
}

export function current(explorer: Explorer): ViewState {
  const state = explorer.trail[explorer.trail.length - 1];
  if (state === undefined) throw new Error("breadcrumb trail is empty");
  return state;
}

function push(explorer: Explorer, next: ViewState): Explorer {
  return { trail: [...explorer.trail, next] };
}

function replace(explorer: Explorer, next: ViewState): Explorer {
  return { trail: [...explorer.trail.slice(0, -1), next] };
}

export function openDocument(explorer: Explorer, docId: string): Explorer {
  const state = current(explorer);
  return push(explorer, { ...state, view: { kind: "document", docId } });
}

export function focusTopic(explorer: Explorer, focus: string | null): Explorer {
  const state = current(explorer);
  return push(explorer, {
    ...state,
    view: { kind: "map", focus },
    cells: {},
  });
}

export function recordUpload(
  explorer: Explorer,
  label: string,
  response: HighlightResponse,
): Explorer {
  const state = current(explorer);
  return push(explorer, {
    ...state,
    view: { kind: "map", focus: null },
    upload: { label, response },
  });
}

export function setQuery(explorer: Explorer, query: string): Explorer {
  const state = current(explorer);
  return replace(explorer, { ...state, query });
}

function cellOf(state: ViewState, cellId: string): CellView {
  return state.cells[cellId] ?? { lod: 0, pages: 0 };
}

export function advanceLod(explorer: Explorer, cellId: string): Explorer {
  const state = current(explorer);
  const cell = cellOf(state, cellId);
  const next: CellView =
    cell.lod >= MAX_LOD ? { lod: 0, pages: 0 } : { ...cell, lod: cell.lod + 1 };
  return replace(explorer, {
    ...state,
    cells: { ...state.cells, [cellId]: next },
  });
}

export function showMoreDocs(explorer: Explorer, cellId: string): Explorer {
  const state = current(explorer);
  const cell = cellOf(state, cellId);
  if (cell.lod !== MAX_LOD) return explorer;
  return replace(explorer, {
    ...state,
    cells: { ...state.cells, [cellId]: { ...cell, pages: cell.pages + 1 } },
  });
}

export function goBack(explorer: Explorer): Explorer {
  if (explorer.trail.length <= 1) return explorer;
  return { trail: explorer.trail.slice(0, -1) };
}

/** Jump to an earlier crumb, discarding everything above it. */
export function jumpTo(explorer: Explorer, index: number): Explorer {
  if (index < 0 || index >= explorer.trail.length) return explorer;
  return { trail: explorer.trail.slice(0, index + 1) };
}

export function crumbLabel(state: ViewState): string {
  if (state.view.kind === "document") return `doc ${state.view.docId}`;
  if (state.upload) return `upload ${state.upload.label}`;
  if (state.view.focus) return state.view.focus;
  return "map";
}

/** Bootstrap: owns the store, fetch lifecycles, and event delegation.
 * Everything visual goes through render.ts; everything navigational through
 * the state machine in state.ts. */

import { ApiClient, ApiError } from "./api.js";
import { debounce } from "./debounce.js";
import { emptyCache, renderApp, type ResponseCache } from "./render.js";
import {
  advanceLod,
  current,
  focusTopic,
  goBack,
  initialExplorer,
  jumpTo,
  openDocument,
  recordUpload,
  setQuery,
  showMoreDocs,
  type Explorer,
} from "./state.js";

export const SEARCH_DEBOUNCE_MS = 150;
const DOCS_PER_PAGE = 10;

export class App {
  private explorer: Explorer = initialExplorer();
  private cache: ResponseCache = emptyCache();
  private searchController: AbortController | null = null;
  private searchSequence = 0;
  private readonly debouncedSearch = debounce(
    (query: string) => void this.runSearch(query),
    SEARCH_DEBOUNCE_MS,
  );

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("input", (event) => this.onInput(event));
    await this.loadMap();
  }

  private render(): void {
    const active = document.activeElement;
    const keepFocus = active instanceof HTMLElement ? active.id : "";
    const query = this.queryInput()?.value;
    this.root.innerHTML = renderApp(this.explorer, this.cache);
    // re-rendering replaces the input; restore what the user was typing
    const input = this.queryInput();
    if (input && query !== undefined) input.value = query;
    if (keepFocus) document.getElementById(keepFocus)?.focus();
  }

  private queryInput(): HTMLInputElement | null {
    return this.root.querySelector<HTMLInputElement>("#query");
  }

  private update(next: Explorer): void {
    this.explorer = next;
    this.render();
  }

  private async loadMap(): Promise<void> {
    this.cache.mapError = null;
    this.render();
    try {
      this.cache.map = await this.api.getMap();
    } catch (error) {
      this.cache.mapError = error instanceof Error ? error.message : String(error);
    }
    this.render();
  }

  private async runSearch(query: string): Promise<void> {
    const trimmed = query.trim();
    this.searchController?.abort();
    if (!trimmed) {
      this.cache.search = null;
      this.cache.searchStale = false;
      this.render();
      return;
    }
    const sequence = ++this.searchSequence;
    this.searchController = new AbortController();
    try {
      const response = await this.api.search(trimmed, this.searchController.signal);
      if (sequence !== this.searchSequence) return; // superseded while in flight
      this.cache.search = response;
      this.cache.searchStale = false;
    } catch (error) {
      if (error instanceof DOMException && error.name === "AbortError") return;
      if (sequence !== this.searchSequence) return;
      this.cache.searchStale = true;
    }
    this.render();
  }

  private async runUpload(): Promise<void> {
    const area = this.root.querySelector<HTMLTextAreaElement>("#upload-text");
    const text = area?.value ?? "";
    if (!text.trim()) {
      this.cache.notice = "paste a document before uploading";
      this.render();
      return;
    }
    try {
      const response = await this.api.upload(text);
      const label = text.trim().slice(0, 24) + (text.trim().length > 24 ? "…" : "");
      this.update(recordUpload(this.explorer, label, response));
    } catch (error) {
      this.cache.notice =
        error instanceof ApiError
          ? `upload rejected (${error.status}): ${error.detail}`
          : "upload failed";
      this.render();
    }
  }

  private async openDoc(docId: string): Promise<void> {
    this.cache.document = null;
    this.cache.documentMissing = null;
    this.update(openDocument(this.explorer, docId));
    try {
      this.cache.document = await this.api.getDocument(docId);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.cache.documentMissing = docId;
      } else {
        this.cache.notice = "could not load the document";
      }
    }
    this.render();
  }

  private async fetchMoreDocs(level: number, topicId: string): Promise<void> {
    const shown =
      DOCS_PER_PAGE + (this.cache.pages[topicId]?.length ?? 0) +
      DOCS_PER_PAGE * (current(this.explorer).cells[topicId]?.pages ?? 0);
    try {
      const page = await this.api.topicDocuments(level, topicId, shown, DOCS_PER_PAGE);
      const known = this.cache.pages[topicId] ?? [];
      this.cache.pages[topicId] = [...known, ...page.documents];
      if (page.offset + page.documents.length >= page.total) {
        this.cache.pagesDone[topicId] = true;
      }
      this.update(showMoreDocs(this.explorer, topicId));
    } catch {
      this.cache.notice = "could not load more documents";
      this.render();
    }
  }

  private onInput(event: Event): void {
    const target = event.target;
    if (!(target instanceof HTMLInputElement) || target.id !== "query") return;
    this.explorer = setQuery(this.explorer, target.value);
    if (!target.value.trim()) {
      // clearing restores the base map immediately, no request needed
      this.debouncedSearch.cancel();
      this.cache.search = null;
      this.cache.searchStale = false;
      this.render();
      return;
    }
    this.debouncedSearch(target.value);
  }

  private onClick(event: Event): void {
    const target = event.target;
    if (!(target instanceof Element)) return;
    const actionable = target.closest<HTMLElement>("[data-action]");
    if (!actionable) return;
    const action = actionable.dataset.action;
    if (action !== "cell") event.preventDefault();
    switch (action) {
      case "retry-map":
        void this.loadMap();
        break;
      case "upload":
        void this.runUpload();
        break;
      case "dismiss":
        this.cache.notice = null;
        this.render();
        break;
      case "back":
        this.update(goBack(this.explorer));
        break;
      case "crumb":
        this.update(jumpTo(this.explorer, Number(actionable.dataset.index)));
        break;
      case "zoom":
        this.update(focusTopic(this.explorer, actionable.dataset.topic ?? null));
        break;
      case "open-doc":
        void this.openDoc(actionable.dataset.doc ?? "");
        break;
      case "more-docs":
        void this.fetchMoreDocs(
          Number(actionable.dataset.level),
          actionable.dataset.topic ?? "",
        );
        break;
      case "cell": {
        const topic = actionable.dataset.topic;
        if (topic) this.update(advanceLod(this.explorer, topic));
        break;
      }
    }
  }
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    // The page can be served from anywhere; ?api= points it at the model
    // server when the two origins differ (the server sends open CORS headers).
    const override = new URLSearchParams(window.location.search).get("api");
    const base = override ?? window.location.origin;
    const app = new App(root, new ApiClient(base));
    void app.start();
  }
}

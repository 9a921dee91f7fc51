/** Typed client for the topic-map service. All endpoints are read-only except
 * upload, which folds a document into the model without changing served state. */

export interface LevelInfo {
  level: number;
  n_topics: number;
  topic_ids: string[];
}

export interface TopicCell {
  id: string;
  level: number;
  top_words: { "3": string[]; "10": string[] };
  top_tags: string[];
  children: string[];
  spectre_rank: number | null;
}

export interface DocRef {
  id: string;
  title: string;
  collection_id: string;
  weight: number;
}

export interface MapExport {
  levels: LevelInfo[];
  topics: TopicCell[];
  documents: Record<string, DocRef[]>;
}

export interface TopicHighlight {
  id: string;
  weight: number;
  match_count: number;
  matched_doc_ids: string[];
}

export interface HighlightResponse {
  oov: boolean;
  topics: TopicHighlight[];
  total_matches: number;
}

export interface SuggestedTag {
  tag: string;
  weight: number;
}

export interface SimilarDoc {
  id: string;
  title: string;
  similarity: number;
}

export interface DocumentView {
  id: string;
  title: string;
  author: string;
  collection: string;
  text: string;
  tags: string[];
  suggested_tags: SuggestedTag[];
  similar_docs: SimilarDoc[];
}

export interface TopicDocumentsPage {
  topic: string;
  level: number;
  offset: number;
  total: number;
  documents: DocRef[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText || "request failed";
  try {
    const body = (await response.json()) as { detail?: string };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    // Wrapped rather than referenced so the global keeps its own receiver.
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, { signal });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getMap(signal?: AbortSignal): Promise<MapExport> {
    return this.getJson<MapExport>("/api/map", signal);
  }

  search(query: string, signal?: AbortSignal): Promise<HighlightResponse> {
    const q = encodeURIComponent(query);
    return this.getJson<HighlightResponse>(`/api/search?q=${q}`, signal);
  }

  async upload(text: string, signal?: AbortSignal): Promise<HighlightResponse> {
    const response = await this.fetchImpl(this.baseUrl + "/api/upload", {
      method: "POST",
      body: text,
      headers: { "content-type": "text/plain; charset=utf-8" },
      signal,
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as HighlightResponse;
  }

  getDocument(docId: string, signal?: AbortSignal): Promise<DocumentView> {
    return this.getJson<DocumentView>(
      `/api/document/${encodeURIComponent(docId)}`,
      signal,
    );
  }

  topicDocuments(
    level: number,
    topicId: string,
    offset: number,
    limit = 10,
    signal?: AbortSignal,
  ): Promise<TopicDocumentsPage> {
    const id = encodeURIComponent(topicId);
    return this.getJson<TopicDocumentsPage>(
      `/api/topic/${level}/${id}/documents?offset=${offset}&limit=${limit}`,
      signal,
    );
  }
}

/**
 * Typed client for the playbook-engine HTTP API.
 *
 * Every console action maps 1:1 onto one documented endpoint; errors
 * arrive as {code, message, findings?, raw_text?} envelopes and are
 * rethrown as ApiError so callers can branch on the server's code.
 */

export interface DocumentSummary {
  id: string;
  kind: "irp" | "sop";
  title: string;
  version: string;
  stale: boolean;
}

export interface Finding {
  severity: "error" | "warning" | "info";
  code: string;
  doc: string;
  detail: string;
}

export interface FrontierCard {
  node: string;
  kind: "start" | "end" | "action" | "decision" | null;
  label: string;
  ref: string | null;
  branches: string[];
}

export interface SessionRecord {
  session_id: string;
  irp: string;
  status: "active" | "complete" | "aborted";
  started: string;
  frontier: FrontierCard[];
  event_count: number;
}

export interface EventRecord {
  seq: number;
  timestamp: string;
  actor: string;
  node: string | null;
  text: string;
}

export interface EventsPage {
  events: EventRecord[];
  next: number;
  status: SessionRecord["status"];
}

export interface PostmortemResult {
  commentary: string[];
  recommendations: string[];
  raw: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public findings: Finding[] = [],
    public rawText: string = "",
  ) {
    super(message);
  }
}

export class ConnectionError extends Error {}

async function call<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(base + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  } catch (err) {
    throw new ConnectionError(`cannot reach ${base}: ${err}`);
  }
  const isJson = (response.headers.get("Content-Type") ?? "").includes("application/json");
  const payload = isJson ? await response.json() : await response.text();
  if (!response.ok) {
    const envelope = isJson ? payload : { code: "Http", message: String(payload) };
    throw new ApiError(
      response.status,
      envelope.code ?? "Http",
      envelope.message ?? response.statusText,
      envelope.findings ?? [],
      envelope.raw_text ?? "",
    );
  }
  return payload as T;
}

export class ApiClient {
  constructor(public base: string = "") {}

  async listDocuments(): Promise<DocumentSummary[]> {
    const page = await call<{ documents: DocumentSummary[] }>(this.base, "GET", "/api/documents");
    return page.documents;
  }

  openSession(irp: string, actor: string): Promise<SessionRecord> {
    return call(this.base, "POST", "/api/sessions", { irp, actor });
  }

  getSession(sessionId: string): Promise<SessionRecord> {
    return call(this.base, "GET", `/api/sessions/${sessionId}`);
  }

  postStep(
    sessionId: string,
    step: { node?: string; decision?: string; note?: string; actor: string },
  ): Promise<SessionRecord> {
    return call(this.base, "POST", `/api/sessions/${sessionId}/steps`, step);
  }

  /** Incremental feed; `waitSeconds` > 0 long-polls on the server side. */
  getEvents(sessionId: string, after: number, waitSeconds = 0): Promise<EventsPage> {
    return call(
      this.base,
      "GET",
      `/api/sessions/${sessionId}/events?after=${after}&wait=${waitSeconds}`,
    );
  }

  getLog(sessionId: string): Promise<string> {
    return call(this.base, "GET", `/api/sessions/${sessionId}/log`);
  }

  postmortem(sessionId: string): Promise<PostmortemResult> {
    return call(this.base, "POST", "/api/assist/postmortem", { session_id: sessionId });
  }
}

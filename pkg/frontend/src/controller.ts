/**
 * Session controller: holds the server's latest session record and the
 * event feed, and turns console actions into API calls.
 *
 * Deliberately free of workflow logic: the frontier and status shown
 * are always whatever the server last returned, never computed here.
 * Stale-frontier races (e.g. double-clicking a card) come back as
 * NodeNotActive and reconcile silently with a refetch.
 */

import {
  ApiClient,
  ApiError,
  ConnectionError,
  EventRecord,
  Finding,
  PostmortemResult,
  SessionRecord,
} from "./api.js";

export interface UiError {
  kind: "connection" | "rejected";
  code: string;
  message: string;
  findings: Finding[];
  rawText: string;
  retryable: boolean;
}

export type PostmortemPanel =
  | { state: "idle" }
  | { state: "loading" }
  | { state: "ready"; result: PostmortemResult }
  | { state: "failed"; error: UiError };

function toUiError(err: unknown): UiError {
  if (err instanceof ConnectionError) {
    return {
      kind: "connection",
      code: "Connection",
      message: err.message,
      findings: [],
      rawText: "",
      retryable: true,
    };
  }
  if (err instanceof ApiError) {
    return {
      kind: "rejected",
      code: err.code,
      message: err.message,
      findings: err.findings,
      rawText: err.rawText,
      retryable: false,
    };
  }
  throw err;
}

export class SessionController {
  session: SessionRecord | null = null;
  events: EventRecord[] = [];
  error: UiError | null = null;
  postmortemPanel: PostmortemPanel = { state: "idle" };

  constructor(
    private api: ApiClient,
    private actor: string = "responder",
  ) {}

  get active(): boolean {
    return this.session?.status === "active";
  }

  async start(irp: string): Promise<boolean> {
    this.error = null;
    try {
      this.session = await this.api.openSession(irp, this.actor);
      this.events = [];
      await this.syncEvents();
      return true;
    } catch (err) {
      this.error = toUiError(err);
      return false;
    }
  }

  /** Pull the event delta; feed order is exactly the server's log order. */
  async syncEvents(waitSeconds = 0): Promise<number> {
    if (!this.session) return 0;
    const page = await this.api.getEvents(this.session.session_id, this.events.length, waitSeconds);
    this.events.push(...page.events);
    if (page.events.length > 0 || page.status !== this.session.status) {
      this.session = await this.api.getSession(this.session.session_id);
    }
    return page.events.length;
  }

  /** One long-poll cycle for the live view. */
  pollOnce(waitSeconds = 25): Promise<number> {
    return this.syncEvents(waitSeconds);
  }

  private async step(step: { node?: string; decision?: string; note?: string }): Promise<void> {
    if (!this.session) return;
    this.error = null;
    try {
      this.session = await this.api.postStep(this.session.session_id, {
        ...step,
        actor: this.actor,
      });
    } catch (err) {
      const uiError = toUiError(err);
      if (uiError.code === "NodeNotActive") {
        // a concurrent click (or our own double-click) won the race;
        // the server state is already what we want, so just refetch
        this.session = await this.api.getSession(this.session.session_id);
      } else {
        this.error = uiError;
      }
    }
    await this.syncEvents();
  }

  completeAction(node: string, note = ""): Promise<void> {
    return this.step({ node, note });
  }

  answerDecision(node: string, label: string): Promise<void> {
    return this.step({ node, decision: label });
  }

  addNote(note: string): Promise<void> {
    return this.step({ note });
  }

  async requestPostmortem(): Promise<void> {
    if (!this.session || this.session.status === "active") return;
    this.postmortemPanel = { state: "loading" };
    try {
      const result = await this.api.postmortem(this.session.session_id);
      this.postmortemPanel = { state: "ready", result };
    } catch (err) {
      this.postmortemPanel = { state: "failed", error: toUiError(err) };
    }
  }
}

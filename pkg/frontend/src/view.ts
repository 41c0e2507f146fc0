/**
 * Pure view builders: application state in, a plain VNode tree out.
 *
 * No DOM access here, so the contract tests can assert on rendered
 * structure without a browser; main.ts mounts these trees for real.
 */

import { DocumentSummary, EventRecord, SessionRecord } from "./api.js";
import { PostmortemPanel, SessionController, UiError } from "./controller.js";

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  on?: Record<string, () => void>;
  children: (VNode | string)[];
}

export function h(
  tag: string,
  attrs: Record<string, string> = {},
  children: (VNode | string)[] = [],
  on?: Record<string, () => void>,
): VNode {
  return { tag, attrs, children, on };
}

/** All text content of a tree, for assertions and search. */
export function collectText(node: VNode | string): string {
  if (typeof node === "string") return node;
  return node.children.map(collectText).join(" ");
}

export function findByClass(node: VNode | string, className: string): VNode[] {
  if (typeof node === "string") return [];
  const own = (node.attrs.class ?? "").split(" ").includes(className) ? [node] : [];
  return own.concat(node.children.flatMap((child) => findByClass(child, className)));
}

/** Keep the server's wall-clock time rather than converting to browser-local. */
export function clockPrefix(isoTimestamp: string): string {
  const match = /T(\d{2}):(\d{2})/.exec(isoTimestamp);
  if (!match) return isoTimestamp;
  const hour24 = Number(match[1]);
  const hour12 = hour24 % 12 === 0 ? 12 : hour24 % 12;
  return `${String(hour12).padStart(2, "0")}:${match[2]} ${hour24 < 12 ? "AM" : "PM"}`;
}

/** Branch picks staged before their explicit confirmation, keyed by node. */
export interface PendingChoices {
  [node: string]: string | undefined;
}

export interface Handlers {
  onStart(irp: string): void;
  onComplete(node: string): void;
  onPickBranch(node: string, label: string): void;
  onConfirmBranch(node: string, label: string): void;
  onPostmortem(): void;
  onRetry(): void;
}

export function renderStartScreen(docs: DocumentSummary[], handlers: Handlers): VNode {
  const irps = docs.filter((d) => d.kind === "irp");
  return h("section", { class: "start-screen" }, [
    h("h2", {}, ["Start an incident"]),
    h(
      "ul",
      { class: "irp-list" },
      irps.map((doc) =>
        h("li", { class: "irp-item" }, [
          h(
            "button",
            { class: "irp-start", "data-irp": doc.id },
            [`${doc.title} (${doc.version})${doc.stale ? " [stale]" : ""}`],
            { click: () => handlers.onStart(doc.id) },
          ),
        ]),
      ),
    ),
  ]);
}

export function renderBanner(session: SessionRecord): VNode {
  return h("header", { class: `banner banner-${session.status}` }, [
    h("span", { class: "banner-irp" }, [session.irp]),
    h("span", { class: "banner-status" }, [session.status]),
  ]);
}

function renderCard(
  card: SessionRecord["frontier"][number],
  readOnly: boolean,
  pending: PendingChoices,
  handlers: Handlers,
): VNode {
  const children: (VNode | string)[] = [
    h("div", { class: "card-title" }, [card.label]),
    h("div", { class: "card-node" }, [card.node]),
  ];
  if (!readOnly && card.kind === "decision") {
    const picked = pending[card.node];
    children.push(
      h(
        "div",
        { class: "branch-row" },
        card.branches.map((label) =>
          h(
            "button",
            { class: `branch${picked === label ? " picked" : ""}`, "data-branch": label },
            [label],
            { click: () => handlers.onPickBranch(card.node, label) },
          ),
        ),
      ),
    );
    if (picked !== undefined) {
      // branch choices are irreversible in the log; require the second click
      children.push(
        h("button", { class: "confirm-branch" }, [`Confirm: ${picked}`], {
          click: () => handlers.onConfirmBranch(card.node, picked),
        }),
      );
    }
  } else if (!readOnly) {
    children.push(
      h("button", { class: "complete-action" }, ["Mark complete"], {
        click: () => handlers.onComplete(card.node),
      }),
    );
  }
  return h("article", { class: `card card-${card.kind ?? "unknown"}`, "data-node": card.node }, children);
}

export function renderFrontier(
  session: SessionRecord,
  pending: PendingChoices,
  handlers: Handlers,
): VNode {
  const readOnly = session.status !== "active";
  return h(
    "section",
    { class: "frontier" },
    session.frontier.map((card) => renderCard(card, readOnly, pending, handlers)),
  );
}

export function renderEventFeed(events: EventRecord[]): VNode {
  return h(
    "section",
    { class: "event-feed" },
    events.map((event) =>
      h("div", { class: "event", "data-seq": String(event.seq) }, [
        h("span", { class: "event-time" }, [`${clockPrefix(event.timestamp)} - `]),
        h("span", { class: "event-text" }, [event.text]),
      ]),
    ),
  );
}

export function renderPostmortem(
  panel: PostmortemPanel,
  session: SessionRecord,
  showRaw: boolean,
  handlers: Handlers,
  onToggleRaw: () => void,
): VNode {
  const finished = session.status !== "active";
  const children: (VNode | string)[] = [h("h3", {}, ["Post-mortem"])];
  if (panel.state === "idle") {
    children.push(
      h(
        "button",
        finished ? { class: "request-postmortem" } : { class: "request-postmortem", disabled: "disabled" },
        ["Request commentary"],
        finished ? { click: () => handlers.onPostmortem() } : undefined,
      ),
    );
  } else if (panel.state === "loading") {
    children.push(h("p", { class: "postmortem-loading" }, ["Analyzing the incident log..."]));
  } else if (panel.state === "ready") {
    children.push(
      h(
        "ol",
        { class: "commentary" },
        panel.result.commentary.map((item) => h("li", { class: "commentary-item" }, [item])),
      ),
      h(
        "ul",
        { class: "recommendations" },
        panel.result.recommendations.map((item) => h("li", { class: "recommendation-item" }, [item])),
      ),
      h("button", { class: "toggle-raw" }, [showRaw ? "Hide raw response" : "Show raw response"], {
        click: onToggleRaw,
      }),
    );
    if (showRaw) {
      children.push(h("pre", { class: "raw-response" }, [panel.result.raw]));
    }
  } else {
    children.push(
      h("p", { class: "postmortem-error" }, [`${panel.error.code}: ${panel.error.message}`]),
      h("button", { class: "retry-postmortem" }, ["Retry"], {
        click: () => handlers.onPostmortem(),
      }),
    );
    if (panel.error.rawText) {
      children.push(
        h("p", { class: "raw-warning" }, ["Unvalidated model output follows:"]),
        h("pre", { class: "raw-response" }, [panel.error.rawText]),
      );
    }
  }
  return h("aside", { class: "postmortem" }, children);
}

export function renderError(error: UiError, handlers: Handlers): VNode {
  const children: (VNode | string)[] = [
    h("span", { class: "error-code" }, [error.code]),
    h("span", { class: "error-message" }, [error.message]),
  ];
  if (error.findings.length > 0) {
    children.push(
      h(
        "ul",
        { class: "error-findings" },
        error.findings.map((f) => h("li", {}, [`${f.severity.toUpperCase()} ${f.code}: ${f.detail}`])),
      ),
    );
  }
  if (error.retryable) {
    children.push(h("button", { class: "retry" }, ["Retry"], { click: () => handlers.onRetry() }));
  }
  return h("div", { class: `error-banner ${error.kind}` }, children);
}

export function renderApp(
  controller: SessionController,
  docs: DocumentSummary[],
  pending: PendingChoices,
  showRaw: boolean,
  handlers: Handlers,
  onToggleRaw: () => void,
): VNode {
  const children: (VNode | string)[] = [h("h1", {}, ["Incident responder console"])];
  if (controller.error) {
    children.push(renderError(controller.error, handlers));
  }
  if (!controller.session) {
    children.push(renderStartScreen(docs, handlers));
  } else {
    children.push(
      renderBanner(controller.session),
      renderFrontier(controller.session, pending, handlers),
      renderEventFeed(controller.events),
      renderPostmortem(controller.postmortemPanel, controller.session, showRaw, handlers, onToggleRaw),
    );
  }
  return h("main", { class: "app" }, children);
}

/**
 * Browser bootstrap: mount the view tree into #app and keep it live.
 *
 * Rendering is a full re-mount per change (the trees are tiny); live
 * updates come from long-polling the session's incremental events
 * endpoint, so the frontier and status are always the server's.
 */

import { ApiClient, DocumentSummary } from "./api.js";
import { SessionController } from "./controller.js";
import { Handlers, PendingChoices, VNode, renderApp } from "./view.js";

function mount(node: VNode | string): Node {
  if (typeof node === "string") return document.createTextNode(node);
  const el = document.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) {
    el.setAttribute(key, value);
  }
  for (const [event, handler] of Object.entries(node.on ?? {})) {
    el.addEventListener(event, handler);
  }
  for (const child of node.children) {
    el.appendChild(mount(child));
  }
  return el;
}

const api = new ApiClient("");
const controller = new SessionController(api, "responder");
const pending: PendingChoices = {};
let docs: DocumentSummary[] = [];
let showRaw = false;
let polling = false;

const handlers: Handlers = {
  onStart: (irp) => {
    void controller.start(irp).then((ok) => {
      if (ok) startPolling();
      redraw();
    });
  },
  onComplete: (node) => {
    void controller.completeAction(node).then(redraw);
  },
  onPickBranch: (node, label) => {
    pending[node] = label;
    redraw();
  },
  onConfirmBranch: (node, label) => {
    delete pending[node];
    void controller.answerDecision(node, label).then(redraw);
  },
  onPostmortem: () => {
    void controller.requestPostmortem().then(redraw);
    redraw();
  },
  onRetry: () => {
    void boot();
  },
};

function redraw(): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.replaceChildren(
    mount(renderApp(controller, docs, pending, showRaw, handlers, toggleRaw)),
  );
}

function toggleRaw(): void {
  showRaw = !showRaw;
  redraw();
}

function startPolling(): void {
  if (polling) return;
  polling = true;
  const loop = async () => {
    while (controller.session && controller.session.status === "active") {
      try {
        const fresh = await controller.pollOnce(25);
        if (fresh > 0) redraw();
      } catch {
        await new Promise((resolve) => setTimeout(resolve, 2000));
      }
    }
    polling = false;
    redraw();
  };
  void loop();
}

async function boot(): Promise<void> {
  try {
    docs = await api.listDocuments();
  } catch {
    setTimeout(boot, 2000);
  }
  redraw();
}

void boot();

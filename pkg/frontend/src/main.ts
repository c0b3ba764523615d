// App shell: pick a project/model/session, then switch between the topic
// validation view, the coding queue and the analysis forms.

import { api } from "./api";
import { CodingQueueView } from "./coding";
import { renderHighlights } from "./highlight";
import { ParamsForm } from "./params";
import { TopicPanel } from "./topics";
import "./styles.css";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function readContext(): { project: string; model: string; session: string } {
  const params = new URLSearchParams(window.location.search);
  return {
    project: params.get("project") ?? "p0001",
    model: params.get("model") ?? "",
    session: params.get("session") ?? "",
  };
}

async function showValidation(
  container: HTMLElement,
  project: string,
  model: string,
): Promise<void> {
  container.textContent = "";
  if (!model) {
    container.appendChild(el("p", "hint",
      "append ?model=<job id> to the URL to open a fitted model"));
    return;
  }
  const layout = el("div", "validation-layout");
  const panel = new TopicPanel(project, model);
  const docView = el("div", "doc-view");
  const docPicker = el("input") as HTMLInputElement;
  docPicker.placeholder = "document id";
  const textBox = el("div", "highlight-box");

  panel.onSelect = (topic) => {
    const doc = docPicker.value.trim();
    if (!doc) return;
    void api.highlight(project, model, topic, doc).then((payload) => {
      renderHighlights(textBox, payload.text, payload.spans, payload.topic);
    });
  };

  docView.append(docPicker, textBox);
  layout.append(panel.root, docView);
  container.appendChild(layout);
  await panel.load();
}

async function showCoding(
  container: HTMLElement,
  session: string,
): Promise<void> {
  container.textContent = "";
  if (!session) {
    container.appendChild(el("p", "hint",
      "append ?session=<session id> to the URL to open a coding session"));
    return;
  }
  const next = await api.nextDocument(session);
  const codes = next.posterior
    ? Object.keys(next.posterior)
    : ["(codes appear after the session has a classifier)"];
  const view = new CodingQueueView({
    session,
    codes: codes.map((id) => ({ id, name: id })),
  });
  container.appendChild(view.root);
  await view.load();
}

function showForms(container: HTMLElement, project: string): void {
  container.textContent = "";
  for (const kind of ["LDA", "COOC"] as const) {
    const section = el("section");
    section.appendChild(el("h3", "", `${kind} parameters`));
    section.appendChild(new ParamsForm({ project, kind }).root);
    container.appendChild(section);
  }
}

function main(): void {
  const { project, model, session } = readContext();
  const app = document.getElementById("app");
  if (!app) return;

  const nav = el("nav");
  const content = el("main");
  app.append(nav, content);

  const tabs: [string, () => void][] = [
    ["topic validation", () => void showValidation(content, project, model)],
    ["coding queue", () => void showCoding(content, session)],
    ["analyses", () => showForms(content, project)],
  ];
  for (const [name, activate] of tabs) {
    const button = el("button", "tab", name);
    button.addEventListener("click", activate);
    nav.appendChild(button);
  }
  tabs[0][1]();
}

main();

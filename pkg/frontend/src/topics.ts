// Topic panel: ranked word lists (font size scales with rank, no layout
// fidelity ambitions) plus the label editor. Labels round trip through
// the server's labels.json.

import { api, TopicsPayload } from "./api";
import { topicColor } from "./highlight";

export class TopicPanel {
  readonly root: HTMLElement;
  private readonly client: typeof api;
  private readonly project: string;
  private readonly model: string;
  private payload: TopicsPayload | null = null;
  onSelect: ((topic: number) => void) | null = null;

  constructor(project: string, model: string, client: typeof api = api) {
    this.project = project;
    this.model = model;
    this.client = client;
    this.root = document.createElement("div");
    this.root.className = "topic-panel";
  }

  async load(): Promise<void> {
    this.payload = await this.client.topics(this.project, this.model);
    this.render();
  }

  private render(): void {
    this.root.textContent = "";
    if (this.payload === null) {
      return;
    }
    for (const entry of this.payload.topics) {
      const card = document.createElement("div");
      card.className = "topic-card";
      card.dataset.topic = String(entry.topic);

      const head = document.createElement("div");
      head.className = "topic-head";
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.backgroundColor = topicColor(entry.topic, 1);
      const title = document.createElement("strong");
      title.textContent = entry.label
        ? `${entry.topic}: ${entry.label}`
        : `topic ${entry.topic}`;
      head.append(swatch, title);
      head.addEventListener("click", () => this.onSelect?.(entry.topic));

      const words = document.createElement("div");
      words.className = "topic-words";
      entry.words.forEach((word, rank) => {
        const item = document.createElement("span");
        item.textContent = word.term;
        item.style.fontSize = `${Math.max(70, 130 - 8 * rank)}%`;
        words.appendChild(item);
      });

      const editor = document.createElement("form");
      editor.className = "label-editor";
      const input = document.createElement("input");
      input.placeholder = "label this topic";
      input.value = entry.label ?? "";
      const save = document.createElement("button");
      save.type = "submit";
      save.textContent = "save";
      editor.append(input, save);
      editor.addEventListener("submit", (event) => {
        event.preventDefault();
        void this.saveLabel(entry.topic, input.value);
      });

      card.append(head, words, editor);
      this.root.appendChild(card);
    }
  }

  private async saveLabel(topic: number, label: string): Promise<void> {
    if (!label.trim()) {
      return;
    }
    await this.client.labelTopic(this.project, this.model, topic, label.trim());
    await this.load();
  }
}

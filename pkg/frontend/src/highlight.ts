// Topic-validation view: mark the server's highlight spans over the
// document text. Span offsets count Unicode scalar values (code points)
// while JS strings index UTF-16 code units, so offsets are converted
// before any slicing. The text content is never altered; rendering only
// wraps ranges in <mark> elements.

import type { HighlightSpan } from "./api";

// fixed categorical palette, indexed by topic id modulo length; the span
// weight modulates opacity only
export const TOPIC_PALETTE: [number, number, number][] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
  [188, 189, 34],
  [23, 190, 207],
];

export function topicColor(topic: number, weight: number): string {
  const [r, g, b] = TOPIC_PALETTE[topic % TOPIC_PALETTE.length];
  return `rgba(${r}, ${g}, ${b}, ${weight})`;
}

/** Prefix table mapping code-point index -> UTF-16 index. */
export function codePointIndex(text: string): number[] {
  const table = [0];
  let utf16 = 0;
  for (const ch of text) {
    utf16 += ch.length;
    table.push(utf16);
  }
  return table;
}

export class SpanError extends Error {}

function checkSpans(spans: HighlightSpan[], codePoints: number): void {
  let previousEnd = -1;
  for (const span of spans) {
    if (!(span.start >= 0 && span.start < span.end && span.end <= codePoints)) {
      throw new SpanError(`span [${span.start}, ${span.end}) out of range`);
    }
    if (span.start < previousEnd) {
      throw new SpanError(
        `overlapping span at ${span.start} (previous ended at ${previousEnd})`,
      );
    }
    previousEnd = span.end;
  }
}

/**
 * Render the text with its highlight spans into the container.
 *
 * Regions outside the spans (filtered tokens, punctuation) stay unmarked.
 * Malformed span lists (unsorted, overlapping, out of range) raise an
 * error banner instead of guessing: that is a server bug to surface.
 */
export function renderHighlights(
  container: HTMLElement,
  text: string,
  spans: HighlightSpan[],
  topic: number,
): void {
  container.textContent = "";
  const table = codePointIndex(text);
  try {
    checkSpans(spans, table.length - 1);
  } catch (err) {
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = `highlight rendering failed: ${(err as Error).message}`;
    container.appendChild(banner);
    container.appendChild(document.createTextNode(text));
    return;
  }

  let cursor = 0;
  for (const span of spans) {
    const from = table[span.start];
    const to = table[span.end];
    if (from > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, from)));
    }
    const mark = document.createElement("mark");
    mark.className = "hl";
    mark.style.backgroundColor = topicColor(topic, span.weight);
    mark.dataset.start = String(span.start);
    mark.dataset.end = String(span.end);
    mark.dataset.weight = String(span.weight);
    mark.textContent = text.slice(from, to);
    container.appendChild(mark);
    cursor = to;
  }
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
}

/** The marked ranges currently rendered, in scalar-value offsets. */
export function markedRanges(container: HTMLElement): [number, number][] {
  return Array.from(container.querySelectorAll("mark")).map((mark) => [
    Number((mark as HTMLElement).dataset.start),
    Number((mark as HTMLElement).dataset.end),
  ]);
}

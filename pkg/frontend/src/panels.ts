// Pure HTML renderers for every panel.  They are plain functions of the
// store state so the display contract is testable without a browser; the
// app shell assigns their output to container elements.

import { ResultCell } from "./api.js";
import { ExplorerState } from "./store.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(x: number | null | undefined, digits = 3): string {
  if (x === null || x === undefined || Number.isNaN(x)) return "-";
  return x.toFixed(digits);
}

export function bannerHtml(state: ExplorerState): string {
  if (state.serviceUp) return "";
  return `<div class="banner" role="alert">service unreachable - showing last good state` +
    (state.lastError ? ` (${escapeHtml(state.lastError)})` : "") + `</div>`;
}

function thumbOrCard(cell: ResultCell): string {
  if (cell.image_path) {
    return `<img class="thumb" src="${escapeHtml(cell.image_path)}" ` +
      `alt="${escapeHtml(cell.record_id)}" ` +
      `onerror="this.outerHTML='<div class=&quot;card&quot;>${escapeHtml(cell.record_id)}</div>'">`;
  }
  return `<div class="card"><strong>${escapeHtml(cell.record_id)}</strong>` +
    `<span>(${fmt(cell.valence, 2)}, ${fmt(cell.arousal, 2)})</span></div>`;
}

export function fallbackBadgeHtml(): string {
  return `<span class="badge fallback" data-testid="fallback-badge">fallback</span>`;
}

export function resultPanelHtml(state: ExplorerState): string {
  const res = state.lastResult;
  if (!res) {
    return `<p class="hint">pick a source record, then drag on the pad</p>`;
  }
  const target = state.lastResultTarget;
  return [
    `<div class="result" data-record-id="${escapeHtml(res.record_id)}">`,
    thumbOrCard(res),
    `<dl>`,
    `<dt>record</dt><dd data-testid="record-id">${escapeHtml(res.record_id)}</dd>`,
    `<dt>target</dt><dd>(${fmt(target?.valence ?? null, 2)}, ${fmt(target?.arousal ?? null, 2)})</dd>`,
    `<dt>record VA</dt><dd>(${fmt(res.valence, 2)}, ${fmt(res.arousal, 2)})</dd>`,
    `<dt>similarity</dt><dd>${fmt(res.similarity)}</dd>`,
    `<dt>VA distance</dt><dd>${fmt(res.va_distance)}</dd>`,
    `<dt>pool size</dt><dd data-testid="pool-size">${res.pool_size}` +
      (res.fallback_used ? " " + fallbackBadgeHtml() : "") + `</dd>`,
    res.attributes.length
      ? `<dt>attributes</dt><dd>${res.attributes.map(escapeHtml).join(", ")}</dd>`
      : "",
    `</dl>`,
    `</div>`,
  ].join("");
}

export function weightsHtml(state: ExplorerState): string {
  if (state.weights.length === 0) {
    return `<p class="hint">no attribute Gaussians loaded</p>`;
  }
  const rows = [...state.weights].sort((a, b) => b.weight - a.weight);
  return rows
    .map((w) => {
      const pct = Math.max(0.5, w.weight * 100);
      return (
        `<div class="weight-row" data-attribute="${escapeHtml(w.attribute)}">` +
        `<span class="weight-name">${escapeHtml(w.attribute)}</span>` +
        `<span class="weight-bar"><span class="weight-fill" style="width:${pct.toFixed(1)}%"></span></span>` +
        `<span class="weight-value">${w.weight.toFixed(4)}</span></div>`
      );
    })
    .join("");
}

export function sweepHtml(state: ExplorerState): string {
  const grid = state.lastSweep;
  if (!grid) {
    return `<p class="hint">run a sweep to see a grid of retrievals</p>`;
  }
  // rows arrive arousal-descending (top row = highest arousal),
  // columns valence-ascending (left = most negative)
  const header =
    `<tr><th></th>` +
    grid.v_values.map((v) => `<th>v=${v.toFixed(2)}</th>`).join("") +
    `</tr>`;
  const body = grid.rows
    .map((row, i) => {
      const cells = row
        .map(
          (cell) =>
            `<td class="sweep-cell${cell.fallback_used ? " is-fallback" : ""}" ` +
            `data-record-id="${escapeHtml(cell.record_id)}">` +
            thumbOrCard(cell) +
            `<div class="cell-meta">pool ${cell.pool_size}` +
            (cell.fallback_used ? " " + fallbackBadgeHtml() : "") +
            `</div></td>`,
        )
        .join("");
      return `<tr><th>a=${grid.a_values_desc[i].toFixed(2)}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="sweep">${header}${body}</table>`;
}

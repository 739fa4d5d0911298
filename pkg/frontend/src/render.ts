/** HTML-string views of the studio state. Kept DOM-free so tests can assert on
 * the rendered markup directly; main.ts assigns the strings into containers. */

import { canRequestCompletion, canRequestGeneration, canUndo, maskedSlots } from "./state.js";
import { BLOCKS, SLOTS_PER_BLOCK, Slot, StudioState } from "./types.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function slotCell(block: string, index: number, slot: Slot): string {
  if (slot.type === "color") {
    return `<button class="slot color" data-block="${block}" data-slot="${index}" ` +
      `style="background:${slot.hex}" title="${slot.hex}"></button>`;
  }
  if (slot.type === "masked") {
    return `<button class="slot masked" data-block="${block}" data-slot="${index}">?</button>`;
  }
  return `<button class="slot empty" data-block="${block}" data-slot="${index}">+</button>`;
}

export function renderPalettes(state: StudioState): string {
  const rows = BLOCKS.map((block) => {
    const cells = state.core.palettes[block]
      .slice(0, SLOTS_PER_BLOCK)
      .map((slot, i) => slotCell(block, i, slot))
      .join("");
    return `<div class="palette-row" data-block="${block}"><span class="label">${block}</span>${cells}</div>`;
  });
  return rows.join("\n");
}

export function renderPhrases(state: StudioState): string {
  const items = state.core.phrases.map((p, i) =>
    `<li class="phrase" data-index="${i}"><span class="kind">${p.kind}</span> ` +
    `${esc(p.text)} <button class="remove-phrase" data-index="${i}">×</button></li>`);
  return `<ul class="phrases">${items.join("")}</ul>`;
}

export function renderRecommendations(state: StudioState): string {
  if (state.pending?.action === "completion") {
    return `<p class="busy">asking the model…</p>`;
  }
  if (state.recommendations.length === 0) return "";
  const groups = state.recommendations.map((rec) => {
    const swatches = rec.candidates.map((c) =>
      `<button class="swatch" data-block="${rec.block}" data-slot="${rec.slot}" ` +
      `data-hex="${c.color}" style="background:${c.color}" ` +
      `title="${c.color} (${(c.probability * 100).toFixed(1)}%)">` +
      `<span class="prob">${(c.probability * 100).toFixed(1)}%</span></button>`).join("");
    return `<div class="candidates" data-block="${rec.block}" data-slot="${rec.slot}">` +
      `<span class="label">${rec.block} #${rec.slot}</span>${swatches}</div>`;
  });
  return groups.join("\n");
}

export function renderGenerated(state: StudioState): string {
  if (state.pending?.action === "generation") {
    return `<p class="busy">generating…</p>`;
  }
  if (!state.generated) return "";
  const swatches = state.generated.map((hex) =>
    `<span class="swatch generated" style="background:${hex}" title="${hex}"></span>`).join("");
  return `<div class="generated-palette">${swatches}` +
    `<button class="copy-json" data-payload='${JSON.stringify(state.generated)}'>copy as JSON</button></div>`;
}

export function renderControls(state: StudioState): string {
  const completionDisabled = canRequestCompletion(state) ? "" : " disabled";
  const generationDisabled = canRequestGeneration(state) ? "" : " disabled";
  const undoDisabled = canUndo(state) ? "" : " disabled";
  const masked = maskedSlots(state.core).length;
  return [
    `<button class="request-completion"${completionDisabled}>recommend (${masked} masked)</button>`,
    `<label>k <input class="set-k" type="number" min="1" max="4096" value="${state.core.k}"></label>`,
    `<label><input class="set-pp" type="checkbox"${state.core.postProcess ? " checked" : ""}> distinct colors</label>`,
    `<button class="request-generation"${generationDisabled}>generate palette</button>`,
    `<button class="undo"${undoDisabled}>undo</button>`,
  ].join("\n");
}

export function renderError(state: StudioState): string {
  if (!state.lastError) return "";
  return `<div class="error-banner" role="alert">${esc(state.lastError)}</div>`;
}

export function renderApp(state: StudioState): string {
  return [
    renderError(state),
    `<section class="palettes">${renderPalettes(state)}</section>`,
    `<section class="phrases-box">${renderPhrases(state)}</section>`,
    `<section class="controls">${renderControls(state)}</section>`,
    `<section class="recommendations">${renderRecommendations(state)}</section>`,
    `<section class="generation">${renderGenerated(state)}</section>`,
  ].join("\n");
}

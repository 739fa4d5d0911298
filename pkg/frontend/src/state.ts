/** Pure state transitions. Every change flows through reduce(state, event), so
 * replaying an event log reproduces the final state exactly. Network effects
 * live in the controller; responses arrive as events carrying a sequence
 * number, and stale ones (superseded by a newer request) are discarded. */

import {
  BLOCKS, HEX_RE, MAX_PHRASES, SLOTS_PER_BLOCK,
  Block, Slot, StudioCore, StudioEvent, StudioState,
} from "./types.js";

export function initialState(): StudioState {
  const emptyBlock = (): Slot[] =>
    Array.from({ length: SLOTS_PER_BLOCK }, () => ({ type: "empty" }) as Slot);
  return {
    core: {
      palettes: { image: emptyBlock(), graphic: emptyBlock(), text: emptyBlock() },
      phrases: [],
      k: 5,
      postProcess: true,
    },
    history: [],
    recommendations: [],
    generated: null,
    pending: null,
    lastError: null,
    seqCounter: 0,
  };
}

function cloneCore(core: StudioCore): StudioCore {
  return {
    palettes: {
      image: core.palettes.image.map((s) => ({ ...s })),
      graphic: core.palettes.graphic.map((s) => ({ ...s })),
      text: core.palettes.text.map((s) => ({ ...s })),
    },
    phrases: core.phrases.map((p) => ({ ...p })),
    k: core.k,
    postProcess: core.postProcess,
  };
}

function withError(state: StudioState, message: string): StudioState {
  return { ...state, lastError: message };
}

/** Editing events snapshot the core first so undo restores the full state. */
function edit(state: StudioState, mutate: (core: StudioCore) => string | null): StudioState {
  const next = cloneCore(state.core);
  const error = mutate(next);
  if (error !== null) return withError(state, error);
  return {
    ...state,
    core: next,
    history: [...state.history, cloneCore(state.core)],
    lastError: null,
  };
}

export function maskedSlots(core: StudioCore): { block: Block; slot: number }[] {
  const out: { block: Block; slot: number }[] = [];
  for (const block of BLOCKS) {
    core.palettes[block].forEach((s, i) => {
      if (s.type === "masked") out.push({ block, slot: i });
    });
  }
  return out;
}

export function canRequestCompletion(state: StudioState): boolean {
  return maskedSlots(state.core).length > 0 && state.pending === null;
}

export function canRequestGeneration(state: StudioState): boolean {
  return state.core.phrases.length > 0 && state.pending === null;
}

export function canUndo(state: StudioState): boolean {
  return state.history.length > 0;
}

export function reduce(state: StudioState, event: StudioEvent): StudioState {
  switch (event.type) {
    case "set-color":
      return edit(state, (core) => {
        if (!HEX_RE.test(event.hex)) return `not a hex color: ${event.hex}`;
        if (event.slot < 0 || event.slot >= SLOTS_PER_BLOCK) return `bad slot ${event.slot}`;
        core.palettes[event.block][event.slot] = { type: "color", hex: event.hex.toLowerCase() };
        return null;
      });

    case "mask-slot":
      return edit(state, (core) => {
        const slot = core.palettes[event.block][event.slot];
        if (!slot || slot.type !== "color") return "only a colored slot can be masked";
        core.palettes[event.block][event.slot] = { type: "masked" };
        return null;
      });

    case "clear-slot":
      return edit(state, (core) => {
        if (event.slot < 0 || event.slot >= SLOTS_PER_BLOCK) return `bad slot ${event.slot}`;
        core.palettes[event.block][event.slot] = { type: "empty" };
        return null;
      });

    case "add-phrase":
      return edit(state, (core) => {
        if (core.phrases.length >= MAX_PHRASES) return `at most ${MAX_PHRASES} phrases`;
        if (!event.text.trim()) return "phrase text is empty";
        core.phrases.push({ text: event.text.trim(), kind: event.kind });
        return null;
      });

    case "remove-phrase":
      return edit(state, (core) => {
        if (event.index < 0 || event.index >= core.phrases.length) return "no such phrase";
        core.phrases.splice(event.index, 1);
        return null;
      });

    case "set-k":
      return edit(state, (core) => {
        if (!Number.isInteger(event.k) || event.k < 1 || event.k > 4096) return `bad k ${event.k}`;
        core.k = event.k;
        return null;
      });

    case "set-post-process":
      return edit(state, (core) => {
        core.postProcess = event.enabled;
        return null;
      });

    case "apply-candidate":
      // replaces exactly one slot; anything else about the document stays put
      return edit(state, (core) => {
        const slot = core.palettes[event.block][event.slot];
        if (!slot || slot.type !== "masked") return "candidate can only fill a masked slot";
        if (!HEX_RE.test(event.hex)) return `not a hex color: ${event.hex}`;
        core.palettes[event.block][event.slot] = { type: "color", hex: event.hex.toLowerCase() };
        return null;
      });

    case "undo": {
      if (state.history.length === 0) return withError(state, "nothing to undo");
      const history = state.history.slice();
      const core = history.pop()!;
      return { ...state, core, history, lastError: null };
    }

    case "completion-started":
    case "generation-started":
      return {
        ...state,
        pending: {
          action: event.type === "completion-started" ? "completion" : "generation",
          seq: event.seq,
        },
        seqCounter: Math.max(state.seqCounter, event.seq),
        lastError: null,
      };

    case "completion-received":
      if (!state.pending || state.pending.seq !== event.seq) return state; // stale
      return { ...state, pending: null, recommendations: event.recommendations, lastError: null };

    case "completion-failed":
      if (!state.pending || state.pending.seq !== event.seq) return state;
      return { ...state, pending: null, lastError: event.message };

    case "generation-received":
      if (!state.pending || state.pending.seq !== event.seq) return state;
      return { ...state, pending: null, generated: event.colors, lastError: null };

    case "generation-failed":
      if (!state.pending || state.pending.seq !== event.seq) return state;
      return { ...state, pending: null, lastError: event.message };
  }
}

export function replay(events: StudioEvent[], start?: StudioState): StudioState {
  return events.reduce(reduce, start ?? initialState());
}

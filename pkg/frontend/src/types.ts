export type Block = "image" | "graphic" | "text";

export const BLOCKS: Block[] = ["image", "graphic", "text"];
export const SLOTS_PER_BLOCK = 5;
export const MAX_PHRASES = 10;

/** One palette slot: a color, a masked hole to fill, or empty (unused). */
export type Slot =
  | { type: "color"; hex: string }
  | { type: "masked" }
  | { type: "empty" };

export interface PhraseEntry {
  text: string;
  kind: "content" | "label";
}

export interface Candidate {
  color: string;
  probability: number;
}

export interface SlotRecommendation {
  block: Block;
  slot: number;
  candidates: Candidate[];
}

/** Editable document state; snapshots of this go on the undo stack. */
export interface StudioCore {
  palettes: Record<Block, Slot[]>;
  phrases: PhraseEntry[];
  k: number;
  postProcess: boolean;
}

export interface StudioState {
  core: StudioCore;
  history: StudioCore[];
  recommendations: SlotRecommendation[];
  generated: string[] | null;
  pending: { action: "completion" | "generation"; seq: number } | null;
  lastError: string | null;
  seqCounter: number;
}

export type StudioEvent =
  | { type: "set-color"; block: Block; slot: number; hex: string }
  | { type: "mask-slot"; block: Block; slot: number }
  | { type: "clear-slot"; block: Block; slot: number }
  | { type: "add-phrase"; text: string; kind: "content" | "label" }
  | { type: "remove-phrase"; index: number }
  | { type: "set-k"; k: number }
  | { type: "set-post-process"; enabled: boolean }
  | { type: "apply-candidate"; block: Block; slot: number; hex: string }
  | { type: "undo" }
  | { type: "completion-started"; seq: number }
  | { type: "completion-received"; seq: number; recommendations: SlotRecommendation[] }
  | { type: "completion-failed"; seq: number; message: string }
  | { type: "generation-started"; seq: number }
  | { type: "generation-received"; seq: number; colors: string[] }
  | { type: "generation-failed"; seq: number; message: string };

export const HEX_RE = /^#[0-9a-f]{6}$/i;

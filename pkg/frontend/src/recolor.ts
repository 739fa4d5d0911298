/** Exact flat-color substitution over inline vector markup: every fill whose
 * value matches a mapped hex is replaced; all other attributes stay untouched.
 * Stands in for palette-based photo recoloring, which needs raster pipelines. */

export interface RecolorResult {
  markup: string;
  replaced: number;
  /** mapping entries whose old color never appeared (ignored, but reported) */
  unmatched: string[];
}

const FILL_RE = /(fill\s*[:=]\s*["']?)(#[0-9a-fA-F]{6})(["']?)/g;

export function flatRecolorPreview(markup: string, mapping: Record<string, string>): RecolorResult {
  const table = new Map<string, string>();
  for (const [from, to] of Object.entries(mapping)) {
    table.set(from.toLowerCase(), to.toLowerCase());
  }
  const used = new Set<string>();
  let replaced = 0;
  const out = markup.replace(FILL_RE, (whole, pre: string, hex: string, post: string) => {
    const target = table.get(hex.toLowerCase());
    if (target === undefined) return whole;
    used.add(hex.toLowerCase());
    replaced++;
    return `${pre}${target}${post}`;
  });
  const unmatched = [...table.keys()].filter((k) => !used.has(k));
  return { markup: out, replaced, unmatched };
}

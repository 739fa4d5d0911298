import { describe, expect, it } from "vitest";

import { flatRecolorPreview } from "../src/recolor.js";

const SQUARE = `<svg viewBox="0 0 10 10"><rect x="1" y="1" width="8" height="8" fill="#000000" stroke="#123456"/></svg>`;

describe("flatRecolorPreview", () => {
  it("empty mapping leaves the document identical", () => {
    const out = flatRecolorPreview(SQUARE, {});
    expect(out.markup).toBe(SQUARE);
    expect(out.replaced).toBe(0);
    expect(out.unmatched).toEqual([]);
  });

  it("maps a black square to red", () => {
    const out = flatRecolorPreview(SQUARE, { "#000000": "#ff0000" });
    expect(out.markup).toContain(`fill="#ff0000"`);
    expect(out.replaced).toBe(1);
  });

  it("leaves non-fill attributes untouched", () => {
    const out = flatRecolorPreview(SQUARE, { "#123456": "#ff0000" });
    expect(out.markup).toContain(`stroke="#123456"`);
    expect(out.unmatched).toEqual(["#123456"]);
  });

  it("two disjoint single maps equal one combined map", () => {
    const doc = `<g><rect fill="#111111"/><rect fill="#222222"/><rect fill="#111111"/></g>`;
    const combined = flatRecolorPreview(doc, { "#111111": "#aaaaaa", "#222222": "#bbbbbb" });
    const sequential = flatRecolorPreview(
      flatRecolorPreview(doc, { "#111111": "#aaaaaa" }).markup,
      { "#222222": "#bbbbbb" });
    expect(sequential.markup).toBe(combined.markup);
    expect(combined.replaced).toBe(3);
  });

  it("reports unmatched mappings but applies the rest", () => {
    const out = flatRecolorPreview(SQUARE, { "#000000": "#ff0000", "#abcdef": "#00ff00" });
    expect(out.replaced).toBe(1);
    expect(out.unmatched).toEqual(["#abcdef"]);
  });

  it("matches case-insensitively and handles style fills", () => {
    const doc = `<rect style="fill:#ABCDEF" fill='#abcdef'/>`;
    const out = flatRecolorPreview(doc, { "#AbCdEf": "#000000" });
    expect(out.replaced).toBe(2);
    expect(out.markup).toBe(`<rect style="fill:#000000" fill='#000000'/>`);
  });
});

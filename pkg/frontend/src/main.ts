/** Browser entry: wires DOM events to the controller and re-renders on every
 * state change. The server address comes from ?api=... or defaults to the
 * same origin. */

import { PmuseClient } from "./api.js";
import { StudioController } from "./controller.js";
import { renderApp } from "./render.js";
import { Block } from "./types.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const root = document.getElementById("app")!;

const controller = new StudioController(new PmuseClient(base), (state) => {
  root.innerHTML = renderApp(state);
});

controller.dispatch({ type: "set-k", k: 5 });

root.addEventListener("click", (ev) => {
  const el = ev.target instanceof Element ? ev.target.closest("button") : null;
  if (!el) return;
  const block = el.getAttribute("data-block") as Block | null;
  const slot = Number(el.getAttribute("data-slot"));

  if (el.classList.contains("slot") && block) {
    if (el.classList.contains("color")) {
      controller.dispatch({ type: "mask-slot", block, slot });
    } else {
      const hex = window.prompt("hex color (#rrggbb), empty to clear:");
      if (hex === null) return;
      if (hex.trim() === "") controller.dispatch({ type: "clear-slot", block, slot });
      else controller.dispatch({ type: "set-color", block, slot, hex: hex.trim() });
    }
  } else if (el.classList.contains("swatch") && block) {
    const hex = el.getAttribute("data-hex")!;
    controller.dispatch({ type: "apply-candidate", block, slot, hex });
  } else if (el.classList.contains("remove-phrase")) {
    controller.dispatch({ type: "remove-phrase", index: Number(el.getAttribute("data-index")) });
  } else if (el.classList.contains("request-completion")) {
    void controller.requestCompletion();
  } else if (el.classList.contains("request-generation")) {
    void controller.requestGeneration();
  } else if (el.classList.contains("undo")) {
    controller.dispatch({ type: "undo" });
  } else if (el.classList.contains("copy-json")) {
    void navigator.clipboard.writeText(el.getAttribute("data-payload") ?? "[]");
  }
});

root.addEventListener("change", (ev) => {
  const el = ev.target as HTMLInputElement;
  if (el.classList.contains("set-k")) {
    controller.dispatch({ type: "set-k", k: Number(el.value) });
  } else if (el.classList.contains("set-pp")) {
    controller.dispatch({ type: "set-post-process", enabled: el.checked });
  }
});

const phraseForm = document.getElementById("phrase-form") as HTMLFormElement | null;
phraseForm?.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const input = document.getElementById("phrase-text") as HTMLInputElement;
  const kind = (document.getElementById("phrase-kind") as HTMLSelectElement).value as
    "content" | "label";
  if (input.value.trim()) {
    controller.dispatch({ type: "add-phrase", text: input.value, kind });
    input.value = "";
  }
});

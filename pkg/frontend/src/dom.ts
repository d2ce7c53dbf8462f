// DOM renderer: one screen at a time, driven entirely by controller state.

import type { SessionController, UiState } from "./session.js";
import type { PresentationItem, Question } from "./types.js";

export function mount(root: HTMLElement, controller: SessionController): void {
  controller.subscribe((state) => render(root, controller, state));
  render(root, controller, controller.state);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function render(root: HTMLElement, controller: SessionController, state: UiState): void {
  root.replaceChildren(screenFor(controller, state));
}

function screenFor(controller: SessionController, state: UiState): HTMLElement {
  switch (state.screen) {
    case "consent":
      return consentScreen(controller);
    case "username":
      return usernameScreen(controller, state);
    case "waiting":
      return waitingScreen(state);
    case "rating":
      return ratingScreen(controller, state);
    case "global":
      return globalScreen(controller, state);
    case "done":
      return el("section", { class: "card" },
        el("h1", {}, "All done!"),
        el("p", {}, "Thank you for taking part. You can close this page now."));
    case "error":
      return el("section", { class: "card error" },
        el("h1", {}, "Something went wrong"),
        el("p", {}, state.error ?? "unknown error"),
        el("p", {}, "You can reload the page to start over."));
  }
}

function consentScreen(controller: SessionController): HTMLElement {
  const button = el("button", { class: "primary" }, "I consent, begin");
  button.addEventListener("click", () => void controller.acceptConsent());
  return el("section", { class: "card" },
    el("h1", {}, "Music recommendation study"),
    el("p", {},
      "We will look up your public listening history, generate music " +
      "recommendations for you, and ask a few questions about each track. " +
      "Only your username and your answers are stored."),
    button);
}

function usernameScreen(controller: SessionController, state: UiState): HTMLElement {
  const input = el("input", { type: "text", placeholder: "your scrobble username", id: "username" });
  const button = el("button", { class: "primary" }, "Fetch my listening history");
  const error = state.fieldErrors["username"];
  button.addEventListener("click", () => void controller.submitUsername(input.value));
  return el("section", { class: "card" },
    el("h1", {}, "Who are you?"),
    el("p", {}, "Enter the username of your public scrobbling account."),
    input,
    error ? el("p", { class: "field-error" }, error) : "",
    button);
}

function waitingScreen(state: UiState): HTMLElement {
  const status = state.status;
  const phase = status?.phase === "Recommending" ? "Building your recommendations" : "Collecting your listening history";
  const pct = Math.round((status?.progress ?? 0) * 100);
  return el("section", { class: "card" },
    el("h1", {}, "Hang tight"),
    el("p", {}, `${phase}...`),
    el("progress", { max: "100", value: String(pct) }),
    el("p", { class: "dim" }, `${pct}%`));
}

function questionField(
  controller: SessionController,
  state: UiState,
  question: Question,
): HTMLElement {
  const field = el("div", { class: "question" },
    el("p", {}, question.prompt + (question.required ? "" : " (optional)")));
  if (question.kind === "likert-1-5") {
    const row = el("div", { class: "likert" });
    for (let value = 1; value <= 5; value++) {
      const button = el("button", {
        class: state.drafts[question.id] === value ? "likert-option selected" : "likert-option",
      }, String(value));
      button.addEventListener("click", () => controller.setDraft(question.id, value));
      row.append(button);
    }
    field.append(row);
  } else {
    const area = el("textarea", { rows: "3" });
    area.value = typeof state.drafts[question.id] === "string" ? (state.drafts[question.id] as string) : "";
    area.addEventListener("input", () => controller.setDraft(question.id, area.value));
    field.append(area);
  }
  const error = state.fieldErrors[question.id];
  if (error) {
    field.append(el("p", { class: "field-error" }, error));
  }
  return field;
}

function previewBlock(item: PresentationItem): HTMLElement {
  // playback uses only what the API delivered; no catalog calls from the UI
  const audio = el("audio", { controls: "", src: item.preview_url, preload: "none" });
  return el("div", { class: "preview", "data-embed-ref": item.embed_markup_ref },
    el("img", { src: item.artwork_url, alt: "album art", class: "artwork" }),
    el("div", {},
      el("h2", {}, item.title),
      el("p", { class: "dim" }, item.artist),
      audio));
}

function ratingScreen(controller: SessionController, state: UiState): HTMLElement {
  const item = state.items[state.trackIndex];
  if (!item) {
    return el("section", { class: "card error" }, el("p", {}, "no track to rate"));
  }
  const next = el("button", { class: "primary" },
    state.trackIndex + 1 === state.items.length ? "Finish tracks" : "Next track");
  if (!controller.canSubmitTrack()) {
    next.setAttribute("disabled", "");
  }
  next.addEventListener("click", () => void controller.submitTrackAnswers());
  return el("section", { class: "card" },
    el("p", { class: "dim" }, `Track ${state.trackIndex + 1} of ${state.items.length}`),
    previewBlock(item),
    ...item.questions.map((q) => questionField(controller, state, q)),
    next);
}

function globalScreen(controller: SessionController, state: UiState): HTMLElement {
  const submit = el("button", { class: "primary" }, "Submit and finish");
  if (!controller.canSubmitGlobal()) {
    submit.setAttribute("disabled", "");
  }
  submit.addEventListener("click", () => void controller.submitGlobalAnswers());
  return el("section", { class: "card" },
    el("h1", {}, "Almost there"),
    el("p", {}, "A few questions about the list as a whole."),
    ...state.globalQuestions.map((q) => questionField(controller, state, q)),
    submit);
}

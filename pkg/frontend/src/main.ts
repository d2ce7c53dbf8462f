// Browser entry point: wire the controller to real fetch, timers and storage.

import { StudyApi } from "./api.js";
import { mount } from "./dom.js";
import { SessionController } from "./session.js";

declare global {
  interface Window {
    RECSTUDY_BASE_URL?: string;
  }
}

const baseUrl = window.RECSTUDY_BASE_URL ?? ""; // same origin by default

const controller = new SessionController({
  api: new StudyApi(baseUrl, (url, init) => fetch(url, init)),
  sleep: (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
  storage: window.sessionStorage,
});

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}
mount(root, controller);
void controller.begin();

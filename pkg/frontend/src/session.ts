// Participant session flow: a small state machine mirroring the server's.
//
// The screen progression is consent -> username -> waiting -> one rating
// screen per track -> global form -> done, with an error screen for any
// terminal failure.  All timing and IO is injected, so the whole flow is
// testable without a browser.

import { ApiError, StudyApi } from "./api.js";
import type { Answers, AnswerValue, PresentationItem, Question, StatusResponse } from "./types.js";

export type Screen =
  | "consent"
  | "username"
  | "waiting"
  | "rating"
  | "global"
  | "done"
  | "error";

export interface UiState {
  screen: Screen;
  sessionId: string | null;
  trackIndex: number; // 0-based position in items while rating
  items: PresentationItem[];
  globalQuestions: Question[];
  drafts: Answers; // answers for the screen currently shown
  fieldErrors: Record<string, string>;
  status: StatusResponse | null; // last status seen while waiting
  error: string | null;
  busy: boolean;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface ControllerDeps {
  api: StudyApi;
  sleep: (ms: number) => Promise<void>;
  storage: StorageLike;
  pollIntervalMs?: number;
}

const STORAGE_KEY = "recstudy.session";

interface StoredProgress {
  sessionId: string;
  nextRank: number; // 1-based rank of the next unanswered track
}

function freshState(): UiState {
  return {
    screen: "consent",
    sessionId: null,
    trackIndex: 0,
    items: [],
    globalQuestions: [],
    drafts: {},
    fieldErrors: {},
    status: null,
    error: null,
    busy: false,
  };
}

export class SessionController {
  readonly state: UiState = freshState();
  private readonly api: StudyApi;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly storage: StorageLike;
  private readonly pollIntervalMs: number;
  private listeners: Array<(state: UiState) => void> = [];

  constructor(deps: ControllerDeps) {
    this.api = deps.api;
    this.sleep = deps.sleep;
    this.storage = deps.storage;
    this.pollIntervalMs = deps.pollIntervalMs ?? 2000;
  }

  subscribe(listener: (state: UiState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private set(partial: Partial<UiState>): void {
    Object.assign(this.state, partial);
    this.emit();
  }

  private saveProgress(nextRank: number): void {
    if (this.state.sessionId) {
      const progress: StoredProgress = { sessionId: this.state.sessionId, nextRank };
      this.storage.setItem(STORAGE_KEY, JSON.stringify(progress));
    }
  }

  private loadProgress(): StoredProgress | null {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return null;
    try {
      const parsed = JSON.parse(raw) as StoredProgress;
      return typeof parsed.sessionId === "string" ? parsed : null;
    } catch {
      return null;
    }
  }

  /** Entry point: resume a stored session from server status, else start fresh. */
  async begin(): Promise<void> {
    const stored = this.loadProgress();
    if (!stored) {
      this.set(freshState());
      return;
    }
    this.set({ ...freshState(), sessionId: stored.sessionId });
    let status: StatusResponse;
    try {
      status = await this.api.getStatus(stored.sessionId);
    } catch (err) {
      // unknown/expired session: start over
      this.storage.removeItem(STORAGE_KEY);
      this.set({ ...freshState() });
      return;
    }
    await this.enterFromStatus(status, stored.nextRank);
  }

  private async enterFromStatus(status: StatusResponse, nextRank: number): Promise<void> {
    switch (status.state) {
      case "Created":
        this.set({ screen: "consent" });
        return;
      case "Consented":
        this.set({ screen: "username" });
        return;
      case "Collecting":
      case "Recommending":
        this.set({ screen: "waiting", status });
        await this.pollUntilReady();
        return;
      case "Rating": {
        await this.loadItems();
        const index = Math.min(Math.max(nextRank - 1, 0), this.state.items.length);
        if (index >= this.state.items.length) {
          this.set({ screen: "global", drafts: {}, fieldErrors: {} });
        } else {
          this.set({ screen: "rating", trackIndex: index, drafts: {}, fieldErrors: {} });
        }
        return;
      }
      case "Completed":
        this.set({ screen: "done" });
        return;
      case "Failed":
        this.fail(status.reason ?? "the session failed");
        return;
    }
  }

  private fail(reason: string): void {
    this.storage.removeItem(STORAGE_KEY);
    this.set({ screen: "error", error: reason });
  }

  async acceptConsent(): Promise<void> {
    this.set({ busy: true });
    try {
      const sessionId = await this.api.createSession();
      await this.api.consent(sessionId);
      this.set({ sessionId, screen: "username" });
      this.saveProgress(1);
    } catch (err) {
      this.fail(describe(err));
    } finally {
      this.set({ busy: false });
    }
  }

  async submitUsername(username: string): Promise<void> {
    if (!this.state.sessionId || !username.trim()) return;
    this.set({ busy: true });
    try {
      await this.api.submitUsername(this.state.sessionId, username.trim());
      this.set({ screen: "waiting", busy: false });
      await this.pollUntilReady();
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.set({ fieldErrors: { username: "enter a valid username" }, busy: false });
        return;
      }
      this.fail(describe(err));
      this.set({ busy: false });
    }
  }

  /** Poll status at a fixed interval until Rating (fetch items) or Failed. */
  async pollUntilReady(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) return;
    let backoff = this.pollIntervalMs;
    for (;;) {
      let status: StatusResponse;
      try {
        status = await this.api.getStatus(sessionId);
        backoff = this.pollIntervalMs;
      } catch (err) {
        if (err instanceof ApiError && err.status < 500) {
          this.fail(describe(err));
          return;
        }
        // transient: retry with backoff
        backoff = Math.min(backoff * 1.5, 10_000);
        await this.sleep(backoff);
        continue;
      }
      this.set({ status });
      if (status.state === "Rating") {
        await this.loadItems();
        this.set({ screen: "rating", trackIndex: 0, drafts: {}, fieldErrors: {} });
        this.saveProgress(1);
        return;
      }
      if (status.state === "Failed") {
        this.fail(status.reason ?? "the session failed");
        return;
      }
      if (status.state === "Completed") {
        this.set({ screen: "done" });
        return;
      }
      await this.sleep(this.pollIntervalMs);
    }
  }

  private async loadItems(): Promise<void> {
    if (!this.state.sessionId) return;
    const body = await this.api.getItems(this.state.sessionId);
    this.set({ items: body.items, globalQuestions: body.global_questions });
  }

  setDraft(questionId: string, value: AnswerValue): void {
    const drafts = { ...this.state.drafts, [questionId]: value };
    const fieldErrors = { ...this.state.fieldErrors };
    delete fieldErrors[questionId];
    this.set({ drafts, fieldErrors });
  }

  private requiredComplete(questions: Question[]): boolean {
    return questions.every((q) => {
      if (!q.required) return true;
      const value = this.state.drafts[q.id];
      if (q.kind === "likert-1-5") return typeof value === "number";
      return typeof value === "string" && value.trim().length > 0;
    });
  }

  /** The rating screen's next button stays disabled until this is true. */
  canSubmitTrack(): boolean {
    const item = this.state.items[this.state.trackIndex];
    return !!item && !this.state.busy && this.requiredComplete(item.questions);
  }

  canSubmitGlobal(): boolean {
    return !this.state.busy && this.requiredComplete(this.state.globalQuestions);
  }

  async submitTrackAnswers(): Promise<void> {
    const item = this.state.items[this.state.trackIndex];
    if (!this.state.sessionId || !item || !this.canSubmitTrack()) return;
    this.set({ busy: true });
    try {
      await this.api.submitTrackResponse(this.state.sessionId, item.rank, this.state.drafts);
      this.advancePastTrack(item.rank);
    } catch (err) {
      if (err instanceof ApiError && err.questionId) {
        // field-level error; drafts stay intact
        this.set({
          fieldErrors: { ...this.state.fieldErrors, [err.questionId]: String(err.body["detail"] ?? "invalid answer") },
        });
      } else if (err instanceof ApiError && err.errorKind === "DuplicateResponse") {
        // already answered (e.g. resumed session): move on
        this.advancePastTrack(item.rank);
      } else {
        this.fail(describe(err));
      }
    } finally {
      this.set({ busy: false });
    }
  }

  private advancePastTrack(rank: number): void {
    this.saveProgress(rank + 1);
    if (rank >= this.state.items.length) {
      this.set({ screen: "global", drafts: {}, fieldErrors: {} });
    } else {
      this.set({ screen: "rating", trackIndex: rank, drafts: {}, fieldErrors: {} });
    }
  }

  async submitGlobalAnswers(): Promise<void> {
    if (!this.state.sessionId || !this.canSubmitGlobal()) return;
    this.set({ busy: true });
    try {
      await this.api.submitGlobalResponse(this.state.sessionId, this.state.drafts);
      this.storage.removeItem(STORAGE_KEY);
      this.set({ screen: "done" });
    } catch (err) {
      if (err instanceof ApiError && err.questionId) {
        this.set({
          fieldErrors: { ...this.state.fieldErrors, [err.questionId]: String(err.body["detail"] ?? "invalid answer") },
        });
      } else {
        this.fail(describe(err));
      }
    } finally {
      this.set({ busy: false });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    const detail = err.body["detail"];
    return typeof detail === "string" ? detail : err.errorKind;
  }
  return err instanceof Error ? err.message : String(err);
}

// Session flow tests against a scripted in-memory backend.

import { beforeEach, describe, expect, it } from "vitest";

import { StudyApi, type FetchLike } from "../src/api.js";
import { SessionController, type StorageLike } from "../src/session.js";
import type { Answers, Question, SessionState, StatusResponse } from "../src/types.js";

const PER_TRACK: Question[] = [
  { id: "fit", prompt: "How appropriate?", kind: "likert-1-5", required: true },
  { id: "comment", prompt: "Say more", kind: "free-text", required: false },
];
const GLOBAL: Question[] = [
  { id: "overall", prompt: "Overall satisfaction?", kind: "likert-1-5", required: true },
  { id: "feedback", prompt: "Anything else?", kind: "free-text", required: false },
];

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Scripted study-service backend with the same validation rules as the server. */
class MockBackend {
  state: SessionState = "Created";
  failureReason: string | null = null;
  statusScript: StatusResponse[] = [];
  records: Array<{ kind: "track" | "global"; rank?: number; answers: Answers }> = [];
  answeredRanks = new Set<number>();
  hasGlobal = false;
  rejectNext: { questionId: string; detail: string } | null = null;
  networkFailures = 0; // status requests to drop before answering
  itemsFetches = 0;
  nTracks: number;

  constructor(nTracks = 10) {
    this.nTracks = nTracks;
  }

  items() {
    return Array.from({ length: this.nTracks }, (_, i) => ({
      rank: i + 1,
      artist: `Artist ${i}`,
      title: `Track ${i}`,
      preview_url: `http://preview/${i}.mp3`,
      artwork_url: `http://art/${i}.jpg`,
      embed_markup_ref: `embed:track:t${i}`,
      questions: PER_TRACK,
    }));
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? (JSON.parse(init.body as string) as Record<string, unknown>) : {};
    if (method === "POST" && url.endsWith("/api/sessions")) {
      return json(201, { session_id: "mock-session" });
    }
    if (method === "POST" && url.endsWith("/consent")) {
      this.state = "Consented";
      return json(200, { state: this.state });
    }
    if (method === "POST" && url.endsWith("/username")) {
      this.state = "Collecting";
      return json(202, { state: this.state });
    }
    if (url.endsWith("/status")) {
      if (this.networkFailures > 0) {
        this.networkFailures -= 1;
        throw new TypeError("fetch failed");
      }
      const scripted = this.statusScript.shift();
      if (scripted) {
        this.state = scripted.state;
        this.failureReason = scripted.reason ?? null;
        return json(200, scripted);
      }
      const status: StatusResponse = { state: this.state };
      if (this.failureReason) status.reason = this.failureReason;
      return json(200, status);
    }
    if (url.endsWith("/items")) {
      this.itemsFetches += 1;
      return json(200, { items: this.items(), global_questions: GLOBAL });
    }
    if (method === "POST" && url.endsWith("/responses/track")) {
      if (this.state !== "Rating") {
        return json(409, { error: "WrongState", detail: `session is ${this.state}` });
      }
      const rank = body["rank"] as number;
      const answers = body["answers"] as Answers;
      if (this.rejectNext) {
        const { questionId, detail } = this.rejectNext;
        this.rejectNext = null;
        return json(422, { error: "InvalidAnswer", question_id: questionId, detail });
      }
      const fit = answers["fit"];
      if (typeof fit !== "number" || fit < 1 || fit > 5) {
        return json(422, { error: "InvalidAnswer", question_id: "fit", detail: "out of range" });
      }
      if (this.answeredRanks.has(rank)) {
        return json(409, { error: "DuplicateResponse", detail: `rank ${rank} already answered` });
      }
      this.answeredRanks.add(rank);
      this.records.push({ kind: "track", rank, answers });
      this.maybeComplete();
      return json(200, { state: this.state });
    }
    if (method === "POST" && url.endsWith("/responses/global")) {
      if (this.state !== "Rating") {
        return json(409, { error: "WrongState", detail: `session is ${this.state}` });
      }
      if (this.hasGlobal) {
        return json(409, { error: "DuplicateResponse", detail: "global already submitted" });
      }
      this.hasGlobal = true;
      this.records.push({ kind: "global", answers: body["answers"] as Answers });
      this.maybeComplete();
      return json(200, { state: this.state });
    }
    return json(404, { error: "UnknownSession", detail: url });
  };

  private maybeComplete(): void {
    if (this.hasGlobal && this.answeredRanks.size === this.nTracks) {
      this.state = "Completed";
    }
  }
}

class MemoryStorage implements StorageLike {
  private map = new Map<string, string>();
  getItem(key: string) {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string) {
    this.map.set(key, value);
  }
  removeItem(key: string) {
    this.map.delete(key);
  }
}

function makeController(backend: MockBackend, storage = new MemoryStorage(), pollIntervalMs = 1) {
  const sleeps: number[] = [];
  const controller = new SessionController({
    api: new StudyApi("", backend.fetch),
    sleep: async (ms) => {
      sleeps.push(ms);
    },
    storage,
    pollIntervalMs,
  });
  return { controller, sleeps, storage };
}

async function driveToRating(backend: MockBackend, controller: SessionController) {
  await controller.begin();
  expect(controller.state.screen).toBe("consent");
  await controller.acceptConsent();
  expect(controller.state.screen).toBe("username");
  backend.statusScript = [
    { state: "Collecting", phase: "Collecting", progress: 0.25 },
    { state: "Recommending", phase: "Recommending", progress: 0.5 },
    { state: "Rating" },
  ];
  await controller.submitUsername("participant");
  expect(controller.state.screen).toBe("rating");
}

describe("participant flow", () => {
  let backend: MockBackend;

  beforeEach(() => {
    backend = new MockBackend();
  });

  it("runs consent -> username -> waiting -> 10 tracks -> global -> done with 11 records", async () => {
    const { controller } = makeController(backend);
    await driveToRating(backend, controller);
    expect(backend.itemsFetches).toBe(1);

    for (let track = 0; track < 10; track++) {
      expect(controller.state.screen).toBe("rating");
      expect(controller.state.trackIndex).toBe(track);
      expect(controller.canSubmitTrack()).toBe(false); // required answer missing
      await controller.submitTrackAnswers(); // no-op while incomplete
      expect(backend.records.length).toBe(track);
      controller.setDraft("fit", 4);
      controller.setDraft("comment", "nice");
      expect(controller.canSubmitTrack()).toBe(true);
      await controller.submitTrackAnswers();
    }
    expect(controller.state.screen).toBe("global");
    expect(controller.canSubmitGlobal()).toBe(false);
    controller.setDraft("overall", 5);
    await controller.submitGlobalAnswers();

    expect(controller.state.screen).toBe("done");
    expect(backend.records).toHaveLength(11);
    expect(backend.records.slice(0, 10).map((r) => r.rank)).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    expect(backend.records[10]?.kind).toBe("global");
    expect(backend.state).toBe("Completed");
  });

  it("issues responses strictly in rank order, exactly once per rank", async () => {
    const { controller } = makeController(backend);
    await driveToRating(backend, controller);
    for (let track = 0; track < 10; track++) {
      controller.setDraft("fit", 3);
      await controller.submitTrackAnswers();
    }
    const ranks = backend.records.map((r) => r.rank);
    expect(ranks).toEqual([...new Set(ranks)]);
    expect(ranks).toEqual([...ranks].sort((a, b) => (a ?? 0) - (b ?? 0)));
  });

  it("keeps drafts intact and shows a field error on InvalidAnswer", async () => {
    const { controller } = makeController(backend);
    await driveToRating(backend, controller);
    controller.setDraft("fit", 4);
    controller.setDraft("comment", "keep me");
    backend.rejectNext = { questionId: "fit", detail: "server says no" };
    await controller.submitTrackAnswers();

    expect(controller.state.screen).toBe("rating");
    expect(controller.state.trackIndex).toBe(0);
    expect(controller.state.drafts).toEqual({ fit: 4, comment: "keep me" });
    expect(controller.state.fieldErrors["fit"]).toBe("server says no");
    expect(backend.records).toHaveLength(0);

    await controller.submitTrackAnswers(); // unchanged drafts now accepted
    expect(controller.state.trackIndex).toBe(1);
    expect(backend.records).toHaveLength(1);
  });

  it("shows the failure reason when the session fails", async () => {
    const { controller } = makeController(backend);
    await controller.begin();
    await controller.acceptConsent();
    backend.statusScript = [
      { state: "Collecting" },
      { state: "Failed", reason: "ineligible" },
    ];
    await controller.submitUsername("littleplays");
    expect(controller.state.screen).toBe("error");
    expect(controller.state.error).toBe("ineligible");
  });

  it("transitions immediately when the first poll already reports Rating", async () => {
    const { controller, sleeps } = makeController(backend);
    await controller.begin();
    await controller.acceptConsent();
    backend.statusScript = [{ state: "Rating" }];
    await controller.submitUsername("participant");
    expect(controller.state.screen).toBe("rating");
    expect(controller.state.trackIndex).toBe(0);
    expect(sleeps).toHaveLength(0); // no wait needed
  });

  it("polls at the configured interval", async () => {
    const { controller, sleeps } = makeController(backend, new MemoryStorage(), 2000);
    await controller.begin();
    await controller.acceptConsent();
    backend.statusScript = [
      { state: "Collecting" },
      { state: "Collecting" },
      { state: "Rating" },
    ];
    await controller.submitUsername("participant");
    expect(sleeps).toEqual([2000, 2000]);
  });

  it("retries polling with backoff after network failures", async () => {
    const { controller, sleeps } = makeController(backend, new MemoryStorage(), 1000);
    await controller.begin();
    await controller.acceptConsent();
    backend.networkFailures = 2;
    backend.statusScript = [{ state: "Rating" }];
    await controller.submitUsername("participant");
    expect(controller.state.screen).toBe("rating");
    expect(sleeps).toEqual([1500, 2250]); // growing backoff, then straight through
  });
});

describe("session resumption", () => {
  it("resumes mid-rating from server status and the stored rank", async () => {
    const backend = new MockBackend();
    backend.state = "Rating";
    backend.answeredRanks = new Set([1, 2, 3]);
    const storage = new MemoryStorage();
    storage.setItem("recstudy.session", JSON.stringify({ sessionId: "mock-session", nextRank: 4 }));

    const { controller } = makeController(backend, storage);
    await controller.begin();
    expect(controller.state.screen).toBe("rating");
    expect(controller.state.trackIndex).toBe(3);
  });

  it("recovers via DuplicateResponse when the stored rank is stale", async () => {
    const backend = new MockBackend();
    backend.state = "Rating";
    backend.answeredRanks = new Set([1]);
    const storage = new MemoryStorage();
    storage.setItem("recstudy.session", JSON.stringify({ sessionId: "mock-session", nextRank: 1 }));

    const { controller } = makeController(backend, storage);
    await controller.begin();
    expect(controller.state.trackIndex).toBe(0);
    controller.setDraft("fit", 2);
    await controller.submitTrackAnswers(); // 409 duplicate -> advance, no new record
    expect(controller.state.trackIndex).toBe(1);
    expect(backend.records).toHaveLength(0);
  });

  it("resumes a waiting session and keeps polling", async () => {
    const backend = new MockBackend();
    backend.state = "Collecting";
    backend.statusScript = [{ state: "Collecting" }, { state: "Rating" }];
    const storage = new MemoryStorage();
    storage.setItem("recstudy.session", JSON.stringify({ sessionId: "mock-session", nextRank: 1 }));

    const { controller } = makeController(backend, storage);
    await controller.begin();
    expect(controller.state.screen).toBe("rating");
  });

  it("shows done for a completed session", async () => {
    const backend = new MockBackend();
    backend.state = "Completed";
    const storage = new MemoryStorage();
    storage.setItem("recstudy.session", JSON.stringify({ sessionId: "mock-session", nextRank: 11 }));

    const { controller } = makeController(backend, storage);
    await controller.begin();
    expect(controller.state.screen).toBe("done");
  });

  it("starts over when the stored session is unknown", async () => {
    const backend = new MockBackend();
    const storage = new MemoryStorage();
    storage.setItem("recstudy.session", JSON.stringify({ sessionId: "ghost", nextRank: 1 }));
    const brokenFetch: FetchLike = async () => json(404, { error: "UnknownSession" });
    const controller = new SessionController({
      api: new StudyApi("", brokenFetch),
      sleep: async () => {},
      storage,
    });
    await controller.begin();
    expect(controller.state.screen).toBe("consent");
    expect(storage.getItem("recstudy.session")).toBeNull();
  });
});

// Wire types for the study service API.

export type SessionState =
  | "Created"
  | "Consented"
  | "Collecting"
  | "Recommending"
  | "Rating"
  | "Completed"
  | "Failed";

export interface StatusResponse {
  state: SessionState;
  phase?: string;
  progress?: number;
  reason?: string;
}

export interface Question {
  id: string;
  prompt: string;
  kind: "likert-1-5" | "free-text";
  required: boolean;
}

export interface PresentationItem {
  rank: number;
  artist: string;
  title: string;
  preview_url: string;
  artwork_url: string;
  embed_markup_ref: string;
  questions: Question[];
}

export interface ItemsResponse {
  items: PresentationItem[];
  global_questions: Question[];
}

export type AnswerValue = number | string;
export type Answers = Record<string, AnswerValue>;

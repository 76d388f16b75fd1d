/** Mirrors of the service JSON payloads, field names verbatim. */

export interface ResultItem {
  doc_id: string;
  score: number;
  selected_idx: number;
  sentences: string[];
}

export interface SessionResponse {
  session_id: string;
  state_retrieved: boolean;
  results: ResultItem[];
}

export interface FeedbackResponse {
  results: ResultItem[];
}

export interface EndResponse {
  stored: boolean;
}

export interface FeedbackEvent {
  doc_id: string;
  sentence_idx: number;
  step: number;
}

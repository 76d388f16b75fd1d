import type { EndResponse, FeedbackResponse, SessionResponse } from "./types";

/** Error carrying the service's machine-readable code when available. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string) {
    super(`service error ${status}: ${code}`);
    this.status = status;
    this.code = code;
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let code = "unknown";
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) code = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, code);
  }
  return (await response.json()) as T;
}

/** Thin client over the session service; one method per endpoint. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  createSession(query: string): Promise<SessionResponse> {
    return fetch(`${this.base}/api/session`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query }),
    }).then((r) => parse<SessionResponse>(r));
  }

  sendFeedback(
    sessionId: string,
    docId: string,
    sentenceIdx: number,
  ): Promise<FeedbackResponse> {
    return fetch(`${this.base}/api/session/${sessionId}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ doc_id: docId, sentence_idx: sentenceIdx }),
    }).then((r) => parse<FeedbackResponse>(r));
  }

  endSession(sessionId: string): Promise<EndResponse> {
    return fetch(`${this.base}/api/session/${sessionId}`, {
      method: "DELETE",
    }).then((r) => parse<EndResponse>(r));
  }
}

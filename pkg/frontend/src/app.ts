import { ApiClient, ApiError } from "./api";
import { arrowFor, computeRankDeltas } from "./rank";
import type { FeedbackEvent, ResultItem } from "./types";

interface SessionState {
  sessionId: string;
  query: string;
  results: ResultItem[];
  prevOrder: string[] | null;
  stateRetrieved: boolean;
  trail: FeedbackEvent[];
  step: number;
}

/** One active session per page; in-flight requests disable further clicks.
 *
 * The app renders exactly what the latest service response contains and
 * performs no ranking logic of its own.
 */
export class App {
  private session: SessionState | null = null;
  private busy = false;
  private banner: string | null = null;
  private notice: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.render();
  }

  async startSearch(query: string): Promise<void> {
    const trimmed = query.trim();
    if (!trimmed) {
      this.banner = "Enter a query first.";
      this.render();
      return;
    }
    if (this.busy) return;
    this.busy = true;
    this.banner = null;
    this.notice = null;
    this.render();
    try {
      const res = await this.api.createSession(trimmed);
      this.session = {
        sessionId: res.session_id,
        query: trimmed,
        results: res.results,
        prevOrder: null,
        stateRetrieved: res.state_retrieved,
        trail: [],
        step: 1,
      };
    } catch (err) {
      this.banner = describeError(err);
    } finally {
      this.busy = false;
      this.render();
    }
  }

  async clickSentence(docId: string, sentenceIdx: number): Promise<void> {
    const session = this.session;
    if (!session || this.busy) return;
    if (
      session.trail.some(
        (f) => f.doc_id === docId && f.sentence_idx === sentenceIdx,
      )
    ) {
      return; // duplicate clicks are a no-op, matching the service rule
    }
    this.busy = true;
    this.render();
    try {
      const res = await this.api.sendFeedback(
        session.sessionId,
        docId,
        sentenceIdx,
      );
      session.prevOrder = session.results.map((r) => r.doc_id);
      session.results = res.results;
      session.trail.push({
        doc_id: docId,
        sentence_idx: sentenceIdx,
        step: session.step,
      });
      session.step += 1;
    } catch (err) {
      if (err instanceof ApiError && err.code === "invalid_feedback") {
        this.notice = "That result is no longer on the page.";
      } else {
        this.banner = describeError(err);
      }
    } finally {
      this.busy = false;
      this.render();
    }
  }

  async endSession(): Promise<void> {
    const session = this.session;
    if (!session || this.busy) return;
    this.busy = true;
    this.render();
    try {
      await this.api.endSession(session.sessionId);
      this.notice = "Feedback saved for future searches.";
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) {
        this.banner = describeError(err);
      }
    } finally {
      this.session = null;
      this.busy = false;
      this.render();
    }
  }

  dismissBanner(): void {
    this.banner = null;
    this.render();
  }

  private render(): void {
    const root = this.root;
    root.textContent = "";
    root.appendChild(this.renderSearchBar());
    if (this.banner) root.appendChild(this.renderBanner());
    if (this.notice) root.appendChild(this.renderNotice());
    if (this.session) {
      if (this.session.stateRetrieved) {
        const badge = el("span", "badge", "resumed from history");
        badge.dataset.testid = "resumed-badge";
        root.appendChild(badge);
      }
      root.appendChild(this.renderTrail());
      root.appendChild(this.renderResults());
      const end = el("button", "end-session", "End session") as HTMLButtonElement;
      end.dataset.testid = "end-session";
      end.disabled = this.busy;
      end.addEventListener("click", () => void this.endSession());
      root.appendChild(end);
    }
  }

  private renderSearchBar(): HTMLElement {
    const bar = el("form", "search-bar");
    const input = el("input", "query-input") as HTMLInputElement;
    input.type = "text";
    input.placeholder = "Search…";
    input.dataset.testid = "query-input";
    const button = el("button", "search-button", "Search") as HTMLButtonElement;
    button.type = "submit";
    button.dataset.testid = "search-button";
    button.disabled = this.busy;
    bar.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.startSearch(input.value);
    });
    bar.append(input, button);
    return bar;
  }

  private renderBanner(): HTMLElement {
    const banner = el("div", "error-banner", this.banner ?? "");
    banner.dataset.testid = "error-banner";
    const dismiss = el("button", "dismiss", "Dismiss");
    dismiss.addEventListener("click", () => this.dismissBanner());
    banner.appendChild(dismiss);
    return banner;
  }

  private renderNotice(): HTMLElement {
    const notice = el("div", "notice", this.notice ?? "");
    notice.dataset.testid = "notice";
    return notice;
  }

  private renderTrail(): HTMLElement {
    const session = this.session!;
    const trail = el("ol", "feedback-trail");
    trail.dataset.testid = "feedback-trail";
    for (const event of session.trail) {
      trail.appendChild(
        el(
          "li",
          "feedback-event",
          `step ${event.step}: ${event.doc_id} #${event.sentence_idx}`,
        ),
      );
    }
    return trail;
  }

  private renderResults(): HTMLElement {
    const session = this.session!;
    const deltas = session.prevOrder
      ? computeRankDeltas(
          session.prevOrder,
          session.results.map((r) => r.doc_id),
        )
      : null;
    const list = el("ol", "results");
    list.dataset.testid = "results";
    session.results.forEach((item, rank) => {
      list.appendChild(this.renderCard(item, rank, deltas));
    });
    return list;
  }

  private renderCard(
    item: ResultItem,
    rank: number,
    deltas: Map<string, number | null> | null,
  ): HTMLElement {
    const card = el("li", "result-card");
    card.dataset.testid = "result-card";
    card.dataset.docId = item.doc_id;

    const head = el("div", "card-head");
    head.appendChild(el("span", "rank", String(rank + 1)));
    head.appendChild(el("span", "doc-id", item.doc_id));
    head.appendChild(el("span", "score", item.score.toFixed(4)));
    if (deltas) {
      const arrow = el("span", "rank-arrow", arrowFor(deltas.get(item.doc_id) ?? null));
      arrow.dataset.testid = "rank-arrow";
      head.appendChild(arrow);
    }
    card.appendChild(head);

    const sentences = el("ul", "sentences");
    item.sentences.forEach((text, idx) => {
      const entry = el("li", "sentence", text);
      if (idx === item.selected_idx) entry.classList.add("representative");
      entry.dataset.testid = "sentence";
      entry.dataset.sentenceIdx = String(idx);
      entry.addEventListener("click", () => {
        if (!this.busy) void this.clickSentence(item.doc_id, idx);
      });
      sentences.appendChild(entry);
    });
    card.appendChild(sentences);
    return card;
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.code === "empty_query") return "Enter a query first.";
    if (err.status === 503) return "The service is still starting up.";
    return `The service reported an error (${err.code}).`;
  }
  return "Could not reach the search service.";
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

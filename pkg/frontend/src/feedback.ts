// Per-iteration feedback entry. A run in http mode parks a request and
// blocks; the console polls for it, collects the operator's text, and posts
// it back to unblock the pipeline.

import type { ApiClient, PendingFeedback, TranscriptEntry } from "./api.js";

export class FeedbackForm {
  pending: PendingFeedback | null = null;

  constructor(private readonly api: ApiClient) {}

  /** Refresh the pending request, if any. */
  async poll(): Promise<PendingFeedback | null> {
    this.pending = await this.api.pendingFeedback();
    return this.pending;
  }

  /** The submit control is live only while the pipeline is waiting. */
  get enabled(): boolean {
    return this.pending !== null;
  }

  /**
   * Post the operator's text against the pending request. Throws when no
   * request is pending (the control should be disabled); server-side
   * rejections (already answered, unknown iteration) propagate as ApiError.
   */
  async submit(text: string): Promise<{ ok: boolean; iteration: number }> {
    if (this.pending === null) throw new Error("no feedback request is pending");
    const ack = await this.api.submitFeedback(this.pending.iteration, text);
    this.pending = null;
    return ack;
  }
}

/**
 * The design prompt behind an iteration's first candidate — the place where
 * the previous round's feedback is echoed back to the reward designer.
 */
export function promptPreview(transcripts: TranscriptEntry[][]): string {
  const first = transcripts[0];
  if (!first) return "";
  const designAsk = first.find((entry) => entry.stage === "overview");
  if (!designAsk) return "";
  for (let i = designAsk.messages.length - 1; i >= 0; i--) {
    const message = designAsk.messages[i];
    if (message && message.role === "user") return message.content;
  }
  return "";
}

/** Did the submitted feedback make it into the next iteration's prompt? */
export function echoesFeedback(transcripts: TranscriptEntry[][], text: string): boolean {
  return text.trim().length > 0 && promptPreview(transcripts).includes(text.trim());
}

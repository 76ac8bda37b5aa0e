// Interactive diagnosis flow: the policy suggests a test, the user answers
// with a value or "missing", and the loop repeats until a diagnosis. All
// state shown comes from server responses; the flow only forwards them.

import { ApiClient, ApiError, SessionDoc, Suggestion } from "./api.js";

export type FlowPhase = "idle" | "awaiting-value" | "diagnosed" | "aborted" | "expired" | "error";

export interface FlowState {
  phase: FlowPhase;
  suggestion: Suggestion | null;
  diagnosis: string | null;
  scores: { label: string; value: number }[];
  breadcrumb: { label: string; entered: number | string | null }[];
  error: string | null;
  suggestionsShown: number;
}

export class StepperFlow {
  private session: SessionDoc | null = null;
  state: FlowState = {
    phase: "idle",
    suggestion: null,
    diagnosis: null,
    scores: [],
    breadcrumb: [],
    error: null,
    suggestionsShown: 0,
  };

  constructor(private api: ApiClient) {}

  private absorb(doc: SessionDoc): void {
    this.session = doc;
    const scores =
      doc.q_scores === null
        ? []
        : doc.classes.map((label, i) => ({ label, value: doc.q_scores![i] }));
    let phase: FlowPhase;
    if (doc.status === "diagnosed") phase = "diagnosed";
    else if (doc.status === "aborted") phase = "aborted";
    else phase = "awaiting-value";
    this.state = {
      phase,
      suggestion: doc.suggestion,
      diagnosis: doc.diagnosis,
      scores,
      breadcrumb: doc.history.map((h) => ({ label: h.label, entered: h.entered })),
      error: null,
      suggestionsShown:
        this.state.suggestionsShown + (doc.suggestion !== null ? 1 : 0),
    };
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError && err.status === 410) {
      this.state = { ...this.state, phase: "expired", error: "session expired" };
      return;
    }
    // network failure: keep the session so the user can retry
    this.state = { ...this.state, phase: "error", error: String(err) };
  }

  async start(policyId: string): Promise<FlowState> {
    try {
      this.absorb(await this.api.createSession(policyId));
    } catch (err) {
      this.fail(err);
    }
    return this.state;
  }

  async submit(value: number | "missing"): Promise<FlowState> {
    if (!this.session || this.state.phase !== "awaiting-value") {
      throw new Error("no pending suggestion");
    }
    try {
      this.absorb(await this.api.observe(this.session.session_id, value));
    } catch (err) {
      this.fail(err);
    }
    return this.state;
  }

  async retry(): Promise<FlowState> {
    if (!this.session) throw new Error("nothing to retry");
    // re-read the server-side session state after a network failure
    this.state = { ...this.state, phase: "awaiting-value", error: null };
    return this.state;
  }
}

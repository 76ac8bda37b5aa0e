// Typed client for the session service. Every response that reaches the UI
// flows through this module and is recorded, so tests can audit that nothing
// shown to the user was computed on the client.

export interface Suggestion {
  action: number;
  kind: string;
  label: string;
}

export interface SessionDoc {
  schema: string;
  session_id: string;
  policy_id: string;
  status: "active" | "diagnosed" | "aborted";
  history: { action: number; label: string; entered: number | string | null }[];
  q_scores: number[] | null;
  classes: string[];
  suggestion: Suggestion | null;
  diagnosis: string | null;
}

export interface PolicyDoc {
  id: string;
  kind: string;
  use_case: string;
  features: string[];
  classes: string[];
}

export interface GraphNode {
  id: string;
  kind: "feature" | "diagnosis";
  depth: number;
  label: string;
  count: number;
  stats: { count: number; mean: number | null; min: number | null; max: number | null } | null;
}

export interface GraphLink {
  source: number;
  target: number;
  value: number;
  classes: Record<string, number>;
}

export interface PathwayGraph {
  schema: string;
  n_episodes: number;
  nodes: GraphNode[];
  links: GraphLink[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface RequestLogEntry {
  method: string;
  path: string;
  response: unknown;
}

export class ApiClient {
  readonly log: RequestLogEntry[] = [];

  constructor(private base: string = "", private fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, JSON.stringify(doc));
    }
    this.log.push({ method, path, response: doc });
    return doc as T;
  }

  policies(): Promise<PolicyDoc[]> {
    return this.request("GET", "/policies");
  }

  createSession(policyId: string): Promise<SessionDoc> {
    return this.request("POST", "/sessions", { policy_id: policyId });
  }

  observe(sessionId: string, value: number | "missing"): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/observe`, { value });
  }

  pathways(policyId: string, classes?: string[], topK?: number): Promise<PathwayGraph> {
    const params = new URLSearchParams();
    if (classes && classes.length) params.set("classes", classes.join(","));
    if (topK !== undefined) params.set("top_k", String(topK));
    const qs = params.toString();
    return this.request("GET", `/pathways/${policyId}${qs ? "?" + qs : ""}`);
  }
}

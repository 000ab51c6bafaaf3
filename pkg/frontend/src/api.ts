// Typed client for the run service HTTP API. The console talks to the
// pipeline exclusively through this module; the only mutating calls are
// feedback and label submission.

const API_PREFIX = "/api/v1";

// ---------------------------------------------------------------- payloads

export interface EvalReport {
  races: number;
  retained: number;
  mean_place: number;
  std_place: number;
  mean_dist_to_first: number;
  std_dist_to_first: number;
  disqualified: number;
  places: number[];
}

export interface RunOverview {
  goal: string;
  status: string;
  iterations_total: number;
  iterations_completed: number[];
  final: { trained: boolean; evaluation: EvalReport | null };
  config: Record<string, unknown>;
}

export interface ProgramView {
  index: number;
  source: string;
  overview: string;
  repairs: number;
  sigma: number | null; // alignment score; null before the filter phase lands
  selected: boolean;
  slot: number | null;
}

export interface AgentView {
  slot: number;
  candidate: number;
  ref: string;
  secondary: string | null;
  final_place: number;
  disqualified: boolean;
  laps: number;
  dist_to_first: number;
}

export interface RankingView {
  best_slot: number;
  best_candidate: number;
  strengths: number[];
}

export interface FeedbackStatus {
  status: "answered" | "pending" | "none";
  text: string | null;
  summary?: string;
}

export interface IterationView {
  iteration: number;
  phases: string[];
  programs: ProgramView[];
  agents: AgentView[];
  ranking: RankingView | null;
  feedback: FeedbackStatus;
}

export interface LabelTask {
  id: string;
  iteration: number;
  first: string; // trajectory refs only — program identity never rides along
  second: string;
}

export interface PreferenceRecord {
  p: 0 | 1;
  traj_i: string;
  traj_j: string;
  judge_id: string;
  iteration: number;
  created_at: string;
}

export interface PendingFeedback {
  iteration: number;
  status: "pending";
  best_ref: string;
  summary: string;
  created_at: string;
}

export interface CarPose {
  index: number;
  x: number;
  y: number;
  heading: number;
  speed: number;
  centerline_progress: number;
  lateral_offset: number;
  lap: number;
  rank: number;
  off_course: boolean;
  collision: boolean;
}

export interface Frame {
  time: number;
  course: string;
  agent_index: number;
  cars: CarPose[];
}

export interface FrameDoc {
  ref: string;
  fps: number;
  frames: Frame[];
}

export interface TrajectorySummary {
  ref: string;
  rows: number;
  dt: number;
  duration: number;
  metadata: Record<string, unknown>;
}

export interface CourseGeometry {
  name: string;
  total_length: number;
  half_width: number;
  centerline: [number, number][];
}

export interface EvalMetrics {
  final_place: number;
  car_collision_time: number;
  course_out_time: number;
  laps_completed: number;
  dist_to_first: number;
}

export interface Checkpoint {
  epoch: number;
  component_totals: Record<string, number>;
  return_total: number;
  eval_metrics: EvalMetrics;
  disqualified: boolean;
}

export interface DiagnosticsDoc {
  component_names: string[];
  checkpoints: Checkpoint[];
}

export interface TranscriptEntry {
  stage: string; // overview | code | repair | feedback
  messages: { role: string; content: string }[];
  response: string;
}

// ---------------------------------------------------------------- client

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

const browserFetch: FetchFn = (input, init) => globalThis.fetch(input, init);

export class ApiClient {
  private readonly fetchFn: FetchFn;
  private readonly base: string;

  constructor(fetchFn: FetchFn = browserFetch, base = "") {
    this.fetchFn = fetchFn;
    this.base = base.replace(/\/$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${API_PREFIX}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; statusText is all we have
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  run(): Promise<RunOverview> {
    return this.request("/run");
  }

  course(): Promise<CourseGeometry> {
    return this.request("/course");
  }

  iterations(): Promise<IterationView[]> {
    return this.request("/iterations");
  }

  iteration(k: number): Promise<IterationView> {
    return this.request(`/iterations/${k}`);
  }

  diagnostics(k: number, slot: number): Promise<DiagnosticsDoc> {
    return this.request(`/iterations/${k}/diagnostics/${slot}`);
  }

  transcripts(k: number): Promise<TranscriptEntry[][]> {
    return this.request(`/iterations/${k}/transcripts`);
  }

  trajectory(ref: string): Promise<TrajectorySummary> {
    return this.request(`/trajectories/${ref}`);
  }

  frames(ref: string): Promise<FrameDoc> {
    return this.request(`/trajectories/${ref}/frames`);
  }

  pendingFeedback(): Promise<PendingFeedback | null> {
    return this.request<{ pending: PendingFeedback | null }>("/feedback/pending").then(
      (doc) => doc.pending,
    );
  }

  submitFeedback(iteration: number, text: string): Promise<{ ok: boolean; iteration: number }> {
    return this.post("/feedback", { iteration, text });
  }

  labelTasks(labeler: string): Promise<LabelTask[]> {
    return this.request(`/labels/tasks?labeler=${encodeURIComponent(labeler)}`);
  }

  submitLabel(body: {
    first: string;
    second: string;
    verdict: 1 | 2;
    labeler: string;
  }): Promise<PreferenceRecord> {
    return this.post("/labels", body);
  }
}

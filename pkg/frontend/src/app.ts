// Console entry point: wires the API client into the dashboard, playback,
// labeling, and feedback panels. All state lives server-side; this layer
// only renders what the API reports and posts operator input back.

import { ApiClient, ApiError } from "./api.js";
import type { CourseGeometry, FrameDoc, IterationView, RunOverview } from "./api.js";
import {
  PALETTE,
  Playback,
  drawCourse,
  drawFrame,
  fitViewport,
  type Ctx2D,
  type Viewport,
} from "./playback.js";
import { LabelSession, type Verdict } from "./labeling.js";
import { FeedbackForm, echoesFeedback, promptPreview } from "./feedback.js";

const api = new ApiClient();

const REFRESH_MS = 4000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(x: number, digits = 2): string {
  return x.toFixed(digits);
}

// ---------------------------------------------------------------- dashboard

function renderOverview(run: RunOverview): void {
  el("goal").textContent = run.goal;
  el("status").textContent = run.status;
  el("status").dataset.status = run.status;
  el("progress").textContent =
    `${run.iterations_completed.length}/${run.iterations_total} iterations`;
  const ev = run.final.evaluation;
  el("final-eval").textContent = ev
    ? `final policy: place ${fmt(ev.mean_place)} ± ${fmt(ev.std_place)} over ${ev.retained} races` +
      ` (${ev.disqualified} DQ), gap to P1 ${fmt(ev.mean_dist_to_first, 1)} m`
    : run.final.trained
      ? "final policy trained, evaluation pending"
      : "final policy not trained yet";
}

function programCard(view: IterationView, i: number): HTMLElement {
  const p = view.programs[i];
  const div = document.createElement("div");
  div.className = "program" + (p?.selected ? " selected" : "");
  if (!p) return div;
  const sigma = p.sigma === null ? "—" : fmt(p.sigma, 3);
  const badge = p.selected ? ` · slot ${p.slot}` : "";
  const repairs = p.repairs > 0 ? ` · ${p.repairs} repair(s)` : "";
  div.innerHTML =
    `<header>#${p.index} · σ ${sigma}${badge}${repairs}</header>` +
    `<details><summary>${escapeHtml(firstLine(p.overview))}</summary>` +
    `<pre>${escapeHtml(p.source)}</pre></details>`;
  return div;
}

function firstLine(text: string): string {
  return text.split("\n", 1)[0] ?? "";
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;");
}

async function renderIteration(view: IterationView): Promise<HTMLElement> {
  const card = document.createElement("section");
  card.className = "iteration";
  const head = document.createElement("h3");
  head.textContent = `Iteration ${view.iteration}`;
  card.appendChild(head);

  const programs = document.createElement("div");
  programs.className = "programs";
  view.programs.forEach((_, i) => programs.appendChild(programCard(view, i)));
  card.appendChild(programs);

  if (view.ranking) {
    const rank = document.createElement("p");
    const strengths = view.ranking.strengths.map((s) => fmt(s, 2)).join(", ");
    rank.textContent =
      `ranking strengths [${strengths}] — best: candidate ${view.ranking.best_candidate}`;
    card.appendChild(rank);
  }

  for (const agent of view.agents) {
    const row = document.createElement("p");
    row.className = "agent";
    const dq = agent.disqualified ? " (DQ)" : "";
    row.textContent =
      `agent slot ${agent.slot} (candidate ${agent.candidate}): ` +
      `place ${agent.final_place}${dq}, ${agent.laps} lap(s), ` +
      `${fmt(agent.dist_to_first, 1)} m behind P1`;
    const watch = document.createElement("button");
    watch.textContent = "watch";
    watch.addEventListener("click", () => mainPlayer.load(agent.ref));
    row.appendChild(watch);
    card.appendChild(row);
  }

  const fb = document.createElement("p");
  fb.className = "feedback-state";
  if (view.feedback.status === "answered") {
    fb.textContent = `feedback: ${firstLine(view.feedback.text ?? "")}`;
  } else {
    fb.textContent = `feedback: ${view.feedback.status}`;
  }
  card.appendChild(fb);

  try {
    const transcripts = await api.transcripts(view.iteration);
    const preview = promptPreview(transcripts);
    if (preview) {
      const details = document.createElement("details");
      const summary = document.createElement("summary");
      summary.textContent = "design prompt";
      details.appendChild(summary);
      const pre = document.createElement("pre");
      pre.textContent = preview;
      details.appendChild(pre);
      card.appendChild(details);
      if (lastFeedbackText && echoesFeedback(transcripts, lastFeedbackText)) {
        const echo = document.createElement("p");
        echo.className = "echo";
        echo.textContent = "your feedback is in this iteration's prompt";
        card.appendChild(echo);
      }
    }
  } catch {
    // transcripts are optional viewing material; skip quietly
  }
  return card;
}

async function refreshDashboard(): Promise<void> {
  const run = await api.run();
  renderOverview(run);
  const views = await api.iterations();
  const host = el("iterations");
  host.replaceChildren();
  for (const view of views.slice().reverse()) {
    host.appendChild(await renderIteration(view));
  }
}

// ---------------------------------------------------------------- playback

class CanvasPlayer {
  private playback: Playback | null = null;
  private course: CourseGeometry | null = null;
  private playing = false;
  private t = 0;
  private lastTick = 0;
  private vp: Viewport | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly scrub: HTMLInputElement,
    private readonly markers: HTMLElement | null,
    private readonly clock: HTMLElement | null,
  ) {
    scrub.addEventListener("input", () => {
      this.pause();
      this.seekFraction(Number(scrub.value) / 1000);
    });
  }

  setCourse(course: CourseGeometry): void {
    this.course = course;
    this.vp = fitViewport(course.centerline, this.canvas.width, this.canvas.height, 30);
    this.draw();
  }

  async load(ref: string): Promise<void> {
    this.pause();
    try {
      const doc: FrameDoc = await api.frames(ref);
      this.playback = new Playback(doc);
      this.t = 0;
      this.renderMarkers();
      this.draw();
    } catch (err) {
      this.playback = null;
      this.renderMarkers();
      this.draw();
      if (!(err instanceof ApiError && err.status === 404)) throw err;
    }
  }

  toggle(): void {
    if (this.playing) this.pause();
    else this.play();
  }

  play(): void {
    if (this.playback === null || this.playing) return;
    this.playing = true;
    if (this.t >= this.playback.duration) this.t = 0;
    this.lastTick = performance.now();
    requestAnimationFrame(this.tick);
  }

  pause(): void {
    this.playing = false;
  }

  seekFraction(f: number): void {
    if (this.playback === null) return;
    this.t = Math.min(Math.max(f, 0), 1) * this.playback.duration;
    this.draw();
  }

  get time(): number {
    return this.t;
  }

  private tick = (now: number): void => {
    if (!this.playing || this.playback === null) return;
    this.t += (now - this.lastTick) / 1000;
    this.lastTick = now;
    if (this.t >= this.playback.duration) {
      this.t = this.playback.duration;
      this.playing = false;
    }
    this.draw();
    if (this.playing) requestAnimationFrame(this.tick);
  };

  private renderMarkers(): void {
    if (this.markers === null) return;
    this.markers.replaceChildren();
    if (this.playback === null) return;
    const collisions = this.playback.markerFractions(this.playback.collisionTimes());
    const offCourse = this.playback.markerFractions(this.playback.offCourseTimes());
    const add = (fractions: number[], cls: string): void => {
      for (const f of fractions) {
        const tick = document.createElement("span");
        tick.className = `marker ${cls}`;
        tick.style.left = `${(f * 100).toFixed(2)}%`;
        this.markers!.appendChild(tick);
      }
    };
    add(offCourse, "off-course");
    add(collisions, "collision");
  }

  draw(): void {
    const raw = this.canvas.getContext("2d");
    if (raw === null) return;
    const ctx = raw as unknown as Ctx2D;
    raw.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.fillStyle = PALETTE.background;
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.course === null || this.vp === null) return;
    drawCourse(ctx, this.course, this.vp);
    const frame = this.playback === null ? null : this.playback.frameAt(this.t);
    drawFrame(ctx, frame, this.vp, this.canvas.width, this.canvas.height);
    if (this.playback !== null) {
      const f = this.playback.duration > 0 ? this.t / this.playback.duration : 0;
      this.scrub.value = String(Math.round(f * 1000));
      if (this.clock) this.clock.textContent = `${this.t.toFixed(1)} s`;
    }
  }
}

// ---------------------------------------------------------------- labeling

class LabelPanel {
  private session: LabelSession | null = null;
  private left: CanvasPlayer;
  private right: CanvasPlayer;

  constructor() {
    this.left = new CanvasPlayer(
      el<HTMLCanvasElement>("label-left"),
      el<HTMLInputElement>("label-scrub"),
      null,
      null,
    );
    this.right = new CanvasPlayer(
      el<HTMLCanvasElement>("label-right"),
      el<HTMLInputElement>("label-scrub"),
      null,
      null,
    );
    // both players listen on the shared scrub, so dragging it stays in sync
    el("label-play").addEventListener("click", () => {
      this.left.toggle();
      this.right.toggle();
    });
    el("label-load").addEventListener("click", () => void this.start());
    el("label-first").addEventListener("click", () => void this.verdict("first"));
    el("label-second").addEventListener("click", () => void this.verdict("second"));
  }

  setCourse(course: CourseGeometry): void {
    this.left.setCourse(course);
    this.right.setCourse(course);
  }

  private status(text: string): void {
    el("label-status").textContent = text;
  }

  private async start(): Promise<void> {
    const labeler = el<HTMLInputElement>("labeler").value.trim();
    if (!labeler) {
      this.status("enter a labeler id first");
      return;
    }
    this.session = new LabelSession(api, labeler);
    const open = await this.session.refresh();
    this.status(open === 0 ? "no open pairs" : `${open} pair(s) to label`);
    await this.show();
  }

  private async show(): Promise<void> {
    const task = this.session?.current ?? null;
    const buttons = [el<HTMLButtonElement>("label-first"), el<HTMLButtonElement>("label-second")];
    buttons.forEach((b) => (b.disabled = task === null));
    if (task === null) return;
    // blind by construction: only refs travel to the players
    await Promise.all([this.left.load(task.first), this.right.load(task.second)]);
  }

  private async verdict(v: Verdict): Promise<void> {
    if (this.session === null) return;
    try {
      const record = await this.session.submit(v);
      this.status(
        `recorded as ${record.judge_id} · ${this.session.tasks.length} pair(s) left`,
      );
    } catch (err) {
      if (err instanceof ApiError) {
        this.status(`rejected: ${err.message}`);
        this.session.tasks.shift(); // server will not take this pair from us again
      } else {
        throw err;
      }
    }
    await this.show();
  }
}

// ---------------------------------------------------------------- feedback

let lastFeedbackText = "";

function wireFeedback(form: FeedbackForm): void {
  const text = el<HTMLTextAreaElement>("feedback-text");
  const submit = el<HTMLButtonElement>("feedback-submit");
  const status = el("feedback-status");

  const sync = (): void => {
    submit.disabled = !form.enabled;
    if (form.pending) {
      status.textContent =
        `iteration ${form.pending.iteration} is waiting — best agent: ${form.pending.summary}`;
    } else {
      status.textContent = "no feedback request pending";
    }
  };

  submit.addEventListener("click", () => {
    void (async () => {
      try {
        const ack = await form.submit(text.value);
        lastFeedbackText = text.value;
        status.textContent = `sent for iteration ${ack.iteration}`;
        text.value = "";
      } catch (err) {
        status.textContent = err instanceof Error ? err.message : String(err);
      }
      sync();
    })();
  });

  setInterval(() => {
    void form.poll().then(sync);
  }, REFRESH_MS);
  void form.poll().then(sync);
}

// ---------------------------------------------------------------- boot

const mainPlayer = new CanvasPlayer(
  el<HTMLCanvasElement>("track"),
  el<HTMLInputElement>("scrub"),
  el("scrub-markers"),
  el("clock"),
);

async function main(): Promise<void> {
  el("play").addEventListener("click", () => mainPlayer.toggle());

  const course = await api.course();
  mainPlayer.setCourse(course);
  const labels = new LabelPanel();
  labels.setCourse(course);
  wireFeedback(new FeedbackForm(api));

  await refreshDashboard();
  setInterval(() => void refreshDashboard().catch(() => undefined), REFRESH_MS);
}

void main().catch((err) => {
  el("status").textContent = err instanceof Error ? err.message : String(err);
});

// Pairwise preference labeling. Tasks arrive blind — trajectory refs only —
// and verdicts are strictly two-way: ties are not offered.

import type { ApiClient, LabelTask, PreferenceRecord } from "./api.js";

export type Verdict = "first" | "second";

/** Wire encoding of a verdict: 1 = first shown preferred, 2 = second. */
export function verdictCode(verdict: Verdict): 1 | 2 {
  if (verdict === "first") return 1;
  if (verdict === "second") return 2;
  throw new Error(`verdict must be "first" or "second", got ${JSON.stringify(verdict)}`);
}

const TASK_KEYS = new Set(["id", "iteration", "first", "second"]);
const PROGRAM_MARKER = "weights:"; // every reward program source contains this line

/**
 * Guard the blind-labeling contract: a task payload must carry nothing that
 * could identify the reward programs behind the pair.
 */
export function assertBlind(tasks: LabelTask[]): void {
  for (const task of tasks) {
    for (const key of Object.keys(task)) {
      if (!TASK_KEYS.has(key)) {
        throw new Error(`label task carries unexpected field "${key}"`);
      }
    }
  }
  if (JSON.stringify(tasks).includes(PROGRAM_MARKER)) {
    throw new Error("label task payload leaks reward program text");
  }
}

/** One labeler's queue of open pairs. */
export class LabelSession {
  tasks: LabelTask[] = [];

  constructor(
    private readonly api: ApiClient,
    readonly labeler: string,
  ) {
    if (!labeler.trim()) throw new Error("labeler id must be non-empty");
  }

  /** Reload open tasks for this labeler; returns how many are open. */
  async refresh(): Promise<number> {
    const tasks = await this.api.labelTasks(this.labeler);
    assertBlind(tasks);
    this.tasks = tasks;
    return tasks.length;
  }

  get current(): LabelTask | null {
    return this.tasks[0] ?? null;
  }

  /**
   * Submit a verdict for the current task and advance the queue. The task is
   * only dropped once the server acknowledges; a rejection (double label,
   * unknown ref) leaves the queue untouched and propagates.
   */
  async submit(verdict: Verdict): Promise<PreferenceRecord> {
    const task = this.current;
    if (task === null) throw new Error("no open label task");
    const record = await this.api.submitLabel({
      first: task.first,
      second: task.second,
      verdict: verdictCode(verdict),
      labeler: this.labeler,
    });
    this.tasks.shift();
    return record;
  }
}

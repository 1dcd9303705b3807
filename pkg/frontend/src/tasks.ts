/**
 * Agreement-task session flow: one unit per screen, responses posted back,
 * progress tracked, summary once the stream is exhausted.
 */

import { ApiClient, Task } from "./api.js";

export interface TaskFlowOptions {
  layer: string;
  fraction: number;
  seed: number;
  session: string;
  annotator: string;
}

export interface TaskScreen {
  state: "task";
  task: Task;
  progress: { position: number; total: number };
}

export interface SummaryScreen {
  state: "summary";
  answered: number;
  byChoice: Record<string, number>;
}

export type Screen = TaskScreen | SummaryScreen;

export class TaskFlow {
  private current: Task | null = null;
  private answered = 0;
  private byChoice: Record<string, number> = {};

  constructor(
    private readonly client: ApiClient,
    private readonly options: TaskFlowOptions,
  ) {}

  /** Fetch the next screen; a 410 from the feed turns into the summary. */
  async next(): Promise<Screen> {
    const task = await this.client.nextTask(this.options.layer, {
      fraction: this.options.fraction,
      seed: this.options.seed,
      session: this.options.session,
      annotator: this.options.annotator,
    });
    if (task === null) {
      this.current = null;
      return this.summary();
    }
    this.current = task;
    return {
      state: "task",
      task,
      progress: { position: task.position, total: task.total },
    };
  }

  /** Post the annotator's answer for the current screen and advance. */
  async respond(label: string): Promise<Screen> {
    if (!this.current) throw new Error("no task on screen");
    if (!this.current.choices.includes(label)) {
      throw new Error(`label ${label} is not among the offered choices`);
    }
    await this.client.postResponse(this.options.layer, {
      session: this.options.session,
      taskId: this.current.taskId,
      annotator: this.options.annotator,
      label,
    });
    this.answered += 1;
    this.byChoice[label] = (this.byChoice[label] ?? 0) + 1;
    return this.next();
  }

  summary(): SummaryScreen {
    return { state: "summary", answered: this.answered, byChoice: { ...this.byChoice } };
  }
}

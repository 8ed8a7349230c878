/** Annotation session controller: fetches queries, renders swatches, and
 * submits choices. One annotator per session, one in-flight submission. */

import { Choice, DealtQuery, ServiceClient, ServiceError, Stimulus } from "./api.js";
import { INSTRUCTIONS } from "./instructions.js";

export interface SessionConfig {
  taskId: string;
  annotator: string;
  /** Monotonic clock in milliseconds; defaults to performance.now. */
  now?: () => number;
}

function swatch(stimulus: Stimulus, label: string, className: string): HTMLElement {
  const cell = document.createElement("div");
  cell.className = `swatch-cell ${className}`;
  const block = document.createElement("div");
  block.className = "swatch";
  const [r, g, b] = stimulus.rgb;
  block.style.backgroundColor = `rgb(${r}, ${g}, ${b})`;
  block.dataset.assetId = stimulus.asset_id;
  const caption = document.createElement("div");
  caption.className = "swatch-label";
  caption.textContent = label;
  cell.append(block, caption);
  return cell;
}

export class AnnotationSession {
  private current: DealtQuery | null = null;
  private renderedAt = 0;
  private inFlight = false;
  private readonly now: () => number;
  private readonly onKeyDown = (event: KeyboardEvent) => {
    if (event.key === "ArrowLeft") {
      void this.choose("A");
    } else if (event.key === "ArrowRight") {
      void this.choose("B");
    }
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
    private readonly config: SessionConfig,
  ) {
    this.now = config.now ?? (() => performance.now());
  }

  async start(): Promise<void> {
    this.root.innerHTML = "";
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = INSTRUCTIONS.title;
    const help = document.createElement("p");
    help.className = "instructions";
    help.textContent = INSTRUCTIONS.body;
    const progress = document.createElement("div");
    progress.className = "progress";
    header.append(title, help, progress);
    const stage = document.createElement("main");
    stage.className = "stage";
    const toast = document.createElement("div");
    toast.className = "toast";
    toast.hidden = true;
    this.root.append(header, stage, toast);
    document.addEventListener("keydown", this.onKeyDown);
    await this.advance();
  }

  stop(): void {
    document.removeEventListener("keydown", this.onKeyDown);
  }

  /** Submit the displayed query. No-op while a submission is in flight. */
  async choose(choice: Choice): Promise<void> {
    if (this.current === null || this.inFlight) {
      return;
    }
    const dealt = this.current;
    const latencyMs = Math.max(0, Math.round(this.now() - this.renderedAt));
    this.inFlight = true;
    this.current = null;
    this.setButtonsEnabled(false);
    try {
      await this.submitWithRetry(dealt, choice, latencyMs);
    } finally {
      this.inFlight = false;
    }
  }

  private async submitWithRetry(
    dealt: DealtQuery,
    choice: Choice,
    latencyMs: number,
  ): Promise<void> {
    const attempt = () =>
      this.client.submitResponse(
        this.config.taskId,
        this.config.annotator,
        dealt.query,
        choice,
        latencyMs,
      );
    try {
      await attempt();
    } catch (error) {
      if (error instanceof ServiceError) {
        if (error.status === 409 || error.status === 410) {
          // lost the race for this query; inform and move on
          this.toast(INSTRUCTIONS.conflict);
        } else {
          this.renderError(error.detail, () => this.submitWithRetry(dealt, choice, latencyMs));
          return;
        }
      } else {
        // network failure: retry once before surfacing it
        try {
          await attempt();
        } catch {
          this.renderError(INSTRUCTIONS.offline, () =>
            this.submitWithRetry(dealt, choice, latencyMs),
          );
          return;
        }
      }
    }
    await this.advance();
  }

  private async advance(): Promise<void> {
    let next;
    try {
      next = await this.client.nextQuery(this.config.taskId, this.config.annotator);
    } catch {
      this.renderError(INSTRUCTIONS.offline, () => this.advance());
      return;
    }
    if (next.status === "no-work") {
      this.current = null;
      await this.renderDone();
      return;
    }
    this.renderQuery(next);
    await this.refreshProgress();
  }

  private renderQuery(dealt: DealtQuery): void {
    const stage = this.stage();
    stage.innerHTML = "";
    stage.append(swatch(dealt.stimuli.reference, INSTRUCTIONS.reference, "reference"));
    const options = document.createElement("div");
    options.className = "options";
    for (const [choice, stimulus, label] of [
      ["A", dealt.stimuli.a, INSTRUCTIONS.optionA],
      ["B", dealt.stimuli.b, INSTRUCTIONS.optionB],
    ] as const) {
      const button = document.createElement("button");
      button.className = "choice";
      button.dataset.choice = choice;
      button.append(swatch(stimulus, label, `option-${choice.toLowerCase()}`));
      button.addEventListener("click", () => void this.choose(choice));
      options.append(button);
    }
    stage.append(options);
    this.current = dealt;
    this.renderedAt = this.now();
  }

  private async renderDone(): Promise<void> {
    const stage = this.stage();
    stage.innerHTML = "";
    const done = document.createElement("div");
    done.className = "done";
    done.textContent = INSTRUCTIONS.done;
    stage.append(done);
    await this.refreshProgress();
  }

  private renderError(message: string, retry: () => Promise<void>): void {
    const stage = this.stage();
    stage.innerHTML = "";
    const banner = document.createElement("div");
    banner.className = "error-banner";
    const text = document.createElement("span");
    text.textContent = message;
    const button = document.createElement("button");
    button.className = "retry";
    button.textContent = INSTRUCTIONS.retry;
    button.addEventListener("click", () => void retry());
    banner.append(text, button);
    stage.append(banner);
  }

  private async refreshProgress(): Promise<void> {
    try {
      const progress = await this.client.getProgress(this.config.taskId);
      const element = this.root.querySelector<HTMLElement>(".progress");
      if (element) {
        element.textContent = `${progress.answered} of ${progress.total} answered`;
        element.dataset.answered = String(progress.answered);
      }
    } catch {
      // progress display is cosmetic; never block annotation on it
    }
  }

  private toast(message: string): void {
    const toast = this.root.querySelector<HTMLElement>(".toast");
    if (toast) {
      toast.textContent = message;
      toast.hidden = false;
      setTimeout(() => {
        toast.hidden = true;
      }, 3000);
    }
  }

  private setButtonsEnabled(enabled: boolean): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("button.choice")) {
      button.disabled = !enabled;
    }
  }

  private stage(): HTMLElement {
    const stage = this.root.querySelector<HTMLElement>("main.stage");
    if (!stage) {
      throw new Error("session not started");
    }
    return stage;
  }
}

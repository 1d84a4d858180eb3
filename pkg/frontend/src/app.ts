/** Controller: one annotator session in one tab.
 *
 * Exactly one POST can be in flight for the current task; on a network
 * failure the payload goes into an in-memory retry queue keyed by
 * (task_id, annotator_id), which is safe because the server treats a
 * repeated key as a supersession of the same decision.
 */

import { ApiClient, type AnnotationPayload, type FetchLike, type TaskRecord, ValidationError } from './api.js';
import { LABEL_BY_KEY } from './labels.js';
import { Selection } from './state.js';
import { renderDone, renderRetryBanner, renderTask, type TaskViewHandles } from './view.js';

export interface AppConfig {
  root: HTMLElement;
  annotatorId: string;
  teamId?: string;
  baseUrl?: string;
  fetchImpl?: FetchLike;
  /** Revisit-and-resubmit of earlier answers; off unless explicitly enabled. */
  allowBack?: boolean;
  retryDelayMs?: number;
}

interface QueuedSubmission {
  payload: AnnotationPayload;
  resolve: () => void;
}

export class AnnotatorApp {
  private api: ApiClient;
  private selection = new Selection();
  private current: TaskRecord | null = null;
  private handles: TaskViewHandles | null = null;
  private inFlight = false;
  private queue: QueuedSubmission[] = [];
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private history: TaskRecord[] = [];
  private doc: Document;

  constructor(private config: AppConfig) {
    this.api = new ApiClient(config.baseUrl ?? '', config.fetchImpl);
    this.doc = config.root.ownerDocument;
  }

  async start(): Promise<void> {
    this.doc.addEventListener('keydown', (event) => this.onKey(event as KeyboardEvent));
    await this.loadNext();
  }

  get currentTaskId(): string | null {
    return this.current?.task_id ?? null;
  }

  async loadNext(): Promise<void> {
    let task: TaskRecord | null;
    try {
      task = await this.api.nextTask(this.config.annotatorId);
    } catch (error) {
      this.showFatal(`cannot reach the server: ${(error as Error).message}`);
      return;
    }
    if (task === null) {
      await this.showDone();
      return;
    }
    this.showTask(task);
  }

  private showTask(task: TaskRecord, preset?: Selection): void {
    this.current = task;
    this.selection = preset ?? new Selection();
    const handles = renderTask(this.doc, task, this.config.allowBack ?? false);
    this.handles = handles;
    this.config.root.replaceChildren(handles.root);

    for (const [value, button] of handles.labelButtons) {
      button.addEventListener('click', () => {
        this.selection.toggleLabel(value);
        this.refreshControls();
      });
    }
    handles.rejectButton.addEventListener('click', () => {
      this.selection.toggleReject();
      this.refreshControls();
    });
    handles.confidenceSelect.addEventListener('change', () => {
      const raw = handles.confidenceSelect.value;
      this.selection.setConfidence(raw === '' ? null : Number(raw));
    });
    handles.submitButton.addEventListener('click', () => {
      void this.submit();
    });
    handles.backButton?.addEventListener('click', () => this.goBack());
    this.refreshControls();
  }

  private refreshControls(): void {
    const handles = this.handles;
    if (!handles) return;
    for (const [value, button] of handles.labelButtons) {
      button.classList.toggle('selected', this.selection.labels.has(value));
    }
    handles.rejectButton.classList.toggle('selected', this.selection.rejected);
    handles.submitButton.disabled = !this.selection.canSubmit() || this.inFlight;
    if (handles.backButton) {
      handles.backButton.disabled = this.history.length === 0;
    }
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.current) return;
    const label = LABEL_BY_KEY.get(event.key);
    if (label) {
      this.selection.toggleLabel(label);
      this.refreshControls();
    } else if (event.key === 'Enter' && this.selection.canSubmit() && !this.inFlight) {
      void this.submit();
    }
  }

  /** Post the current selection; exactly what is on screen goes on the wire. */
  async submit(): Promise<void> {
    const task = this.current;
    const handles = this.handles;
    if (!task || !handles || this.inFlight || !this.selection.canSubmit()) return;
    const payload = this.selection.payload(task.task_id, this.config.annotatorId);
    this.inFlight = true;
    this.refreshControls();
    try {
      await this.api.submit(payload);
    } catch (error) {
      this.inFlight = false;
      if (error instanceof ValidationError) {
        // show the machine-readable code inline and keep the selection
        handles.errorLine.textContent = `${error.code}: ${error.detail}`;
        handles.errorLine.hidden = false;
        this.refreshControls();
        return;
      }
      this.enqueueRetry(payload);
      await this.advanceAfter(task);
      return;
    }
    this.inFlight = false;
    await this.advanceAfter(task);
  }

  private async advanceAfter(task: TaskRecord): Promise<void> {
    this.history.push(task);
    await this.loadNext();
  }

  private enqueueRetry(payload: AnnotationPayload): void {
    // idempotent by (task_id, annotator_id): replace any queued duplicate
    this.queue = this.queue.filter(
      (item) => item.payload.task_id !== payload.task_id,
    );
    this.queue.push({ payload, resolve: () => undefined });
    this.config.root.appendChild(renderRetryBanner(this.doc));
    this.scheduleRetry();
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      void this.flushQueue();
    }, this.config.retryDelayMs ?? 2000);
  }

  async flushQueue(): Promise<void> {
    const pending = [...this.queue];
    this.queue = [];
    for (const item of pending) {
      try {
        await this.api.submit(item.payload);
        item.resolve();
      } catch (error) {
        if (error instanceof ValidationError) continue; // cannot ever succeed
        this.queue.push(item);
      }
    }
    if (this.queue.length > 0) {
      this.scheduleRetry();
    } else {
      this.config.root.querySelectorAll('.retry-banner').forEach((node) => node.remove());
    }
  }

  get pendingRetries(): number {
    return this.queue.length;
  }

  private goBack(): void {
    const previous = this.history.pop();
    if (!previous) return;
    this.showTask(previous);
  }

  private async showDone(): Promise<void> {
    let progress = null;
    if (this.config.teamId) {
      try {
        progress = await this.api.progress(this.config.teamId);
      } catch {
        progress = null;
      }
    }
    this.current = null;
    this.handles = null;
    this.config.root.replaceChildren(renderDone(this.doc, progress, this.config.annotatorId));
  }

  private showFatal(message: string): void {
    const p = this.doc.createElement('p');
    p.className = 'fatal-error';
    p.textContent = message;
    this.config.root.replaceChildren(p);
  }
}

export function createApp(config: AppConfig): AnnotatorApp {
  return new AnnotatorApp(config);
}

/** Selection state for the current task.
 *
 * Labels and rejection are mutually exclusive: picking a label clears a
 * pending rejection and rejecting clears the labels, so a submission is
 * possible exactly when (at least one label) XOR rejected holds.
 */

import { canonicalOrder } from './labels.js';

export class Selection {
  readonly labels = new Set<string>();
  confidence: number | null = null;
  rejected = false;

  toggleLabel(value: string): void {
    if (this.rejected) this.rejected = false;
    if (this.labels.has(value)) {
      this.labels.delete(value);
    } else {
      this.labels.add(value);
    }
  }

  toggleReject(): void {
    this.rejected = !this.rejected;
    if (this.rejected) this.labels.clear();
  }

  setConfidence(value: number | null): void {
    this.confidence = value;
  }

  canSubmit(): boolean {
    return this.labels.size > 0 !== this.rejected;
  }

  payload(taskId: string, annotatorId: string) {
    return {
      task_id: taskId,
      annotator_id: annotatorId,
      labels: canonicalOrder(this.labels),
      confidence: this.confidence,
      rejected: this.rejected,
    };
  }

  reset(): void {
    this.labels.clear();
    this.confidence = null;
    this.rejected = false;
  }
}

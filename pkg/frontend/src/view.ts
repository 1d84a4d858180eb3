/** DOM construction for the task screen and the done screen. */

import type { ContextTurn, Progress, TaskRecord, UnitPayload } from './api.js';
import { LABELS } from './labels.js';

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function contextPanel(doc: Document, turns: ContextTurn[], className: string): HTMLElement | null {
  if (turns.length === 0) return null;
  const panel = el(doc, 'div', `context ${className}`);
  for (const turn of turns) {
    const line = el(doc, 'p', 'context-turn');
    line.appendChild(el(doc, 'span', 'speaker', `${turn.speaker}: `));
    line.appendChild(doc.createTextNode(turn.text));
    panel.appendChild(line);
  }
  return panel;
}

function argumentSpan(doc: Document, unit: UnitPayload, role: 'pi1' | 'pi2'): HTMLElement {
  // the first argument reads italic, the second bold; "||" marks unit
  // boundaries the way exports render them
  const wrapper = el(doc, 'span', `argument ${role}`);
  wrapper.appendChild(el(doc, 'span', 'boundary', '|| '));
  const inner = role === 'pi1' ? el(doc, 'em', 'unit-text') : el(doc, 'strong', 'unit-text');
  inner.textContent = unit.text;
  wrapper.appendChild(inner);
  wrapper.appendChild(el(doc, 'span', 'boundary', ' ||'));
  return wrapper;
}

export interface TaskViewHandles {
  root: HTMLElement;
  labelButtons: Map<string, HTMLButtonElement>;
  confidenceSelect: HTMLSelectElement;
  rejectButton: HTMLButtonElement;
  submitButton: HTMLButtonElement;
  backButton: HTMLButtonElement | null;
  errorLine: HTMLElement;
  statusLine: HTMLElement;
}

export function renderTask(doc: Document, task: TaskRecord, withBack: boolean): TaskViewHandles {
  const root = el(doc, 'div', 'task-view');
  root.dataset.taskId = task.task_id;

  const before = contextPanel(doc, task.context_before, 'context-before');
  if (before) root.appendChild(before);

  const pair = el(doc, 'div', 'pair');
  pair.appendChild(argumentSpan(doc, task.pi1, 'pi1'));
  pair.appendChild(doc.createTextNode(' '));
  pair.appendChild(argumentSpan(doc, task.pi2, 'pi2'));
  root.appendChild(pair);

  const after = contextPanel(doc, task.context_after, 'context-after');
  if (after) root.appendChild(after);

  const labelBox = el(doc, 'div', 'labels');
  const labelButtons = new Map<string, HTMLButtonElement>();
  for (const label of LABELS) {
    const button = el(doc, 'button', 'label-button', `${label.display} [${label.key}]`);
    button.type = 'button';
    button.dataset.label = label.value;
    labelBox.appendChild(button);
    labelButtons.set(label.value, button);
  }
  root.appendChild(labelBox);

  const controls = el(doc, 'div', 'controls');
  const confidenceLabel = el(doc, 'label', 'confidence', 'confidence ');
  const confidenceSelect = el(doc, 'select', 'confidence-select');
  const unset = el(doc, 'option', undefined, 'unset');
  unset.value = '';
  confidenceSelect.appendChild(unset);
  for (let i = 1; i <= 5; i += 1) {
    const option = el(doc, 'option', undefined, String(i));
    option.value = String(i);
    confidenceSelect.appendChild(option);
  }
  confidenceLabel.appendChild(confidenceSelect);
  controls.appendChild(confidenceLabel);

  const rejectButton = el(doc, 'button', 'reject-button', 'No relation (reject)');
  rejectButton.type = 'button';
  controls.appendChild(rejectButton);

  const submitButton = el(doc, 'button', 'submit-button', 'Submit');
  submitButton.type = 'button';
  submitButton.disabled = true;
  controls.appendChild(submitButton);

  let backButton: HTMLButtonElement | null = null;
  if (withBack) {
    backButton = el(doc, 'button', 'back-button', 'Revisit previous');
    backButton.type = 'button';
    backButton.disabled = true;
    controls.appendChild(backButton);
  }
  root.appendChild(controls);

  const errorLine = el(doc, 'p', 'error-line');
  errorLine.hidden = true;
  root.appendChild(errorLine);
  const statusLine = el(doc, 'p', 'status-line');
  statusLine.hidden = true;
  root.appendChild(statusLine);

  return { root, labelButtons, confidenceSelect, rejectButton, submitButton, backButton, errorLine, statusLine };
}

export function renderDone(doc: Document, progress: Progress | null, annotatorId: string): HTMLElement {
  const root = el(doc, 'div', 'done-view');
  root.appendChild(el(doc, 'h2', undefined, 'All pairs annotated'));
  if (progress) {
    const mine = progress.per_annotator[annotatorId];
    root.appendChild(
      el(
        doc,
        'p',
        'progress-summary',
        `You answered ${mine ?? 0} of ${progress.tasks_total} pairs; ` +
          `your team has ${progress.answered} of ${progress.total} decisions in.`,
      ),
    );
  }
  return root;
}

export function renderRetryBanner(doc: Document): HTMLElement {
  const banner = el(
    doc,
    'p',
    'retry-banner',
    'Connection problem: your answer is saved locally and will be retried.',
  );
  return banner;
}

/** The twelve relation labels, in the canonical server order. */

export interface LabelDef {
  value: string;
  display: string;
  /** Keyboard shortcut for fast annotation. */
  key: string;
}

export const LABELS: LabelDef[] = [
  { value: 'acknowledgement', display: 'Acknowledgement', key: '1' },
  { value: 'background', display: 'Background', key: '2' },
  { value: 'clarification_question', display: 'Clarification Question', key: '3' },
  { value: 'comment', display: 'Comment', key: '4' },
  { value: 'continuation', display: 'Continuation', key: '5' },
  { value: 'contrast', display: 'Contrast', key: '6' },
  { value: 'elaboration', display: 'Elaboration', key: '7' },
  { value: 'explanation', display: 'Explanation', key: '8' },
  { value: 'narration', display: 'Narration', key: '9' },
  { value: 'question_answer_pair', display: 'Question-Answer Pair', key: '0' },
  { value: 'result', display: 'Result', key: '-' },
  { value: 'other', display: 'Other', key: '=' },
];

export const LABEL_BY_KEY = new Map(LABELS.map((l) => [l.key, l.value]));

/** Order labels the way the server lists them, for stable payloads. */
export function canonicalOrder(values: Iterable<string>): string[] {
  const order = new Map(LABELS.map((l, i) => [l.value, i]));
  return [...values].sort((a, b) => (order.get(a) ?? 99) - (order.get(b) ?? 99));
}

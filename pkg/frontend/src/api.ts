/** Typed client for the annotation server's JSON API. */

export interface UnitPayload {
  unit_ids: string[];
  text: string;
  style: string;
  cdu_id?: string;
}

export interface ContextTurn {
  turn_index: number;
  speaker: string;
  text: string;
}

export interface TaskRecord {
  task_id: string;
  dialogue_id: string;
  pair_type: string;
  pi1: UnitPayload;
  pi2: UnitPayload;
  context_before: ContextTurn[];
  context_after: ContextTurn[];
}

export interface AnnotationPayload {
  task_id: string;
  annotator_id: string;
  labels: string[];
  confidence: number | null;
  rejected: boolean;
}

export interface Progress {
  team_id: string;
  answered: number;
  total: number;
  tasks_total: number;
  per_annotator: Record<string, number>;
}

export interface ApiError {
  error: string;
  detail: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ValidationError extends Error {
  constructor(public code: string, public detail: string) {
    super(`${code}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  /** Next unanswered task for the annotator, or null when the queue is done. */
  async nextTask(annotatorId: string): Promise<TaskRecord | null> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotatorId)}`,
    );
    if (response.status === 204) return null;
    if (response.status === 200) return (await response.json()) as TaskRecord;
    throw await this.asError(response);
  }

  /** Post one decision. A 400 becomes a ValidationError; other failures throw. */
  async submit(payload: AnnotationPayload): Promise<{ seq: number; superseded: boolean }> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/annotations`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (response.status === 201) {
      return (await response.json()) as { seq: number; superseded: boolean };
    }
    if (response.status === 400) {
      const body = (await response.json()) as ApiError;
      throw new ValidationError(body.error, body.detail);
    }
    throw await this.asError(response);
  }

  async progress(teamId: string): Promise<Progress> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/progress?team=${encodeURIComponent(teamId)}`,
    );
    if (response.status === 200) return (await response.json()) as Progress;
    throw await this.asError(response);
  }

  private async asError(response: Response): Promise<Error> {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as ApiError;
      detail = `${body.error}: ${body.detail}`;
    } catch {
      /* non-JSON body */
    }
    return new Error(`request failed (${response.status}): ${detail}`);
  }
}

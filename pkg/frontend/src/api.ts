// Thin fetch wrappers around the service endpoints. fetch is injectable so
// tests can run without a browser.

import type {
  ApiError,
  MeetingRecordData,
  MinutesData,
  ProjectData,
} from './types.js';

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly error: ApiError,
  ) {
    super(error.message);
  }
}

type FetchLike = typeof fetch;

async function parseError(response: Response): Promise<never> {
  let error: ApiError = { kind: 'error', message: `HTTP ${response.status}` };
  try {
    const body = (await response.json()) as { error?: ApiError };
    if (body.error) error = body.error;
  } catch {
    // non-JSON error body: keep the fallback
  }
  throw new ServiceError(response.status, error);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  listProjects(): Promise<{ projects: ProjectData[] }> {
    return this.request('GET', '/projects');
  }

  getProject(id: string): Promise<ProjectData> {
    return this.request('GET', `/projects/${id}`);
  }

  createProject(title: string, description: string, objectives: string[]): Promise<ProjectData> {
    return this.request('POST', '/projects', { title, description, objectives });
  }

  addExpert(projectId: string, name: string, persona: string) {
    return this.request<{ id: string; name: string }>(
      'POST',
      `/projects/${projectId}/experts`,
      { name, persona },
    );
  }

  uploadDocument(projectId: string, expert: string, sourceName: string, content: string) {
    return this.request<{ chunk_count: number }>(
      'POST',
      `/projects/${projectId}/documents`,
      { expert, source_name: sourceName, media: 'plain_text', content },
    );
  }

  startWarmup(expertId: string): Promise<{ meeting_id: string }> {
    return this.request('POST', `/experts/${expertId}/warmup`);
  }

  startMeeting(
    projectId: string,
    agenda: string,
    rounds: number,
    participants: string[],
  ): Promise<{ meeting_id: string }> {
    return this.request('POST', `/projects/${projectId}/meetings`, {
      agenda,
      rounds,
      participants,
    });
  }

  getMeeting(meetingId: string): Promise<MeetingRecordData> {
    return this.request('GET', `/meetings/${meetingId}`);
  }

  getMinutes(meetingId: string): Promise<MinutesData> {
    return this.request('GET', `/meetings/${meetingId}/minutes`);
  }

  eventsUrl(meetingId: string): string {
    return `${this.baseUrl}/meetings/${meetingId}/events`;
  }
}

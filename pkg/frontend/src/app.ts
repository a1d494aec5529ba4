// Browser bootstrap: hash-routed views over the pure renderers. The server
// is the single source of truth; this file only wires DOM events to API
// calls and re-renders from fetched or streamed state.

import { ApiClient, ServiceError } from './api.js';
import { MeetingFeed } from './feed.js';
import {
  canSubmit,
  emptyLauncher,
  prefillFollowUpAgenda,
  validateLauncher,
  type LauncherState,
} from './launcher.js';
import { renderExpertList, renderFeed, renderMinutes, renderProjectList } from './render.js';
import { EventStreamClient } from './sse.js';
import type { MinutesData, ProjectData } from './types.js';

const api = new ApiClient('');

let activeStream: EventStreamClient | null = null;
let launcher: LauncherState = emptyLauncher();
let prefillAgenda = '';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(err: unknown): void {
  const box = el<HTMLDivElement>('error-box');
  if (err instanceof ServiceError) {
    const violations = err.error.violations?.map((v) => `<li>${v}</li>`).join('') ?? '';
    box.innerHTML = `<strong>${err.error.kind}</strong>: ${err.error.message}${
      violations ? `<ul>${violations}</ul>` : ''
    }`;
  } else {
    box.textContent = String(err);
  }
  box.hidden = false;
}

function clearError(): void {
  const box = el<HTMLDivElement>('error-box');
  box.hidden = true;
  box.textContent = '';
}

function stopStream(): void {
  activeStream?.stop();
  activeStream = null;
}

async function showDashboard(): Promise<void> {
  stopStream();
  const { projects } = await api.listProjects();
  el('main').innerHTML = `
    <h1>Projects</h1>
    ${renderProjectList(projects)}
    <form id="create-project">
      <h2>New project</h2>
      <input name="title" placeholder="Title" required />
      <textarea name="description" placeholder="Description"></textarea>
      <button type="submit">Create</button>
    </form>`;
  el<HTMLFormElement>('create-project').addEventListener('submit', async (ev) => {
    ev.preventDefault();
    clearError();
    const form = ev.target as HTMLFormElement;
    const data = new FormData(form);
    try {
      const project = await api.createProject(
        String(data.get('title') ?? ''),
        String(data.get('description') ?? ''),
        [],
      );
      location.hash = `#project/${project.id}`;
    } catch (err) {
      showError(err);
    }
  });
}

function launcherMarkup(project: ProjectData, running: boolean): string {
  const checkboxes = project.experts
    .map(
      (e) =>
        `<label><input type="checkbox" name="participant" value="${e.name}" ${
          launcher.participants.includes(e.name) ? 'checked' : ''
        }/> ${e.name}</label>`,
    )
    .join('\n');
  const violations = validateLauncher(launcher, project);
  const disabled = !canSubmit(launcher, project, running);
  return `
    <form id="launcher">
      <h2>Launch meeting</h2>
      <textarea name="agenda" placeholder="Agenda">${launcher.agenda}</textarea>
      <label>Rounds <input type="number" name="rounds" min="1" value="${launcher.rounds}" /></label>
      <fieldset><legend>Participants</legend>${checkboxes}</fieldset>
      <button type="submit" ${disabled ? 'disabled' : ''}>Start meeting</button>
      ${running ? '<p class="warning">A meeting is already running on this project.</p>' : ''}
      <ul class="violations">${violations.map((v) => `<li>${v}</li>`).join('')}</ul>
    </form>`;
}

async function projectHasRunningMeeting(project: ProjectData): Promise<boolean> {
  const lastMeetingId = project.meetings[project.meetings.length - 1];
  if (!lastMeetingId) return false;
  const record = await api.getMeeting(lastMeetingId);
  return record.status === 'running';
}

async function showProject(projectId: string): Promise<void> {
  stopStream();
  const project = await api.getProject(projectId);
  if (prefillAgenda) {
    launcher = { ...emptyLauncher(), agenda: prefillAgenda };
    prefillAgenda = '';
  }
  const running = await projectHasRunningMeeting(project);
  const meetings = project.meetings
    .map((id) => `<li><a href="#meeting/${id}">${id}</a></li>`)
    .join('');
  el('main').innerHTML = `
    <h1>${project.title}</h1>
    <p>${project.description}</p>
    <h2>Experts</h2>
    ${renderExpertList(project)}
    <form id="add-expert">
      <input name="name" placeholder="Expert name" required />
      <textarea name="persona" placeholder="Persona"></textarea>
      <button type="submit">Add expert</button>
    </form>
    <form id="upload-doc">
      <h2>Upload document</h2>
      <select name="expert">${project.experts
        .map((e) => `<option value="${e.name}">${e.name}</option>`)
        .join('')}</select>
      <input name="source" placeholder="Source name" />
      <textarea name="content" placeholder="Paste document text"></textarea>
      <button type="submit">Ingest</button>
    </form>
    ${launcherMarkup(project, running)}
    <h2>Meeting history</h2>
    <ul class="meetings">${meetings}</ul>`;

  el<HTMLFormElement>('add-expert').addEventListener('submit', async (ev) => {
    ev.preventDefault();
    clearError();
    const data = new FormData(ev.target as HTMLFormElement);
    try {
      await api.addExpert(projectId, String(data.get('name') ?? ''), String(data.get('persona') ?? ''));
      await showProject(projectId);
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLFormElement>('upload-doc').addEventListener('submit', async (ev) => {
    ev.preventDefault();
    clearError();
    const data = new FormData(ev.target as HTMLFormElement);
    try {
      await api.uploadDocument(
        projectId,
        String(data.get('expert') ?? ''),
        String(data.get('source') ?? 'pasted-text'),
        String(data.get('content') ?? ''),
      );
      await showProject(projectId);
    } catch (err) {
      showError(err);
    }
  });

  for (const button of document.querySelectorAll<HTMLButtonElement>('.warmup-btn')) {
    button.addEventListener('click', async () => {
      clearError();
      try {
        const { meeting_id } = await api.startWarmup(button.dataset.expertId ?? '');
        location.hash = `#meeting/${meeting_id}`;
      } catch (err) {
        showError(err);
      }
    });
  }

  const form = el<HTMLFormElement>('launcher');
  form.addEventListener('input', () => {
    const data = new FormData(form);
    launcher = {
      agenda: String(data.get('agenda') ?? ''),
      rounds: Number(data.get('rounds') ?? 0),
      participants: [...form.querySelectorAll<HTMLInputElement>('input[name=participant]:checked')].map(
        (node) => node.value,
      ),
    };
  });
  form.addEventListener('submit', async (ev) => {
    ev.preventDefault();
    clearError();
    try {
      const { meeting_id } = await api.startMeeting(
        projectId,
        launcher.agenda,
        launcher.rounds,
        launcher.participants,
      );
      launcher = emptyLauncher();
      location.hash = `#meeting/${meeting_id}`;
    } catch (err) {
      showError(err);
    }
  });
}

async function showMeeting(meetingId: string): Promise<void> {
  stopStream();
  const record = await api.getMeeting(meetingId);
  const feed = new MeetingFeed();
  el('main').innerHTML = `<p><a href="#project/${record.project_id}">← back to project</a></p>
    <div id="feed">connecting…</div>`;
  const redraw = () => {
    el('feed').innerHTML = renderFeed(feed.view());
  };
  const stream = new EventStreamClient({
    url: api.eventsUrl(meetingId),
    onEvent: (event) => {
      feed.add(event);
      redraw();
      if (event.phase === 'meeting_finished' && record.config.kind === 'team') {
        location.hash = `#minutes/${meetingId}`;
      }
    },
    onState: (state) => {
      if (state === 'reconnecting') el('feed').dataset.stream = 'reconnecting';
    },
  });
  activeStream = stream;
  void stream.start();
}

async function showMinutes(meetingId: string): Promise<void> {
  stopStream();
  const minutes: MinutesData = await api.getMinutes(meetingId);
  const record = await api.getMeeting(meetingId);
  el('main').innerHTML = `<p><a href="#project/${record.project_id}">← back to project</a></p>${renderMinutes(minutes)}`;
  el<HTMLButtonElement>('start-follow-up').addEventListener('click', () => {
    prefillAgenda = prefillFollowUpAgenda(minutes);
    location.hash = `#project/${record.project_id}`;
  });
}

async function route(): Promise<void> {
  clearError();
  const hash = location.hash.replace(/^#/, '');
  try {
    if (hash.startsWith('project/')) await showProject(hash.slice('project/'.length));
    else if (hash.startsWith('meeting/')) await showMeeting(hash.slice('meeting/'.length));
    else if (hash.startsWith('minutes/')) await showMinutes(hash.slice('minutes/'.length));
    else await showDashboard();
  } catch (err) {
    showError(err);
  }
}

window.addEventListener('hashchange', () => void route());
window.addEventListener('DOMContentLoaded', () => void route());

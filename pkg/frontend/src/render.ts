// HTML string renderers. Kept DOM-free so node tests can assert on the
// produced markup; app.ts assigns the results to innerHTML.

import type { FeedView, RoundGroup } from './feed.js';
import type { MinutesData, ProjectData } from './types.js';

export function escapeHtml(value: string): string {
  return value
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
    .replaceAll("'", '&#39;');
}

const PHASE_LABEL: Record<string, string> = {
  guidance: 'Guidance',
  expert_turn: 'Expert',
  critique: 'Critique',
  synthesis: 'Synthesis',
};

function renderRound(group: RoundGroup): string {
  const turns = group.turns
    .map((turn) => {
      const followUps =
        turn.followUps.length > 0
          ? `<ol class="follow-ups">${turn.followUps
              .map((q) => `<li><strong>${escapeHtml(q)}</strong></li>`)
              .join('')}</ol>`
          : '';
      return `<article class="turn turn-${turn.phase}" data-seq="${turn.seq}">
  <header>${escapeHtml(PHASE_LABEL[turn.phase] ?? turn.phase)} · ${escapeHtml(turn.speaker)}</header>
  <pre>${escapeHtml(turn.content)}</pre>${followUps}
</article>`;
    })
    .join('\n');
  return `<section class="round" data-round="${group.round}">
<h3>Round ${group.round}</h3>
${turns}
</section>`;
}

export function renderFeed(view: FeedView): string {
  const rounds = view.rounds.map(renderRound).join('\n');
  const final = view.finalSummary
    ? `<section class="final-summary"><h3>Final Summary</h3><pre>${escapeHtml(view.finalSummary)}</pre></section>`
    : '';
  const badge =
    view.status === 'running'
      ? '<span class="status running">live</span>'
      : `<span class="status ${view.status}">${view.status}</span>`;
  return `<div class="meeting-feed" data-status="${view.status}" data-turns="${view.contentTurnCount}">
<h2>${escapeHtml(view.agenda)} ${badge}</h2>
${rounds}
${final}
</div>`;
}

export function renderMinutes(minutes: MinutesData): string {
  const rounds = minutes.per_round
    .map((round) => {
      const followUps =
        round.follow_up_questions.length > 0
          ? `<ol class="follow-ups">${round.follow_up_questions
              .map((q) => `<li><strong>${escapeHtml(q)}</strong></li>`)
              .join('')}</ol>`
          : '<p class="none">No open questions.</p>';
      return `<section class="round-minutes" data-round="${round.round_index}">
<h3>Round ${round.round_index} Synthesis</h3>
<pre>${escapeHtml(round.synthesis)}</pre>
${followUps}
</section>`;
    })
    .join('\n');
  return `<div class="minutes">
<h2>Minutes · ${escapeHtml(minutes.agenda)}</h2>
<p class="participants">Participants: ${minutes.participants.map(escapeHtml).join(', ')}</p>
${rounds}
<section class="final-summary"><h3>Final Summary</h3><pre>${escapeHtml(minutes.final_summary)}</pre></section>
<button type="button" id="start-follow-up">Start follow-up meeting</button>
</div>`;
}

export function renderProjectList(projects: ProjectData[]): string {
  if (projects.length === 0) return '<p class="none">No projects yet.</p>';
  const items = projects
    .map(
      (p) => `<li data-project="${p.id}">
  <a href="#project/${p.id}">${escapeHtml(p.title)}</a>
  <span class="counts">${p.experts.length} experts · ${p.meetings.length} meetings</span>
</li>`,
    )
    .join('\n');
  return `<ul class="projects">${items}</ul>`;
}

export function renderExpertList(project: ProjectData): string {
  if (project.experts.length === 0) return '<p class="none">No experts yet.</p>';
  const items = project.experts
    .map((e) => {
      const badge = e.warmup_done
        ? '<span class="badge warm">warmed up</span>'
        : '<span class="badge cold">not warmed up</span>';
      return `<li data-expert="${e.id}">${escapeHtml(e.name)} ${badge}
  <button type="button" class="warmup-btn" data-expert-id="${e.id}" ${
    e.knowledge_base_id ? '' : 'disabled'
  }>warm up</button></li>`;
    })
    .join('\n');
  return `<ul class="experts">${items}</ul>`;
}

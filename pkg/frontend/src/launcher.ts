// Meeting launcher form state. Validation mirrors the server's rules so the
// obvious mistakes surface inline before any request; the server's 400
// remains the authority.

import type { MinutesData, ProjectData } from './types.js';

export interface LauncherState {
  agenda: string;
  rounds: number;
  participants: string[];
}

export function emptyLauncher(): LauncherState {
  return { agenda: '', rounds: 2, participants: [] };
}

export function validateLauncher(state: LauncherState, project: ProjectData): string[] {
  const violations: string[] = [];
  if (!state.agenda.trim()) violations.push('agenda must be non-empty');
  if (!Number.isInteger(state.rounds) || state.rounds < 1) violations.push('rounds ≥ 1 required');
  if (state.participants.length === 0) violations.push('a team meeting needs at least 1 participant');
  const roster = new Set(project.experts.map((e) => e.name));
  const unknown = state.participants.filter((name) => !roster.has(name));
  if (unknown.length > 0) violations.push(`unknown participants: ${unknown.join(', ')}`);
  if (new Set(state.participants).size !== state.participants.length) {
    violations.push('participants must not repeat');
  }
  return violations;
}

/** Submit is disabled while a meeting runs on the project (the server would
 *  answer 409) or while the form is invalid. */
export function canSubmit(
  state: LauncherState,
  project: ProjectData,
  meetingRunning: boolean,
): boolean {
  return !meetingRunning && validateLauncher(state, project).length === 0;
}

/** Agenda for a follow-up meeting: the final round's follow-up questions,
 *  verbatim, one per line. */
export function prefillFollowUpAgenda(minutes: MinutesData): string {
  const lastRound = minutes.per_round[minutes.per_round.length - 1];
  if (!lastRound) return '';
  return lastRound.follow_up_questions.join('\n');
}

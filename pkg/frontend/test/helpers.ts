// Builders for wire-shaped fixtures used across the frontend tests.

import type { EventPhase, MeetingEventData } from '../src/types.js';

export function makeEvent(
  seq: number,
  phase: EventPhase,
  round: number,
  speaker: string,
  content: string,
): MeetingEventData {
  return {
    seq,
    meeting_id: 'mtg-00000001',
    phase,
    speaker,
    content,
    round,
    timestamp: `2026-01-01T00:00:${String(seq).padStart(2, '0')}.000000Z`,
  };
}

/** The exact event sequence of a scripted R=2/N=3 team meeting. */
export function scriptedMeetingEvents(): MeetingEventData[] {
  const experts = ['E1', 'E2', 'E3'];
  const events: MeetingEventData[] = [];
  let seq = 0;
  const push = (phase: EventPhase, round: number, speaker: string, content: string) => {
    seq += 1;
    events.push(makeEvent(seq, phase, round, speaker, content));
  };
  push('meeting_started', 0, 'system', 'Scripted agenda');
  for (let r = 1; r <= 2; r += 1) {
    push('guidance', r, 'Coordinator', `GUIDE-r${r} guidance.`);
    for (const name of experts) {
      push('expert_turn', r, name, `TURN-${name}-r${r} contribution.`);
    }
    push('critique', r, 'Critical Thinker', `CRIT-r${r} critique.`);
    push(
      'synthesis',
      r,
      'Coordinator',
      `SYNTHESIS:\nSYN-r${r} synthesis.\n\nFOLLOW-UP QUESTIONS:\n1. FUQ-r${r}-1\n2. FUQ-r${r}-2`,
    );
  }
  push('final_summary', 0, 'Coordinator', 'FINAL overall summary.');
  push('meeting_finished', 0, 'system', '');
  return events;
}

// Wire types of the meeting service. Field names mirror the HTTP API.

export interface ExpertData {
  id: string;
  name: string;
  role: string;
  persona: string;
  knowledge_base_id: string | null;
  warmup_done: boolean;
}

export interface DocumentData {
  doc_id: string;
  knowledge_base_id: string;
  source_name: string;
  media: string;
  char_count: number;
  ingested_at: string;
}

export interface ProjectData {
  id: string;
  title: string;
  description: string;
  objectives: string[];
  experts: ExpertData[];
  corpus: DocumentData[];
  meetings: string[];
  created_at: string;
}

export type EventPhase =
  | 'meeting_started'
  | 'guidance'
  | 'expert_turn'
  | 'critique'
  | 'synthesis'
  | 'final_summary'
  | 'meeting_finished'
  | 'meeting_failed';

export interface MeetingEventData {
  seq: number;
  meeting_id: string;
  phase: EventPhase;
  speaker: string;
  content: string;
  round: number;
  timestamp: string;
}

export interface RoundData {
  round_index: number;
  guidance: string;
  expert_turns: [string, string][];
  critique: string;
  synthesis: string;
  follow_up_questions: string[];
}

export interface MinutesData {
  meeting_id: string;
  agenda: string;
  participants: string[];
  per_round: RoundData[];
  final_summary: string;
  rendered: string;
}

export interface MeetingRecordData {
  id: string;
  project_id: string;
  status: 'running' | 'completed' | 'failed';
  config: {
    agenda: string;
    rounds: number;
    participants: string[];
    kind: string;
  };
}

export interface ApiError {
  kind: string;
  message: string;
  violations?: string[];
}

export const CONTENT_PHASES: ReadonlySet<EventPhase> = new Set([
  'guidance',
  'expert_turn',
  'critique',
  'synthesis',
  'final_summary',
]);

export const TERMINAL_PHASES: ReadonlySet<EventPhase> = new Set([
  'meeting_finished',
  'meeting_failed',
]);

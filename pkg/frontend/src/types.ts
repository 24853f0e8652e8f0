/** Wire types matching the service's JSON, plus the startup configuration. */

export interface RankingTask {
  task_id: string;
  query_id: string;
  /** Candidate ids in similarity order (closest first). */
  candidates: string[];
  /** Permutation applied for display: slot s shows candidates[presentation_order[s]]. */
  presentation_order: number[];
}

export interface AppConfig {
  /** Base URL of the lookalike service; empty string for same-origin. */
  serviceBaseUrl: string;
  /** e.g. "/images/{item_id}.jpg"; null renders generated placeholder tiles. */
  imageUrlTemplate: string | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

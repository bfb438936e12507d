/** Types mirroring the session service's JSON payloads. */

export type CellState = "active" | "excluded" | "middle_band";

export interface SchemeJson {
  variant: "tent" | "railway" | "gap" | "gap_railway";
  p_star?: number | null;
  p_l?: number | null;
  p_u?: number | null;
}

export interface HypothesisJson {
  index: number;
  covariates: number[];
  g: number | null;
  state: CellState;
  p: number | null;
}

export interface ViewJson {
  scheme: SchemeJson;
  alpha: number;
  k: number;
  step: number;
  stopped: boolean;
  estimate: number | null;
  hypotheses: HypothesisJson[];
}

export interface CreateResponse {
  session_id: string;
  view: ViewJson;
}

export interface MutationResponse {
  stopped: boolean;
  view: ViewJson;
}

export interface ResultResponse {
  rejected: number[];
}

/** Typed client for the session service, with a recordable transport.
 *
 * Every request goes through a Transport so tests (and the transcript
 * audit) can observe exactly which bytes crossed the wire.
 */

import type { CreateResponse, MutationResponse, ResultResponse, ViewJson } from "./types.js";

export interface TransportRecord {
  method: string;
  url: string;
  requestBody: string | null;
  status: number;
  responseBody: string;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Transport {
  private records: TransportRecord[] = [];

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private recording = false,
  ) {}

  startRecording(): void {
    this.recording = true;
    this.records = [];
  }

  transcript(): TransportRecord[] {
    return this.records.slice();
  }

  async request(method: string, path: string, body?: unknown): Promise<string> {
    const url = this.baseUrl + path;
    const init: RequestInit = { method };
    let requestBody: string | null = null;
    if (body !== undefined) {
      requestBody = JSON.stringify(body);
      init.body = requestBody;
      init.headers = { "content-type": "application/json" };
    }
    const resp = await this.fetchImpl(url, init);
    const text = await resp.text();
    if (this.recording) {
      this.records.push({
        method,
        url,
        requestBody,
        status: resp.status,
        responseBody: text,
      });
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, text);
    }
    return text;
  }
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: string,
  ) {
    super(`request failed with status ${status}: ${body}`);
  }
}

export class SessionApi {
  constructor(private transport: Transport) {}

  async createFromGenerator(generator: object, config: object): Promise<CreateResponse> {
    const text = await this.transport.request("POST", "/sessions", { generator, config });
    return JSON.parse(text) as CreateResponse;
  }

  async createFromData(pvalues: number[], covariates: number[][], config: object): Promise<CreateResponse> {
    const text = await this.transport.request("POST", "/sessions", {
      pvalues,
      covariates,
      config,
    });
    return JSON.parse(text) as CreateResponse;
  }

  async view(sessionId: string): Promise<ViewJson> {
    const text = await this.transport.request("GET", `/sessions/${sessionId}/view`);
    return JSON.parse(text) as ViewJson;
  }

  async exclude(sessionId: string, indices: number[]): Promise<MutationResponse> {
    const text = await this.transport.request("POST", `/sessions/${sessionId}/exclude`, {
      indices,
    });
    return JSON.parse(text) as MutationResponse;
  }

  async auto(
    sessionId: string,
    strategy: string,
    params: object,
    scorer: string,
    steps: number,
  ): Promise<MutationResponse> {
    const text = await this.transport.request("POST", `/sessions/${sessionId}/auto`, {
      strategy,
      params,
      scorer,
      steps,
    });
    return JSON.parse(text) as MutationResponse;
  }

  async journal(sessionId: string): Promise<string> {
    return this.transport.request("GET", `/sessions/${sessionId}/journal`);
  }

  async result(sessionId: string): Promise<ResultResponse> {
    const text = await this.transport.request("GET", `/sessions/${sessionId}/result`);
    return JSON.parse(text) as ResultResponse;
  }
}

// Typed client for the affectkit retrieval service.
// The explorer never computes retrieval or weights itself: every number it
// shows comes out of one of these responses.

export interface VaPoint {
  valence: number;
  arousal: number;
}

export interface ResultCell {
  record_id: string;
  similarity: number | null;
  pool_size: number;
  fallback_used: boolean;
  va_distance: number;
  valence: number;
  arousal: number;
  attributes: string[];
  image_path: string | null;
}

export interface HealthResponse {
  status: string;
  records: number;
  embedding_dim: number;
  fingerprint: string;
  engine_version: string;
}

export interface RetrieveResponse {
  result: ResultCell;
  tau: number;
  fingerprint: string;
  engine_version: string;
}

export interface SweepResponse {
  v_values: number[];
  a_values_desc: number[];
  tau: number;
  rows: ResultCell[][];
  fingerprint: string;
  engine_version: string;
}

export interface WeightRow {
  attribute: string;
  weight: number;
}

export interface WeightsResponse {
  weights: WeightRow[];
  gamma: number;
  fingerprint: string;
  engine_version: string;
}

export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ServiceError(
        res.status,
        body.code ?? "error",
        body.message ?? `HTTP ${res.status}`,
        body.field ?? undefined,
      );
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  retrieve(req: {
    source_id?: string;
    source_embedding?: number[];
    valence: number;
    arousal: number;
    tau?: number;
  }): Promise<RetrieveResponse> {
    return this.request<RetrieveResponse>("/retrieve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  sweep(req: {
    source_id?: string;
    source_embedding?: number[];
    v_values: number[];
    a_values: number[];
    tau?: number;
  }): Promise<SweepResponse> {
    return this.request<SweepResponse>("/sweep", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  weights(v: number, a: number, gamma?: number): Promise<WeightsResponse> {
    const params = new URLSearchParams({ v: String(v), a: String(a) });
    if (gamma !== undefined) params.set("gamma", String(gamma));
    return this.request<WeightsResponse>(`/weights?${params}`);
  }
}

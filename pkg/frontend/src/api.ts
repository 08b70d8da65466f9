// Thin fetch client for the campaign service. All writes carry idempotency
// keys supplied by the caller so network-level retries are safe.

import type {
  AgreementReport,
  AggregateLabelRecord,
  AnnotationDraftBody,
  ApiErrorBody,
  CampaignInfo,
  ContestedItem,
  HarmoniseBody,
  QueueResponse,
  ReviewBody,
  SubmissionAck,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export function isAuthError(error: unknown): boolean {
  return error instanceof ApiError && error.status === 401;
}

export function isConflict(error: unknown): boolean {
  return error instanceof ApiError && error.status === 409;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${this.token}`,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const fallback: ApiErrorBody = {
        code: `http-${response.status}`,
        message: response.statusText,
        details: null,
      };
      const parsed = (await response.json().catch(() => fallback)) as ApiErrorBody;
      throw new ApiError(
        response.status,
        parsed.code ?? fallback.code,
        parsed.message ?? fallback.message,
        parsed.details,
      );
    }
    return (await response.json()) as T;
  }

  getQueue(): Promise<QueueResponse> {
    return this.request<QueueResponse>("GET", "/queue");
  }

  submitAnnotation(body: AnnotationDraftBody): Promise<SubmissionAck> {
    return this.request<SubmissionAck>("POST", "/annotations", body);
  }

  submitReview(body: ReviewBody): Promise<SubmissionAck> {
    return this.request<SubmissionAck>("POST", "/reviews", body);
  }

  campaignInfo(campaignId: string): Promise<CampaignInfo> {
    return this.request<CampaignInfo>("GET", `/campaigns/${campaignId}`);
  }

  contested(campaignId: string): Promise<{ items: ContestedItem[] }> {
    return this.request<{ items: ContestedItem[] }>(
      "GET",
      `/campaigns/${campaignId}/contested`,
    );
  }

  agreement(
    campaignId: string,
    roundId?: string,
    view?: "live" | "pre-harmonisation",
  ): Promise<AgreementReport> {
    const params = new URLSearchParams();
    if (roundId) params.set("round", roundId);
    if (view) params.set("view", view);
    const query = params.size ? `?${params.toString()}` : "";
    return this.request<AgreementReport>(
      "GET",
      `/campaigns/${campaignId}/agreement${query}`,
    );
  }

  harmonise(campaignId: string, body: HarmoniseBody): Promise<AggregateLabelRecord> {
    return this.request<AggregateLabelRecord>(
      "POST",
      `/campaigns/${campaignId}/harmonisations`,
      body,
    );
  }
}

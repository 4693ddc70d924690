// Thin typed client for the debriefkit HTTP API.

import {
    ActionDef,
    AnalyticsPayload,
    AnnotationRecord,
    SnippetRange,
    TimeWindow,
    Timeline,
    VizId,
} from "./types.js";

export class ApiError extends Error {
    constructor(
        public readonly status: number,
        public readonly errorType: string,
        message: string,
    ) {
        super(message);
        this.name = "ApiError";
    }
}

type FetchLike = typeof fetch;

export class DebriefApi {
    constructor(
        public readonly baseUrl: string,
        private readonly fetchFn: FetchLike = fetch,
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            let errorType = "HttpError";
            let message = `${response.status}`;
            try {
                const body = (await response.json()) as {
                    error?: { type?: string; message?: string };
                };
                errorType = body.error?.type ?? errorType;
                message = body.error?.message ?? message;
            } catch {
                // non-JSON error body: keep the status text
            }
            throw new ApiError(response.status, errorType, message);
        }
        return (await response.json()) as T;
    }

    getTimeline(sessionId: string): Promise<Timeline> {
        return this.request(`/sessions/${sessionId}/timeline`);
    }

    getAnalytics(
        sessionId: string,
        viz: Exclude<VizId, "snippet">,
        window: TimeWindow,
    ): Promise<AnalyticsPayload> {
        const query = `from_ms=${window.from_ms}&to_ms=${window.to_ms}`;
        return this.request(`/sessions/${sessionId}/analytics/${viz}?${query}`);
    }

    getCatalog(sessionId: string): Promise<{ actions: ActionDef[] }> {
        return this.request(`/sessions/${sessionId}/catalog`);
    }

    getAnnotations(sessionId: string): Promise<AnnotationRecord[]> {
        return this.request(`/sessions/${sessionId}/annotations`);
    }

    postAnnotation(
        sessionId: string,
        body: Record<string, unknown>,
    ): Promise<AnnotationRecord> {
        return this.request(`/sessions/${sessionId}/annotations`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        });
    }

    getSnippet(sessionId: string, atMs: number): Promise<SnippetRange> {
        return this.request(`/sessions/${sessionId}/snippet?at_ms=${atMs}`);
    }

    postInteraction(
        sessionId: string,
        event: string,
        payload: Record<string, unknown>,
        actor = "control",
    ): Promise<{ logged: boolean }> {
        return this.request(`/sessions/${sessionId}/interactions`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ actor, event, payload }),
        });
    }
}

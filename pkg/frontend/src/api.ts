/** Typed client for the annotation service REST API (all endpoints under /v1). */

export type SessionPhase = "selecting" | "awaiting_labels" | "training" | "finished";

export type Verdict = number | "abstain";

export interface SessionCounts {
    labeled: number;
    abstained: number;
}

export interface SessionStatus {
    id: string;
    status: SessionPhase;
    iteration: number;
    total_iterations: number;
    pending: number;
    batch_size: number;
    counts: SessionCounts;
    labeled_pool_size: number;
    unlabeled_pool_size: number;
    initial_accuracy: number;
    accuracies: number[];
    class_names: string[];
}

export interface QueryProgress {
    iteration: number;
    total_iterations: number;
    position: number;
    batch_size: number;
    labeled: number;
    abstained: number;
}

export interface NextQuery {
    video_id: string;
    frame_urls: string[];
    class_names: string[];
    progress: QueryProgress;
}

export interface SubmitResult {
    accepted: boolean;
    video_id: string;
    status: SessionPhase;
    pending: number;
}

/** Error bodies are {code, message}; status 0 marks a transport-level failure. */
export class ApiError extends Error {
    constructor(
        readonly status: number,
        readonly code: string,
        message: string,
    ) {
        super(message);
        this.name = "ApiError";
    }
}

export class AnnotationApi {
    private readonly baseUrl: string;

    constructor(baseUrl: string) {
        this.baseUrl = baseUrl.replace(/\/+$/, "");
    }

    createSession(
        manifest: string,
        seed: number,
        config: Record<string, unknown> = {},
    ): Promise<SessionStatus> {
        return this.request<SessionStatus>("/v1/sessions", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ manifest, seed, config }),
        });
    }

    getStatus(sessionId: string): Promise<SessionStatus> {
        return this.request<SessionStatus>(`/v1/sessions/${encodeURIComponent(sessionId)}`);
    }

    nextQuery(sessionId: string): Promise<NextQuery> {
        return this.request<NextQuery>(`/v1/sessions/${encodeURIComponent(sessionId)}/next`);
    }

    submitLabel(sessionId: string, videoId: string, verdict: Verdict): Promise<SubmitResult> {
        return this.request<SubmitResult>(
            `/v1/sessions/${encodeURIComponent(sessionId)}/labels`,
            {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify({ video_id: videoId, verdict }),
            },
        );
    }

    /** The service returns frame URLs as absolute paths under /v1; anchor them to the base. */
    frameUrl(path: string): string {
        if (/^https?:\/\//.test(path)) {
            return path;
        }
        return this.baseUrl + (path.startsWith("/") ? path : `/${path}`);
    }

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        let response: Response;
        try {
            response = await fetch(this.baseUrl + path, init);
        } catch (error) {
            const message = error instanceof Error ? error.message : String(error);
            throw new ApiError(0, "network", message);
        }
        if (!response.ok) {
            throw await this.toError(response);
        }
        return (await response.json()) as T;
    }

    private async toError(response: Response): Promise<ApiError> {
        let code = "http_error";
        let message = `request failed with status ${response.status}`;
        try {
            const body: unknown = await response.json();
            if (body && typeof body === "object") {
                const record = body as Record<string, unknown>;
                if (typeof record.code === "string") {
                    code = record.code;
                }
                if (typeof record.message === "string") {
                    message = record.message;
                }
            }
        } catch {
            // non-JSON error body; keep the generic message
        }
        return new ApiError(response.status, code, message);
    }
}

/** Session driver: one in-flight verdict at a time, everything else read-only. */

import { AnnotationApi, ApiError, NextQuery, SessionStatus, Verdict } from "./api.js";
import { View, verdictForKey, viewFrom } from "./state.js";
import { renderApp } from "./ui.js";

export interface ControllerOptions {
    abstainKey?: string;
    /** Poll interval for selecting/training phases; 0 disables polling. */
    pollMs?: number;
}

export class AnnotationController {
    private view: View = { kind: "loading" };
    private sessionId: string | null = null;
    private inFlight = false;
    private notice: string | null = null;

    constructor(
        private readonly api: AnnotationApi,
        private readonly root: HTMLElement,
        private readonly options: ControllerOptions = {},
    ) {}

    get currentView(): View {
        return this.view;
    }

    async start(
        manifest: string,
        seed: number,
        config: Record<string, unknown> = {},
    ): Promise<void> {
        this.render();
        try {
            const status = await this.api.createSession(manifest, seed, config);
            this.sessionId = status.id;
            await this.show(status);
        } catch (error) {
            this.fail(error);
        }
    }

    /** Resume an existing session, e.g. after a page reload. */
    async attach(sessionId: string): Promise<void> {
        this.sessionId = sessionId;
        await this.refresh();
    }

    async refresh(): Promise<void> {
        if (!this.sessionId) {
            return;
        }
        try {
            const status = await this.api.getStatus(this.sessionId);
            await this.show(status);
        } catch (error) {
            this.fail(error);
        }
    }

    async handleVerdict(verdict: Verdict): Promise<void> {
        if (this.view.kind !== "annotating" || this.inFlight) {
            return;
        }
        const videoId = this.view.query.video_id;
        this.inFlight = true;
        try {
            await this.api.submitLabel(this.sessionId!, videoId, verdict);
        } catch (error) {
            if (error instanceof ApiError && error.status === 409) {
                // duplicate or already-advanced batch; the refresh shows the truth
                this.notice = "verdict already recorded; showing the current query";
            } else {
                this.inFlight = false;
                this.fail(error);
                return;
            }
        }
        this.inFlight = false;
        await this.refresh();
    }

    handleKey(key: string): Promise<void> {
        if (this.view.kind !== "annotating") {
            return Promise.resolve();
        }
        const verdict = verdictForKey(
            key,
            this.view.query.class_names.length,
            this.options.abstainKey ?? "a",
        );
        if (verdict === null) {
            return Promise.resolve();
        }
        return this.handleVerdict(verdict);
    }

    private async show(status: SessionStatus): Promise<void> {
        let query: NextQuery | null = null;
        if (status.status === "awaiting_labels") {
            const raw = await this.api.nextQuery(this.sessionId!);
            query = { ...raw, frame_urls: raw.frame_urls.map((u) => this.api.frameUrl(u)) };
        }
        this.view = viewFrom(status, query, this.notice);
        this.notice = null;
        this.render();
        const waiting = status.status === "selecting" || status.status === "training";
        if (waiting && this.options.pollMs) {
            setTimeout(() => {
                void this.refresh();
            }, this.options.pollMs);
        }
    }

    private fail(error: unknown): void {
        const message =
            error instanceof ApiError
                ? `${error.message} (${error.code})`
                : error instanceof Error
                  ? error.message
                  : String(error);
        this.view = { kind: "error", message };
        this.render();
    }

    private render(): void {
        renderApp(
            this.root,
            this.view,
            {
                onVerdict: (verdict) => {
                    void this.handleVerdict(verdict);
                },
                onRetry: () => {
                    void this.refresh();
                },
            },
            { abstainKey: this.options.abstainKey ?? "a" },
        );
    }
}

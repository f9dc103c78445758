/** Pure view-model layer: every view is derived from the last service response. */

import { NextQuery, SessionStatus, Verdict } from "./api.js";

export type View =
    | { kind: "loading" }
    | { kind: "error"; message: string }
    | { kind: "working"; status: SessionStatus }
    | { kind: "annotating"; status: SessionStatus; query: NextQuery; notice: string | null }
    | { kind: "finished"; status: SessionStatus };

export function viewFrom(
    status: SessionStatus,
    query: NextQuery | null,
    notice: string | null = null,
): View {
    if (status.status === "finished") {
        return { kind: "finished", status };
    }
    if (status.status === "awaiting_labels") {
        if (!query) {
            return { kind: "loading" };
        }
        return { kind: "annotating", status, query, notice };
    }
    return { kind: "working", status };
}

/**
 * Map a key press to a verdict: digits pick the class with that index,
 * the configured abstain key abstains, everything else is ignored.
 */
export function verdictForKey(
    key: string,
    classCount: number,
    abstainKey: string,
): Verdict | null {
    if (key === abstainKey) {
        return "abstain";
    }
    if (/^[0-9]$/.test(key)) {
        const index = Number(key);
        if (index < classCount) {
            return index;
        }
    }
    return null;
}

export interface AccuracyPoint {
    iteration: number;
    accuracy: number;
}

export function accuracyPoints(status: Pick<SessionStatus, "accuracies">): AccuracyPoint[] {
    return status.accuracies.map((accuracy, i) => ({ iteration: i + 1, accuracy }));
}

export function progressSummary(query: NextQuery): string {
    const p = query.progress;
    return (
        `iteration ${p.iteration}/${p.total_iterations}, ` +
        `video ${p.position}/${p.batch_size}, ` +
        `labeled ${p.labeled}, abstained ${p.abstained}`
    );
}

export function workingSummary(status: SessionStatus): string {
    return status.status === "training"
        ? "retraining the classifier on the updated pool"
        : "selecting the next batch of videos";
}

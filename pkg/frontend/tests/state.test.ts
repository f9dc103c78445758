import { describe, expect, it } from "vitest";

import { NextQuery, SessionStatus } from "../src/api.js";
import {
    accuracyPoints,
    progressSummary,
    verdictForKey,
    viewFrom,
    workingSummary,
} from "../src/state.js";

export function fakeStatus(overrides: Partial<SessionStatus> = {}): SessionStatus {
    return {
        id: "sess-1",
        status: "awaiting_labels",
        iteration: 0,
        total_iterations: 2,
        pending: 3,
        batch_size: 3,
        counts: { labeled: 0, abstained: 0 },
        labeled_pool_size: 12,
        unlabeled_pool_size: 9,
        initial_accuracy: 0.3,
        accuracies: [],
        class_names: ["cat", "dog", "bird"],
        ...overrides,
    };
}

export function fakeQuery(overrides: Partial<NextQuery> = {}): NextQuery {
    return {
        video_id: "vid-a",
        frame_urls: [
            "http://svc/v1/assets/sess-1/assets/vid-a/frame_0000.png",
            "http://svc/v1/assets/sess-1/assets/vid-a/frame_0004.png",
            "http://svc/v1/assets/sess-1/assets/vid-a/frame_0009.png",
        ],
        class_names: ["cat", "dog", "bird"],
        progress: {
            iteration: 1,
            total_iterations: 2,
            position: 1,
            batch_size: 3,
            labeled: 0,
            abstained: 0,
        },
        ...overrides,
    };
}

describe("viewFrom", () => {
    it("maps a finished status to the finished view", () => {
        const view = viewFrom(fakeStatus({ status: "finished" }), null);
        expect(view.kind).toBe("finished");
    });

    it("needs a query before the annotating view appears", () => {
        expect(viewFrom(fakeStatus(), null).kind).toBe("loading");
        const view = viewFrom(fakeStatus(), fakeQuery(), "already recorded");
        expect(view).toMatchObject({ kind: "annotating", notice: "already recorded" });
    });

    it("maps selecting and training to the working view", () => {
        expect(viewFrom(fakeStatus({ status: "selecting" }), null).kind).toBe("working");
        expect(viewFrom(fakeStatus({ status: "training" }), null).kind).toBe("working");
    });
});

describe("verdictForKey", () => {
    it("maps digits to class indices within range", () => {
        expect(verdictForKey("0", 3, "a")).toBe(0);
        expect(verdictForKey("2", 3, "a")).toBe(2);
        expect(verdictForKey("3", 3, "a")).toBeNull();
        expect(verdictForKey("9", 3, "a")).toBeNull();
    });

    it("maps the configured abstain key and ignores everything else", () => {
        expect(verdictForKey("a", 3, "a")).toBe("abstain");
        expect(verdictForKey("x", 3, "x")).toBe("abstain");
        expect(verdictForKey("a", 3, "x")).toBeNull();
        expect(verdictForKey("Enter", 3, "a")).toBeNull();
    });

    it("lets a digit act as the abstain key when configured that way", () => {
        expect(verdictForKey("9", 3, "9")).toBe("abstain");
    });
});

describe("summaries", () => {
    it("numbers accuracy points by iteration", () => {
        const points = accuracyPoints(fakeStatus({ accuracies: [0.4, 0.55] }));
        expect(points).toEqual([
            { iteration: 1, accuracy: 0.4 },
            { iteration: 2, accuracy: 0.55 },
        ]);
    });

    it("renders the progress line from the query payload", () => {
        const line = progressSummary(
            fakeQuery({
                progress: {
                    iteration: 2,
                    total_iterations: 2,
                    position: 3,
                    batch_size: 4,
                    labeled: 5,
                    abstained: 1,
                },
            }),
        );
        expect(line).toBe("iteration 2/2, video 3/4, labeled 5, abstained 1");
    });

    it("describes the waiting phases", () => {
        expect(workingSummary(fakeStatus({ status: "training" }))).toContain("retraining");
        expect(workingSummary(fakeStatus({ status: "selecting" }))).toContain("selecting");
    });
});

/** DOM rendering: each call rebuilds the root from the current view. */

import { Verdict } from "./api.js";
import { View, accuracyPoints, progressSummary, workingSummary } from "./state.js";

export interface Handlers {
    onVerdict(verdict: Verdict): void;
    onRetry(): void;
}

export interface RenderOptions {
    abstainKey: string;
}

export function renderApp(
    root: HTMLElement,
    view: View,
    handlers: Handlers,
    options: RenderOptions = { abstainKey: "a" },
): void {
    root.textContent = "";
    switch (view.kind) {
        case "loading":
            root.appendChild(textDiv("status-message", "loading session..."));
            break;
        case "error": {
            root.appendChild(textDiv("error-message", view.message));
            const retry = button("retry", "retry", () => handlers.onRetry());
            root.appendChild(retry);
            break;
        }
        case "working":
            root.appendChild(accuracyStrip(view.status.initial_accuracy, view.status.accuracies));
            root.appendChild(textDiv("status-message", workingSummary(view.status)));
            break;
        case "annotating":
            renderAnnotating(root, view, handlers, options);
            break;
        case "finished":
            renderFinished(root, view.status);
            break;
    }
}

function renderAnnotating(
    root: HTMLElement,
    view: Extract<View, { kind: "annotating" }>,
    handlers: Handlers,
    options: RenderOptions,
): void {
    const { query, status } = view;
    root.appendChild(accuracyStrip(status.initial_accuracy, status.accuracies));
    root.appendChild(textDiv("progress", progressSummary(query)));
    if (view.notice) {
        root.appendChild(textDiv("notice", view.notice));
    }

    const title = textDiv("video-id", `video ${query.video_id}`);
    root.appendChild(title);

    const gallery = document.createElement("div");
    gallery.className = "gallery";
    for (const url of query.frame_urls) {
        gallery.appendChild(frameImage(url));
    }
    root.appendChild(gallery);

    const controls = document.createElement("div");
    controls.className = "controls";
    query.class_names.forEach((name, index) => {
        const label = button("class-button", `${index}: ${name}`, () =>
            handlers.onVerdict(index),
        );
        label.dataset.classIndex = String(index);
        controls.appendChild(label);
    });
    controls.appendChild(
        button("abstain-button", `abstain (${options.abstainKey})`, () =>
            handlers.onVerdict("abstain"),
        ),
    );
    root.appendChild(controls);
}

function renderFinished(root: HTMLElement, status: SessionStatusLike): void {
    root.appendChild(textDiv("status-message finished", "session finished"));
    root.appendChild(
        textDiv(
            "final-counts",
            `labeled ${status.counts.labeled}, abstained ${status.counts.abstained}, ` +
                `labeled pool ${status.labeled_pool_size}`,
        ),
    );
    const list = document.createElement("ul");
    list.className = "accuracy-list";
    const initial = document.createElement("li");
    initial.className = "accuracy-initial";
    initial.textContent = `before labeling: ${formatAccuracy(status.initial_accuracy)}`;
    list.appendChild(initial);
    for (const point of accuracyPoints(status)) {
        const item = document.createElement("li");
        item.className = "accuracy-point";
        item.textContent = `iteration ${point.iteration}: ${formatAccuracy(point.accuracy)}`;
        list.appendChild(item);
    }
    root.appendChild(list);
}

// the finished screen only needs these fields, which keeps it easy to test
interface SessionStatusLike {
    counts: { labeled: number; abstained: number };
    labeled_pool_size: number;
    initial_accuracy: number;
    accuracies: number[];
}

function accuracyStrip(initial: number, accuracies: number[]): HTMLElement {
    const parts = [`start ${formatAccuracy(initial)}`];
    accuracies.forEach((value, i) => parts.push(`it${i + 1} ${formatAccuracy(value)}`));
    return textDiv("accuracy-strip", `test accuracy: ${parts.join(" | ")}`);
}

function frameImage(url: string): HTMLElement {
    const img = document.createElement("img");
    img.className = "frame";
    img.src = url;
    img.alt = "video frame";
    img.tabIndex = 0;
    img.addEventListener("error", () => {
        const placeholder = textDiv("frame placeholder", "frame unavailable");
        img.replaceWith(placeholder);
    });
    return img;
}

function formatAccuracy(value: number): string {
    return `${(100 * value).toFixed(1)}%`;
}

function textDiv(className: string, text: string): HTMLElement {
    const node = document.createElement("div");
    node.className = className;
    node.textContent = text;
    return node;
}

function button(className: string, text: string, onClick: () => void): HTMLButtonElement {
    const node = document.createElement("button");
    node.className = className;
    node.type = "button";
    node.textContent = text;
    node.addEventListener("click", onClick);
    return node;
}

export function renderSetupForm(
    root: HTMLElement,
    onStart: (manifest: string, seed: number) => void,
): void {
    root.textContent = "";
    const form = document.createElement("form");
    form.className = "setup-form";

    const manifest = document.createElement("input");
    manifest.name = "manifest";
    manifest.placeholder = "path to manifest.json on the server";
    const seed = document.createElement("input");
    seed.name = "seed";
    seed.value = "0";
    const start = document.createElement("button");
    start.type = "submit";
    start.textContent = "start session";

    form.append(manifest, seed, start);
    form.addEventListener("submit", (event) => {
        event.preventDefault();
        if (manifest.value) {
            onStart(manifest.value, Number(seed.value) || 0);
        }
    });
    root.appendChild(form);
}

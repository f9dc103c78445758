/** Entry point: wires URL parameters and the keyboard to the session controller. */

import { AnnotationApi } from "./api.js";
import { AnnotationController } from "./controller.js";
import { renderSetupForm } from "./ui.js";

function bootstrap(): void {
    const root = document.getElementById("app");
    if (!root) {
        throw new Error("missing #app container");
    }
    const params = new URLSearchParams(window.location.search);
    const base = params.get("base") ?? window.location.origin;
    const api = new AnnotationApi(base);
    const controller = new AnnotationController(api, root, {
        abstainKey: params.get("abstain_key") ?? "a",
        pollMs: 750,
    });

    window.addEventListener("keydown", (event) => {
        if (event.target instanceof HTMLInputElement) {
            return;
        }
        void controller.handleKey(event.key);
    });

    const session = params.get("session");
    const manifest = params.get("manifest");
    if (session) {
        void controller.attach(session);
    } else if (manifest) {
        void controller.start(manifest, Number(params.get("seed") ?? "0"));
    } else {
        renderSetupForm(root, (chosenManifest, seed) => {
            void controller.start(chosenManifest, seed);
        });
    }
}

bootstrap();

/**
 * Control panel construction: AU and viseme sliders, head pose knobs,
 * appearance sliders, emotion buttons with a shared intensity, and the
 * utterance box.  All changes funnel through one callback; slider display
 * values reconcile against the frame stream via UiSessionState.
 */

import { AU_KEYS, AU_LABELS, EMOTIONS, VISEME_IDS } from "./protocol.js";
import { UiSessionState } from "./state.js";

export type ControlHandler = (controlId: string, value: number) => void;
export type ActionHandler = (action: string, detail: Record<string, unknown>) => void;

function slider(
    parent: HTMLElement, controlId: string, label: string,
    min: number, max: number, onInput: ControlHandler,
): HTMLInputElement {
    const row = document.createElement("label");
    row.className = "control-row";
    const caption = document.createElement("span");
    caption.textContent = label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(min);
    input.max = String(max);
    input.step = "0.01";
    input.value = "0";
    input.dataset.control = controlId;
    const readout = document.createElement("output");
    readout.textContent = "0.00";
    input.addEventListener("input", () => {
        readout.textContent = Number(input.value).toFixed(2);
        onInput(controlId, Number(input.value));
    });
    row.append(caption, input, readout);
    parent.append(row);
    return input;
}

function section(parent: HTMLElement, title: string): HTMLElement {
    const box = document.createElement("details");
    box.className = "panel-section";
    const heading = document.createElement("summary");
    heading.textContent = title;
    box.append(heading);
    parent.append(box);
    return box;
}

export class ControlPanel {
    private sliders = new Map<string, HTMLInputElement>();
    private emotionIntensity = 0.8;

    constructor(
        root: HTMLElement,
        onControl: ControlHandler,
        onAction: ActionHandler,
    ) {
        const aus = section(root, "Action units");
        aus.toggleAttribute("open", true);
        for (const au of AU_KEYS) {
            this.sliders.set(`au:${au}`, slider(aus, `au:${au}`, `AU${au} ${AU_LABELS[au]}`, 0, 1, onControl));
        }

        const visemes = section(root, "Visemes");
        for (const viseme of VISEME_IDS) {
            this.sliders.set(`viseme:${viseme}`, slider(visemes, `viseme:${viseme}`, viseme, 0, 1, onControl));
        }

        const head = section(root, "Head pose");
        head.toggleAttribute("open", true);
        for (const axis of ["yaw", "pitch", "roll"] as const) {
            this.sliders.set(`head:${axis}`, slider(head, `head:${axis}`, axis, -1, 1, onControl));
        }

        const looks = section(root, "Appearance");
        for (const key of ["skin_tone", "skin_age"] as const) {
            this.sliders.set(`appearance:${key}`, slider(looks, `appearance:${key}`, key, 0, 1, onControl));
        }

        const emotions = section(root, "Emotions");
        emotions.toggleAttribute("open", true);
        const buttonRow = document.createElement("div");
        buttonRow.className = "emotion-buttons";
        for (const label of EMOTIONS) {
            const button = document.createElement("button");
            button.textContent = label;
            button.addEventListener("click", () =>
                onAction("emotion", { label, intensity: this.emotionIntensity }));
            buttonRow.append(button);
        }
        emotions.append(buttonRow);
        const intensity = slider(emotions, "emotion:intensity", "intensity", 0, 1, (_, v) => {
            this.emotionIntensity = v;
        });
        intensity.value = "0.8";

        const speech = section(root, "Speech");
        speech.toggleAttribute("open", true);
        const utterance = document.createElement("input");
        utterance.type = "text";
        utterance.placeholder = "hello world";
        utterance.id = "utterance";
        const sayButton = document.createElement("button");
        sayButton.textContent = "Say";
        const sayRow = document.createElement("div");
        sayRow.className = "say-row";
        sayRow.append(utterance, sayButton);
        speech.append(sayRow);
        const say = () => {
            if (utterance.value.trim()) {
                onAction("say", { text: utterance.value.trim() });
            }
        };
        sayButton.addEventListener("click", say);
        utterance.addEventListener("keydown", (ev) => {
            if (ev.key === "Enter") say();
        });

        const resetButton = document.createElement("button");
        resetButton.textContent = "Reset avatar";
        resetButton.className = "reset-button";
        resetButton.addEventListener("click", () => onAction("reset", {}));
        root.append(resetButton);
    }

    /** Pull display values (pending or echoed) from the session state. */
    refresh(state: UiSessionState): void {
        for (const [controlId, input] of this.sliders) {
            if (controlId.startsWith("emotion:")) continue;
            if (document.activeElement === input) continue;  // mid-drag
            const value = state.displayValue(controlId);
            if (value !== null) {
                input.value = value.toFixed(3);
                const readout = input.parentElement?.querySelector("output");
                if (readout) readout.textContent = value.toFixed(2);
            }
        }
    }
}

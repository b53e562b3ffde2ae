import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { FramePayload } from "../src/protocol.js";
import { UiSessionState } from "../src/state.js";

const restFrame = JSON.parse(
    readFileSync(new URL("./fixtures/rest_frame.json", import.meta.url), "utf-8"),
) as FramePayload;

function frameWithAu12(value: number): FramePayload {
    const frame: FramePayload = structuredClone(restFrame);
    frame.active_aus.aus["12"] = value;
    return frame;
}

describe("UiSessionState", () => {
    it("shows the pending value until the stream echoes it", () => {
        const state = new UiSessionState();
        state.applyFrame(frameWithAu12(0));
        state.setPending("au:12", 0.7);
        expect(state.displayValue("au:12")).toBe(0.7);

        state.applyFrame(frameWithAu12(0.2));  // another client's value
        expect(state.displayValue("au:12")).toBe(0.7);  // still pending

        state.applyFrame(frameWithAu12(0.7));  // our echo arrives
        expect(state.pendingCount()).toBe(0);
        expect(state.displayValue("au:12")).toBe(0.7);

        state.applyFrame(frameWithAu12(0.1));  // now the stream rules
        expect(state.displayValue("au:12")).toBe(0.1);
    });

    it("reads head and appearance channels from frames", () => {
        const state = new UiSessionState();
        const frame = structuredClone(restFrame);
        frame.head.yaw = -0.4;
        frame.appearance.skin_tone = 0.9;
        state.applyFrame(frame);
        expect(state.streamValue("head:yaw")).toBe(-0.4);
        expect(state.streamValue("appearance:skin_tone")).toBe(0.9);
        expect(state.streamValue("viseme:ae")).toBe(0);
    });

    it("returns null with no frame yet", () => {
        const state = new UiSessionState();
        expect(state.displayValue("au:12")).toBeNull();
    });
});

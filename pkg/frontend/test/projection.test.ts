import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { renderFace } from "../src/projection.js";
import { FramePayload } from "../src/protocol.js";

const restFrame = JSON.parse(
    readFileSync(new URL("./fixtures/rest_frame.json", import.meta.url), "utf-8"),
) as FramePayload;
const au12Frame = JSON.parse(
    readFileSync(new URL("./fixtures/au12_frame.json", import.meta.url), "utf-8"),
) as FramePayload;

describe("renderFace", () => {
    it("projects all 38 bones inside the canvas", () => {
        const projection = renderFace(restFrame, 640, 720);
        const names = Object.keys(projection.points);
        expect(names).toHaveLength(38);
        for (const name of ["LUpperEyelid", "Jaw", "MidUpperLip", "Root"]) {
            expect(projection.points[name]).toBeDefined();
        }
        // facial bones land on screen (torso bones may fall below the frame)
        const torso = new Set(["Root", "Chest", "Neck"]);
        for (const [name, p] of Object.entries(projection.points)) {
            if (torso.has(name)) continue;
            expect(p.x).toBeGreaterThan(0);
            expect(p.x).toBeLessThan(640);
            expect(p.y).toBeGreaterThan(0);
            expect(p.y).toBeLessThan(720);
        }
    });

    it("is a pure function of frame and canvas size", () => {
        const a = renderFace(restFrame, 640, 720);
        const b = renderFace(restFrame, 640, 720);
        expect(b).toEqual(a);
    });

    it("raises lip corners visibly for AU12 at full intensity", () => {
        const rest = renderFace(restFrame, 640, 720);
        const smile = renderFace(au12Frame, 640, 720);
        for (const corner of ["LLipCorner", "RLipCorner"]) {
            const dy = rest.points[corner].y - smile.points[corner].y;  // up = smaller y
            expect(dy).toBeGreaterThan(5);  // clearly visible at this canvas size
        }
        // outward pull too
        expect(smile.points.LLipCorner.x).toBeLessThan(rest.points.LLipCorner.x);
        expect(smile.points.RLipCorner.x).toBeGreaterThan(rest.points.RLipCorner.x);
    });

    it("moves chin and lip points down when the jaw drops", () => {
        const dropped: FramePayload = structuredClone(restFrame);
        dropped.bones.Jaw.p[1] -= 1.2;
        dropped.bones.Chin.p[1] -= 1.2;
        const rest = renderFace(restFrame, 640, 720);
        const open = renderFace(dropped, 640, 720);
        expect(open.points.Chin.y).toBeGreaterThan(rest.points.Chin.y);
        expect(open.points.Jaw.y).toBeGreaterThan(rest.points.Jaw.y);
    });

    it("scales with canvas size and keeps curve structure", () => {
        const small = renderFace(restFrame, 320, 360);
        const large = renderFace(restFrame, 640, 720);
        expect(large.scale).toBeCloseTo(small.scale * 2, 6);
        expect(small.curves.map(c => c.name)).toEqual(large.curves.map(c => c.name));
        const lips = small.curves.find(c => c.name === "lips")!;
        expect(lips.closed).toBe(true);
        expect(lips.points).toHaveLength(8);
    });

    it("turns the head outline with yaw", () => {
        const turned: FramePayload = structuredClone(restFrame);
        turned.head = { yaw: 1.0, pitch: 0, roll: 0 };
        const rest = renderFace(restFrame, 640, 720);
        const yawed = renderFace(turned, 640, 720);
        expect(yawed.headOutline.center.x).not.toBeCloseTo(rest.headOutline.center.x, 1);
    });

    it("tints skin with tone and overlays age", () => {
        const aged: FramePayload = structuredClone(restFrame);
        aged.appearance = { skin_tone: 1.0, skin_age: 1.0 };
        const dark = renderFace(aged, 640, 720);
        const light = renderFace(restFrame, 640, 720);
        expect(dark.skinFill).not.toEqual(light.skinFill);
        expect(dark.ageOverlayAlpha).toBeGreaterThan(light.ageOverlayAlpha);
    });
});

/**
 * Pure 2D projection of a rig frame: bone positions rotate with the head
 * pose, project orthographically, and group into drawable primitives.
 * Same frame + same canvas size always yields the same projection.
 */

import { FramePayload } from "./protocol.js";

export interface Point2 {
    x: number;
    y: number;
}

export interface Curve {
    name: string;
    points: Point2[];
    closed: boolean;
}

export interface FaceProjection {
    /** Screen position per bone, canvas pixels (y grows downward). */
    points: Record<string, Point2>;
    curves: Curve[];
    headOutline: { center: Point2; rx: number; ry: number; rollRad: number };
    skinFill: string;
    ageOverlayAlpha: number;
    scale: number;
}

/** Head pose knobs are dimensionless [-1, 1]; map to gentle rotations. */
const HEAD_RANGE_RAD = 0.6;

const CURVE_CHAINS: Array<{ name: string; bones: string[]; closed: boolean }> = [
    { name: "brow-left", bones: ["LOuterBrow", "LMidBrow", "LInnerBrow"], closed: false },
    { name: "brow-right", bones: ["ROuterBrow", "RMidBrow", "RInnerBrow"], closed: false },
    { name: "eye-left", bones: ["LUpperEyelid", "LEye", "LLowerEyelid"], closed: false },
    { name: "eye-right", bones: ["RUpperEyelid", "REye", "RLowerEyelid"], closed: false },
    { name: "nose", bones: ["UpperNose", "LUpperNose", "LNostril", "RNostril", "RUpperNose"], closed: true },
    {
        name: "lips",
        bones: ["LLipCorner", "LMidUpperLip", "MidUpperLip", "RMidUpperLip", "RLipCorner",
                "RMidLowerLip", "MidLowerLip", "LMidLowerLip"],
        closed: true,
    },
    { name: "jaw", bones: ["LCheekDimple", "Chin", "RCheekDimple"], closed: false },
    { name: "cheeks", bones: ["LUpperCheek", "LCheekDimple"], closed: false },
    { name: "cheeks-right", bones: ["RUpperCheek", "RCheekDimple"], closed: false },
];

function rotate(
    [x, y, z]: [number, number, number],
    yaw: number, pitch: number, roll: number,
): [number, number, number] {
    // yaw about +Y, pitch about +X, roll about +Z (applied in that order)
    let nx = x * Math.cos(yaw) + z * Math.sin(yaw);
    let nz = -x * Math.sin(yaw) + z * Math.cos(yaw);
    let ny = y * Math.cos(pitch) - nz * Math.sin(pitch);
    nz = y * Math.sin(pitch) + nz * Math.cos(pitch);
    const rx = nx * Math.cos(roll) - ny * Math.sin(roll);
    const ry = nx * Math.sin(roll) + ny * Math.cos(roll);
    return [rx, ry, nz];
}

function skinColor(tone: number): string {
    // light (0) to dark (1)
    const light = { r: 245, g: 219, b: 196 };
    const dark = { r: 96, g: 62, b: 38 };
    const mix = (a: number, b: number) => Math.round(a + (b - a) * tone);
    return `rgb(${mix(light.r, dark.r)},${mix(light.g, dark.g)},${mix(light.b, dark.b)})`;
}

export function renderFace(
    frame: FramePayload,
    canvasWidth: number,
    canvasHeight: number,
): FaceProjection {
    const yaw = frame.head.yaw * HEAD_RANGE_RAD;
    const pitch = frame.head.pitch * HEAD_RANGE_RAD;
    const roll = frame.head.roll * HEAD_RANGE_RAD;

    // the face spans roughly x in [-6, 6], y in [-8, 7] rig units
    const scale = Math.min(canvasWidth / 16, canvasHeight / 19);
    const cx = canvasWidth / 2;
    const cy = canvasHeight / 2;

    const points: Record<string, Point2> = {};
    for (const [name, pose] of Object.entries(frame.bones)) {
        const [x, y] = rotate(pose.p, yaw, pitch, roll);
        points[name] = { x: cx + x * scale, y: cy - y * scale };
    }

    const curves: Curve[] = CURVE_CHAINS
        .filter(chain => chain.bones.every(b => points[b] !== undefined))
        .map(chain => ({
            name: chain.name,
            points: chain.bones.map(b => points[b]),
            closed: chain.closed,
        }));

    // head outline: an ellipse around the face, shifted a little by yaw/pitch
    // so turning reads on screen even with orthographic bones
    const [ox, oy] = rotate([0, 0.6, 2.0], yaw, pitch, roll);
    return {
        points,
        curves,
        headOutline: {
            center: { x: cx + ox * scale, y: cy - oy * scale },
            rx: 7.2 * scale,
            ry: 9.4 * scale,
            rollRad: roll,
        },
        skinFill: skinColor(frame.appearance.skin_tone),
        ageOverlayAlpha: 0.35 * frame.appearance.skin_age,
        scale,
    };
}

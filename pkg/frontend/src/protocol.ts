/**
 * Wire types for the rigserve protocol (one JSON object per WebSocket
 * message) and the client-side range clamps that mirror the server rules.
 */

export interface BonePoseWire {
    p: [number, number, number];
    r: [number, number, number];
}

export interface FramePayload {
    type: "frame";
    tick: number;
    time_ms: number;
    bones: Record<string, BonePoseWire>;
    head: { yaw: number; pitch: number; roll: number };
    appearance: { skin_tone: number; skin_age: number };
    camera: BonePoseWire;
    active_visemes: Record<string, number>;
    active_aus: { aus: Record<string, number>; eyelid_close: number };
    lipsync_active: boolean;
}

export interface ResponseMessage {
    id: number | string;
    status: "ok" | "error";
    error?: { code: string; message: string };
    payload?: Record<string, unknown>;
}

export interface GoodbyeMessage {
    type: "goodbye";
    reason: string;
}

export type ServerMessage = FramePayload | ResponseMessage | GoodbyeMessage;

export interface Command {
    id?: number;
    cmd: string;
    [field: string]: unknown;
}

export interface TrackEvent {
    ph: string;
    start_ms: number;
    dur_ms: number;
}

export function isFrame(msg: ServerMessage): msg is FramePayload {
    return (msg as FramePayload).type === "frame";
}

export function isResponse(msg: ServerMessage): msg is ResponseMessage {
    return (msg as ResponseMessage).status !== undefined;
}

export const clampUnit = (v: number): number => Math.min(1, Math.max(0, v));
export const clampSigned = (v: number): number => Math.min(1, Math.max(-1, v));

/** The 24 action units with presets, in display order. */
export const AU_KEYS = [1, 2, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16,
                        17, 18, 20, 22, 23, 24, 25, 26, 27, 28] as const;

export const AU_LABELS: Record<number, string> = {
    1: "Inner brow raiser", 2: "Outer brow raiser", 4: "Brow lowerer",
    5: "Upper lid raiser", 6: "Cheek raiser", 7: "Lid tightener",
    9: "Nose wrinkler", 10: "Upper lip raiser", 11: "Nasolabial deepener",
    12: "Lip corner puller", 13: "Sharp lip puller", 14: "Dimpler",
    15: "Lip corner depressor", 16: "Lower lip depressor", 17: "Chin raiser",
    18: "Lip pucker", 20: "Lip stretcher", 22: "Lip funneler",
    23: "Lip tightener", 24: "Lip pressor", 25: "Lips part",
    26: "Jaw drop", 27: "Mouth stretch", 28: "Lip suck",
};

export const VISEME_IDS = ["ae", "ar", "b", "d", "ee", "eh", "f", "g", "h", "i",
                           "k", "l", "m", "m2", "n", "ngnk", "oh", "oh2", "ooo"] as const;

export const EMOTIONS = ["happiness", "sadness", "surprise", "fear", "anger", "disgust"] as const;

/** Build commands with clamped values; the UI never sends out-of-range numbers. */
export const commands = {
    subscribe: (): Command => ({ cmd: "Subscribe" }),
    setAu: (au: number, value: number): Command =>
        ({ cmd: "SetAUs", intensities: { [String(au)]: clampUnit(value) } }),
    setViseme: (viseme: string, weight: number): Command =>
        ({ cmd: "SetViseme", viseme, weight: clampUnit(weight) }),
    setHead: (yaw: number, pitch: number, roll: number): Command =>
        ({ cmd: "SetHeadPose", yaw: clampSigned(yaw), pitch: clampSigned(pitch), roll: clampSigned(roll) }),
    setAppearance: (tone: number, age: number): Command =>
        ({ cmd: "SetAppearance", skin_tone: clampUnit(tone), skin_age: clampUnit(age) }),
    setEmotion: (label: string, intensity: number): Command =>
        ({ cmd: "SetEmotion", label, intensity: clampUnit(intensity) }),
    playTrack: (track: TrackEvent[], offsetMs = 0): Command =>
        ({ cmd: "PlayVisemeTrack", track, offset_ms: offsetMs }),
    stopTrack: (): Command => ({ cmd: "StopTrack" }),
    reset: (): Command => ({ cmd: "Reset" }),
};

/** Uniform-duration phoneme track for an utterance (mirror of the server CLI). */
export function textToTrack(
    text: string,
    lexicon: Record<string, string[]>,
    rate = 10,
    wordGapMs = 120,
): TrackEvent[] {
    const duration = Math.max(1, Math.round(1000 / rate));
    const events: TrackEvent[] = [];
    let cursor = 0;
    for (const word of text.split(/\s+/).filter(Boolean)) {
        const phonemes = lexicon[word.toLowerCase()];
        if (!phonemes) {
            throw new Error(`word ${JSON.stringify(word)} not in lexicon`);
        }
        if (events.length > 0) {
            cursor += wordGapMs;
        }
        for (const ph of phonemes) {
            events.push({ ph, start_ms: cursor, dur_ms: duration });
            cursor += duration;
        }
    }
    return events;
}

/** Parse the `word: ph1 ph2 ...` lexicon file format. */
export function parseLexicon(text: string): Record<string, string[]> {
    const lexicon: Record<string, string[]> = {};
    for (const raw of text.split("\n")) {
        const line = raw.trim();
        if (!line || line.startsWith("#")) continue;
        const sep = line.indexOf(":");
        if (sep < 1) continue;
        const word = line.slice(0, sep).trim().toLowerCase();
        const phonemes = line.slice(sep + 1).trim().split(/\s+/).filter(Boolean);
        if (word && phonemes.length > 0) {
            lexicon[word] = phonemes;
        }
    }
    return lexicon;
}

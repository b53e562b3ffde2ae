/**
 * Console bootstrap: connect to the server named by `?server=host:port`
 * (WebSocket port), render incoming frames to the canvas, and wire the
 * control panel through the drag-coalescing throttle.
 */

import { RigConnection } from "./connection.js";
import { drawFace } from "./draw.js";
import { ControlPanel } from "./panel.js";
import { renderFace } from "./projection.js";
import { commands, parseLexicon, textToTrack } from "./protocol.js";
import { UiSessionState } from "./state.js";
import { CommandThrottle } from "./throttle.js";

const TICK_MS = 1000 / 60;  // coalesce drags to at most the server tick rate

function serverUrl(): string {
    const params = new URLSearchParams(window.location.search);
    const server = params.get("server") ?? `${window.location.hostname || "127.0.0.1"}:4619`;
    return `ws://${server}/ws`;
}

function setBanner(text: string, kind: "ok" | "warn" | "error"): void {
    const banner = document.getElementById("status-banner")!;
    banner.textContent = text;
    banner.dataset.kind = kind;
}

async function loadLexicon(): Promise<Record<string, string[]>> {
    try {
        const response = await fetch("./lexicon.txt");
        return parseLexicon(await response.text());
    } catch {
        setBanner("lexicon.txt not found; Say disabled", "warn");
        return {};
    }
}

async function start(): Promise<void> {
    const canvas = document.getElementById("face") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    const state = new UiSessionState();
    const lexicon = await loadLexicon();

    const connection = new RigConnection(serverUrl(), {
        onFrame: (frame) => {
            state.applyFrame(frame);
            drawFace(ctx, renderFace(frame, canvas.width, canvas.height));
            panel.refresh(state);
            document.getElementById("tick-readout")!.textContent =
                `tick ${frame.tick}` + (frame.lipsync_active ? " · lip sync" : "");
        },
        onStatus: (status, detail) => {
            state.status = status;
            const text = detail ? `${status} (${detail})` : status;
            setBanner(`${serverUrl()} — ${text}`, status === "connected" ? "ok" : "warn");
        },
        onResponseError: (resp) => {
            setBanner(`server rejected command: ${resp.error?.code} ${resp.error?.message}`, "error");
        },
    });

    const throttle = new CommandThrottle(TICK_MS, (controlId, value) => {
        const v = value as number;
        const [kind, key] = controlId.split(":", 2);
        if (kind === "au") {
            connection.send(commands.setAu(Number(key), v));
        } else if (kind === "viseme") {
            connection.send(commands.setViseme(key, v));
        } else if (kind === "head") {
            const head = {
                yaw: state.displayValue("head:yaw") ?? 0,
                pitch: state.displayValue("head:pitch") ?? 0,
                roll: state.displayValue("head:roll") ?? 0,
                [key]: v,
            };
            connection.send(commands.setHead(head.yaw, head.pitch, head.roll));
        } else if (kind === "appearance") {
            const tone = key === "skin_tone" ? v : state.displayValue("appearance:skin_tone") ?? 0.5;
            const age = key === "skin_age" ? v : state.displayValue("appearance:skin_age") ?? 0.0;
            connection.send(commands.setAppearance(tone, age));
        }
    });

    const panel = new ControlPanel(
        document.getElementById("controls")!,
        (controlId, value) => {
            state.setPending(controlId, value);
            throttle.update(controlId, value);
        },
        (action, detail) => {
            if (action === "emotion") {
                connection.send(commands.setEmotion(detail.label as string, detail.intensity as number));
            } else if (action === "say") {
                try {
                    const track = textToTrack(detail.text as string, lexicon);
                    if (track.length > 0) {
                        connection.send(commands.playTrack(track));
                    }
                } catch (err) {
                    setBanner(String(err), "error");
                }
            } else if (action === "reset") {
                connection.send(commands.reset());
            }
        },
    );

    connection.open();
}

start();

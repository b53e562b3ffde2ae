import { describe, expect, it } from "vitest";

import { RigConnection, WebSocketLike } from "../src/connection.js";
import { FramePayload } from "../src/protocol.js";

class FakeWebSocket implements WebSocketLike {
    static instances: FakeWebSocket[] = [];
    readyState = 0;
    sent: string[] = [];
    onopen: ((ev?: unknown) => void) | null = null;
    onclose: ((ev?: unknown) => void) | null = null;
    onerror: ((ev?: unknown) => void) | null = null;
    onmessage: ((ev: { data: string }) => void) | null = null;

    constructor(public url: string) {
        FakeWebSocket.instances.push(this);
    }

    send(data: string): void {
        this.sent.push(data);
    }

    close(): void {
        this.readyState = 3;
        this.onclose?.();
    }

    serverOpen(): void {
        this.readyState = 1;
        this.onopen?.();
    }

    serverMessage(obj: unknown): void {
        this.onmessage?.({ data: JSON.stringify(obj) });
    }
}

function harness() {
    FakeWebSocket.instances = [];
    const frames: FramePayload[] = [];
    const statuses: string[] = [];
    const timers: Array<() => void> = [];
    const connection = new RigConnection(
        "ws://127.0.0.1:4619/ws",
        {
            onFrame: (f) => frames.push(f),
            onStatus: (s) => statuses.push(s),
        },
        (url) => new FakeWebSocket(url),
        (fn) => {
            timers.push(fn);
            return 0 as unknown as ReturnType<typeof setTimeout>;
        },
    );
    return { connection, frames, statuses, timers, sockets: () => FakeWebSocket.instances };
}

describe("RigConnection", () => {
    it("subscribes on open and surfaces frames", () => {
        const { connection, frames, statuses, sockets } = harness();
        connection.open();
        const ws = sockets()[0];
        ws.serverOpen();
        expect(JSON.parse(ws.sent[0])).toMatchObject({ cmd: "Subscribe" });
        ws.serverMessage({ type: "frame", tick: 1, bones: {}, head: { yaw: 0, pitch: 0, roll: 0 } });
        expect(frames).toHaveLength(1);
        expect(statuses).toEqual(["connecting", "connected"]);
    });

    it("retries with backoff and resubscribes after reconnect", () => {
        const { connection, statuses, timers, sockets } = harness();
        connection.open();
        sockets()[0].serverOpen();
        sockets()[0].close();  // server went away
        expect(statuses.at(-1)).toBe("retrying");
        expect(timers).toHaveLength(1);
        timers.pop()!();  // backoff timer fires -> new socket
        const ws2 = sockets()[1];
        ws2.serverOpen();
        expect(JSON.parse(ws2.sent[0])).toMatchObject({ cmd: "Subscribe" });
        expect(statuses.at(-1)).toBe("connected");
    });

    it("drops sends while offline instead of throwing", () => {
        const { connection } = harness();
        connection.open();  // not open yet
        expect(connection.send({ cmd: "Reset" })).toBeNull();
    });

    it("assigns increasing ids", () => {
        const { connection, sockets } = harness();
        connection.open();
        const ws = sockets()[0];
        ws.serverOpen();
        connection.send({ cmd: "Reset" });
        connection.send({ cmd: "StopTrack" });
        const ids = ws.sent.map(s => JSON.parse(s).id);
        expect(ids).toEqual([1, 2, 3]);  // Subscribe took id 1
    });

    it("stays closed after an explicit close", () => {
        const { connection, statuses, timers, sockets } = harness();
        connection.open();
        sockets()[0].serverOpen();
        connection.close();
        expect(statuses.at(-1)).toBe("closed");
        expect(timers).toHaveLength(0);  // no reconnect scheduled
    });
});

/**
 * WebSocket client: subscribes on open, auto-reconnects with exponential
 * backoff, resubscribes after a server restart, and routes frames,
 * responses, and errors to callbacks.
 */

import { Command, ServerMessage, isFrame, isResponse, FramePayload, ResponseMessage } from "./protocol.js";

export interface ConnectionCallbacks {
    onFrame: (frame: FramePayload) => void;
    onStatus: (status: "connecting" | "connected" | "retrying" | "closed", detail?: string) => void;
    onResponseError?: (resp: ResponseMessage) => void;
}

export interface WebSocketLike {
    readyState: number;
    send(data: string): void;
    close(): void;
    onopen: ((ev?: unknown) => void) | null;
    onclose: ((ev?: unknown) => void) | null;
    onerror: ((ev?: unknown) => void) | null;
    onmessage: ((ev: { data: string }) => void) | null;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 10_000;

export class RigConnection {
    private ws: WebSocketLike | null = null;
    private nextId = 1;
    private backoffMs = BACKOFF_START_MS;
    private closed = false;
    private retryTimer: ReturnType<typeof setTimeout> | null = null;

    constructor(
        private url: string,
        private callbacks: ConnectionCallbacks,
        private factory: WebSocketFactory = (url) => new WebSocket(url) as unknown as WebSocketLike,
        private schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
    ) {}

    open(): void {
        this.closed = false;
        this.connect();
    }

    private connect(): void {
        this.callbacks.onStatus("connecting");
        const ws = this.factory(this.url);
        this.ws = ws;
        ws.onopen = () => {
            this.backoffMs = BACKOFF_START_MS;
            this.callbacks.onStatus("connected");
            this.send({ cmd: "Subscribe" });  // resubscribe on every (re)connect
        };
        ws.onmessage = (ev) => this.handleMessage(ev.data);
        ws.onerror = () => { /* onclose follows; status set there */ };
        ws.onclose = () => {
            this.ws = null;
            if (this.closed) {
                this.callbacks.onStatus("closed");
                return;
            }
            this.callbacks.onStatus("retrying", `reconnecting in ${this.backoffMs} ms`);
            this.retryTimer = this.schedule(() => {
                this.retryTimer = null;
                if (!this.closed) this.connect();
            }, this.backoffMs);
            this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        };
    }

    private handleMessage(data: string): void {
        let msg: ServerMessage;
        try {
            msg = JSON.parse(data) as ServerMessage;
        } catch {
            return;
        }
        if (isFrame(msg)) {
            this.callbacks.onFrame(msg);
        } else if (isResponse(msg) && msg.status === "error") {
            this.callbacks.onResponseError?.(msg);
        }
    }

    /** Send a command (id assigned); returns the id, or null if offline. */
    send(cmd: Command): number | null {
        if (!this.ws || this.ws.readyState !== 1 /* OPEN */) {
            return null;
        }
        const id = this.nextId++;
        this.ws.send(JSON.stringify({ id, ...cmd }));
        return id;
    }

    close(): void {
        this.closed = true;
        if (this.retryTimer !== null) clearTimeout(this.retryTimer);
        this.ws?.close();
    }
}

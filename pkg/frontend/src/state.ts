/**
 * Session state for the console: connection status, the last frame, and
 * panel values with pending/echo reconciliation.  While a slider drag is
 * pending, the panel shows the dragged value; once a frame echoes it the
 * panel follows the stream again, so concurrent puppeteers under
 * last-writer-wins don't make the controls fight.
 */

import { FramePayload } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "retrying" | "closed";

const ECHO_EPSILON = 1e-6;

export class UiSessionState {
    status: ConnectionStatus = "connecting";
    lastFrame: FramePayload | null = null;
    lastError: string | null = null;
    pendingRequests = new Set<number>();
    private pendingValues = new Map<string, number>();

    /** Record a locally initiated change awaiting its echo in the stream. */
    setPending(controlId: string, value: number): void {
        this.pendingValues.set(controlId, value);
    }

    /** The value a control should display right now. */
    displayValue(controlId: string): number | null {
        const pending = this.pendingValues.get(controlId);
        if (pending !== undefined) return pending;
        return this.streamValue(controlId);
    }

    /** Value of a control as reported by the last frame, if any. */
    streamValue(controlId: string): number | null {
        const frame = this.lastFrame;
        if (!frame) return null;
        const [kind, key] = controlId.split(":", 2);
        switch (kind) {
            case "au":
                return frame.active_aus.aus[key] ?? 0;
            case "viseme":
                return frame.active_visemes[key] ?? 0;
            case "head":
                return frame.head[key as "yaw" | "pitch" | "roll"];
            case "appearance":
                return key === "skin_tone" ? frame.appearance.skin_tone : frame.appearance.skin_age;
            default:
                return null;
        }
    }

    /** Ingest a frame; clears pendings the stream has caught up with. */
    applyFrame(frame: FramePayload): void {
        this.lastFrame = frame;
        for (const [controlId, pending] of [...this.pendingValues]) {
            const echoed = this.streamValue(controlId);
            if (echoed !== null && Math.abs(echoed - pending) <= ECHO_EPSILON) {
                this.pendingValues.delete(controlId);
            }
        }
    }

    pendingCount(): number {
        return this.pendingValues.size;
    }
}

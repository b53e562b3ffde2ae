/**
 * Per-control command coalescing: at most one send per control per tick
 * interval.  Drag events between sends overwrite the pending value, so the
 * newest position always wins.
 */

export type Sender = (controlId: string, value: unknown) => void;

export class CommandThrottle {
    private lastSent = new Map<string, number>();
    private pending = new Map<string, unknown>();
    private timer: ReturnType<typeof setTimeout> | null = null;

    constructor(
        private intervalMs: number,
        private sender: Sender,
        private now: () => number = () => Date.now(),
        private schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
    ) {}

    update(controlId: string, value: unknown): void {
        const t = this.now();
        const last = this.lastSent.get(controlId);
        if (last === undefined || t - last >= this.intervalMs) {
            this.lastSent.set(controlId, t);
            this.sender(controlId, value);
            return;
        }
        this.pending.set(controlId, value);
        this.armTimer(last + this.intervalMs - t);
    }

    /** Flush due pending values; returns how many were sent. */
    flush(): number {
        const t = this.now();
        let sent = 0;
        for (const [controlId, value] of [...this.pending]) {
            const last = this.lastSent.get(controlId) ?? 0;
            if (t - last >= this.intervalMs) {
                this.pending.delete(controlId);
                this.lastSent.set(controlId, t);
                this.sender(controlId, value);
                sent += 1;
            }
        }
        if (this.pending.size > 0) {
            this.armTimer(this.intervalMs / 2);
        }
        return sent;
    }

    private armTimer(delayMs: number): void {
        if (this.timer !== null) return;
        this.timer = this.schedule(() => {
            this.timer = null;
            this.flush();
        }, Math.max(1, delayMs));
    }
}

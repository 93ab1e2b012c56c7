// WebSocket client for the station: latest-snapshot telemetry mirror plus
// request/response command submission.
//
// The station answers every command message with exactly one ack or reject,
// in order, so a FIFO of pending promises is enough to correlate them. The
// injectable socket constructor lets tests (and the node-based integration
// test) substitute the `ws` package for the browser WebSocket.

import {
    Ack,
    Reject,
    ServerMessage,
    TelemetrySnapshot,
    parseServerMessage,
} from "./protocol.js";

export const STALE_AFTER_MS = 5000;

export interface SocketLike {
    send(data: string): void;
    close(): void;
    addEventListener(type: string, handler: (ev: any) => void): void;
}

export type SocketCtor = new (url: string) => SocketLike;

export interface CommandResult {
    response: Ack | Reject;
    rttMs: number;                      // send -> ack/reject round trip
}

interface PendingCommand {
    sentAtMs: number;
    resolve: (r: CommandResult) => void;
    reject: (e: Error) => void;
}

export class ConsoleClient {
    snapshot: TelemetrySnapshot | null = null;
    connected = false;
    onSnapshot: ((s: TelemetrySnapshot) => void) | null = null;

    private socket: SocketLike;
    private pending: PendingCommand[] = [];
    private lastTelemetryMs = -Infinity;
    private readonly now: () => number;

    constructor(url: string, socketCtor?: SocketCtor, now?: () => number) {
        this.now = now ?? (() => Date.now());
        const Ctor = socketCtor ?? (WebSocket as unknown as SocketCtor);
        this.socket = new Ctor(url);
        this.socket.addEventListener("open", () => {
            this.connected = true;
        });
        this.socket.addEventListener("close", () => {
            this.connected = false;
            this.failPending("connection closed");
        });
        this.socket.addEventListener("error", () => {
            this.connected = false;
        });
        this.socket.addEventListener("message", (ev: any) => {
            this.handleMessage(String(ev.data));
        });
    }

    private handleMessage(raw: string): void {
        let msg: ServerMessage;
        try {
            msg = parseServerMessage(raw);
        } catch {
            return;                     // tolerate unknown message types
        }
        if (msg.type === "telemetry") {
            this.snapshot = msg;        // latest wins; render loop reads this
            this.lastTelemetryMs = this.now();
            this.onSnapshot?.(msg);
            return;
        }
        const pend = this.pending.shift();
        if (pend) {
            pend.resolve({ response: msg, rttMs: this.now() - pend.sentAtMs });
        }
    }

    private failPending(reason: string): void {
        for (const p of this.pending.splice(0)) {
            p.reject(new Error(reason));
        }
    }

    /** Send one command object; resolves with the station's ack or reject. */
    send(command: object): Promise<CommandResult> {
        if (!this.connected) {
            return Promise.reject(new Error("not connected"));
        }
        return new Promise((resolve, reject) => {
            this.pending.push({ sentAtMs: this.now(), resolve, reject });
            this.socket.send(JSON.stringify(command));
        });
    }

    /** Milliseconds since the last telemetry push, Infinity before the first. */
    telemetryAgeMs(nowMs?: number): number {
        return (nowMs ?? this.now()) - this.lastTelemetryMs;
    }

    /** True once telemetry has stopped arriving for STALE_AFTER_MS. */
    isStale(nowMs?: number): boolean {
        return this.telemetryAgeMs(nowMs) > STALE_AFTER_MS;
    }

    close(): void {
        this.socket.close();
    }
}

// WebSocket client for the debrief broadcast room. The server is the single
// source of truth: it sends the full share state on join and on every
// change, tagged with a strictly increasing revision. This client enforces
// revision monotonicity (stale states are dropped) and reconnects with
// state-on-join after connection loss.

import { ServerMessage, ShareItem, StateMessage } from "./types.js";

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: ((ev?: unknown) => void) | null;
    onmessage: ((ev: { data: unknown }) => void) | null;
    onclose: ((ev?: unknown) => void) | null;
    onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface BroadcastOptions {
    socketFactory?: SocketFactory;
    reconnectDelayMs?: number;
    maxReconnects?: number;
}

type StateListener = (state: StateMessage) => void;
type ErrorListener = (error: string, message: string) => void;
type ConnectionListener = (connected: boolean) => void;

export class BroadcastClient {
    public lastRevision = -1;
    public connected = false;

    private socket: SocketLike | null = null;
    private closedByUser = false;
    private reconnects = 0;
    private stateListeners: StateListener[] = [];
    private errorListeners: ErrorListener[] = [];
    private connectionListeners: ConnectionListener[] = [];
    private readonly socketFactory: SocketFactory;
    private readonly reconnectDelayMs: number;
    private readonly maxReconnects: number;

    constructor(
        public readonly url: string,
        options: BroadcastOptions = {},
    ) {
        this.socketFactory =
            options.socketFactory ??
            ((target) => new WebSocket(target) as unknown as SocketLike);
        this.reconnectDelayMs = options.reconnectDelayMs ?? 500;
        this.maxReconnects = options.maxReconnects ?? 20;
    }

    onState(listener: StateListener): void {
        this.stateListeners.push(listener);
    }

    onError(listener: ErrorListener): void {
        this.errorListeners.push(listener);
    }

    onConnection(listener: ConnectionListener): void {
        this.connectionListeners.push(listener);
    }

    connect(): void {
        this.closedByUser = false;
        const socket = this.socketFactory(this.url);
        this.socket = socket;
        socket.onopen = () => {
            this.connected = true;
            this.reconnects = 0;
            this.connectionListeners.forEach((cb) => cb(true));
        };
        socket.onmessage = (ev) => this.handleMessage(String(ev.data));
        socket.onerror = () => {
            // close follows; reconnect is handled there
        };
        socket.onclose = () => {
            this.connected = false;
            this.connectionListeners.forEach((cb) => cb(false));
            if (!this.closedByUser && this.reconnects < this.maxReconnects) {
                this.reconnects += 1;
                setTimeout(() => this.connect(), this.reconnectDelayMs);
            }
        };
    }

    close(): void {
        this.closedByUser = true;
        this.socket?.close();
        this.socket = null;
    }

    private handleMessage(raw: string): void {
        let message: ServerMessage;
        try {
            message = JSON.parse(raw) as ServerMessage;
        } catch {
            return;
        }
        if (message.type === "error") {
            this.errorListeners.forEach((cb) => cb(message.error, message.message));
            return;
        }
        if (message.type === "state") {
            if (message.revision <= this.lastRevision) {
                return; // stale or duplicate revision: never render backwards
            }
            this.lastRevision = message.revision;
            this.stateListeners.forEach((cb) => cb(message));
        }
    }

    private sendJson(payload: Record<string, unknown>): void {
        if (!this.socket || !this.connected) {
            throw new Error("broadcast socket is not connected");
        }
        this.socket.send(JSON.stringify(payload));
    }

    share(items: ShareItem[]): void {
        this.sendJson({ type: "share", items });
    }

    unshare(): void {
        this.sendJson({ type: "unshare" });
    }

    playSnippet(fromMs: number, toMs: number): void {
        this.sendJson({ type: "play_snippet", from_ms: fromMs, to_ms: toMs });
    }
}

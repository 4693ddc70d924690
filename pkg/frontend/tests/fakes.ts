// Shared test doubles: an in-memory fetch backed by a tiny route table and a
// scriptable socket for the broadcast client.

import { SocketLike } from "../src/broadcast.js";

export class FakeSocket implements SocketLike {
    public sent: string[] = [];
    public onopen: ((ev?: unknown) => void) | null = null;
    public onmessage: ((ev: { data: unknown }) => void) | null = null;
    public onclose: ((ev?: unknown) => void) | null = null;
    public onerror: ((ev?: unknown) => void) | null = null;

    send(data: string): void {
        this.sent.push(data);
    }

    close(): void {
        this.onclose?.();
    }

    open(): void {
        this.onopen?.();
    }

    push(message: unknown): void {
        this.onmessage?.({ data: JSON.stringify(message) });
    }
}

export type RouteHandler = (
    url: URL,
    init?: RequestInit,
) => { status?: number; body: unknown } | undefined;

export function fakeFetch(handler: RouteHandler): typeof fetch {
    const impl = async (input: RequestInfo | URL, init?: RequestInit) => {
        const url = new URL(String(input));
        const result = handler(url, init);
        if (result === undefined) {
            return new Response(
                JSON.stringify({ error: { type: "FormatError", message: "no route" } }),
                { status: 404, headers: { "content-type": "application/json" } },
            );
        }
        return new Response(JSON.stringify(result.body), {
            status: result.status ?? 200,
            headers: { "content-type": "application/json" },
        });
    };
    return impl as typeof fetch;
}

// Tagging and annotation view used while observing the live scenario.
// Taps are optimistic: the pin appears immediately and is rolled back with a
// surfaced error when the server rejects it (out-of-order phase, unknown
// action).

import { ApiError, DebriefApi } from "./api.js";
import { ActionDef, Phase } from "./types.js";

export type PinStatus = "pending" | "saved" | "failed";

export interface Pin {
    localId: number;
    tMs: number;
    kind: "PHASE_TAG" | "ACTION_TAG";
    label: string;
    phase?: Phase;
    actionId?: string;
    note?: string;
    favorite: boolean;
    status: PinStatus;
    serverId?: string;
    error?: string;
}

export class TaggingView {
    public pins: Pin[] = [];
    public catalog: ActionDef[] = [];

    private nextLocalId = 1;
    private listeners: ((view: TaggingView) => void)[] = [];

    constructor(
        private readonly api: DebriefApi,
        public readonly sessionId: string,
    ) {}

    onChange(listener: (view: TaggingView) => void): void {
        this.listeners.push(listener);
    }

    private emit(): void {
        this.listeners.forEach((cb) => cb(this));
    }

    async load(): Promise<void> {
        this.catalog = (await this.api.getCatalog(this.sessionId)).actions;
        this.emit();
    }

    private addPin(pin: Omit<Pin, "localId" | "status">): Pin {
        const full: Pin = { ...pin, localId: this.nextLocalId++, status: "pending" };
        this.pins.push(full);
        this.emit();
        return full;
    }

    private settle(pin: Pin, serverId: string): void {
        pin.status = "saved";
        pin.serverId = serverId;
        this.emit();
    }

    private rollback(pin: Pin, error: unknown): string {
        this.pins = this.pins.filter((p) => p.localId !== pin.localId);
        const message =
            error instanceof ApiError ? `${error.errorType}: ${error.message}` : String(error);
        this.emit();
        return message;
    }

    async tapPhase(
        phase: Phase,
        tMs: number,
        note?: string,
    ): Promise<{ ok: boolean; error?: string }> {
        const pin = this.addPin({
            tMs,
            kind: "PHASE_TAG",
            label: phase,
            phase,
            note,
            favorite: false,
        });
        try {
            const saved = await this.api.postAnnotation(this.sessionId, {
                kind: "PHASE_TAG",
                phase,
                t_ms: tMs,
                note,
            });
            this.settle(pin, saved.id);
            return { ok: true };
        } catch (error) {
            return { ok: false, error: this.rollback(pin, error) };
        }
    }

    async tapAction(
        actionId: string,
        tMs: number,
        note?: string,
        favorite = false,
    ): Promise<{ ok: boolean; error?: string }> {
        const action = this.catalog.find((a) => a.action_id === actionId);
        const pin = this.addPin({
            tMs,
            kind: "ACTION_TAG",
            label: action?.label ?? actionId,
            actionId,
            note,
            favorite,
        });
        try {
            const saved = await this.api.postAnnotation(this.sessionId, {
                kind: "ACTION_TAG",
                action_id: actionId,
                t_ms: tMs,
                note,
                favorite,
            });
            this.settle(pin, saved.id);
            return { ok: true };
        } catch (error) {
            return { ok: false, error: this.rollback(pin, error) };
        }
    }

    savedPins(): Pin[] {
        return this.pins.filter((p) => p.status === "saved");
    }
}

// Debrief control view: the educator's all-in-one screen. Owns the selected
// time window (phase chip or custom), refreshes the four preview payloads,
// tracks the snippet target, and drives the projector via the broadcast room.

import { DebriefApi } from "./api.js";
import { BroadcastClient } from "./broadcast.js";
import {
    AnalyticsPayload,
    AnnotationRecord,
    NAMED_PHASES,
    PREVIEW_VIZ,
    Phase,
    ShareItem,
    SnippetRange,
    TimeWindow,
    Timeline,
    VizId,
} from "./types.js";

const MAX_SELECTED = 3;

export interface ControlSnapshot {
    phase: Phase;
    window: TimeWindow | null;
    previews: Partial<Record<VizId, AnalyticsPayload>>;
    selectedViz: VizId[];
    snippet: SnippetRange | null;
    sharedRevision: number;
    connected: boolean;
    pins: AnnotationRecord[];
}

export class ControlView {
    public timeline: Timeline | null = null;
    public pins: AnnotationRecord[] = [];
    public selectedPhase: Phase = "ALL";
    public window: TimeWindow | null = null;
    public previews: Partial<Record<VizId, AnalyticsPayload>> = {};
    public snippet: SnippetRange | null = null;
    public selectedViz: VizId[] = [];
    public sharedRevision = -1;

    private listeners: ((view: ControlView) => void)[] = [];

    constructor(
        private readonly api: DebriefApi,
        private readonly broadcast: BroadcastClient,
        public readonly sessionId: string,
    ) {
        broadcast.onState((state) => {
            this.sharedRevision = state.revision;
            this.emit();
        });
    }

    onChange(listener: (view: ControlView) => void): void {
        this.listeners.push(listener);
    }

    private emit(): void {
        this.listeners.forEach((cb) => cb(this));
    }

    async load(): Promise<void> {
        this.timeline = await this.api.getTimeline(this.sessionId);
        this.pins = await this.api.getAnnotations(this.sessionId);
        this.window = this.phaseWindow("ALL");
        this.emit();
    }

    async refreshTimeline(): Promise<void> {
        this.timeline = await this.api.getTimeline(this.sessionId);
        this.pins = await this.api.getAnnotations(this.sessionId);
        this.emit();
    }

    /** Resolve a phase chip to its window, or null when the marker is unset
     * (unset chips render disabled, so no invalid query is ever issued). */
    phaseWindow(phase: Phase): TimeWindow | null {
        const t = this.timeline;
        if (t === null) {
            return null;
        }
        if (phase === "ALL") {
            return { from_ms: 0, to_ms: t.end_ms };
        }
        const markers: Record<Phase, number | null> = {
            ALL: 0,
            P1_HANDOVER_ENDS: t.handover_ends_ms,
            P2_SN_ENTER: t.sn_enter_ms,
            P3_DOCTOR_ENTER: t.doctor_enter_ms,
        };
        const start = markers[phase];
        if (start === null) {
            return null;
        }
        let end = t.end_ms;
        for (const later of NAMED_PHASES.slice(NAMED_PHASES.indexOf(phase) + 1)) {
            const value = markers[later];
            if (value !== null) {
                end = value;
                break;
            }
        }
        return { from_ms: start, to_ms: end };
    }

    enabledPhases(): Phase[] {
        const phases: Phase[] = ["ALL"];
        for (const phase of NAMED_PHASES) {
            if (this.phaseWindow(phase) !== null) {
                phases.push(phase);
            }
        }
        return phases;
    }

    async selectPhase(phase: Phase): Promise<void> {
        const window = this.phaseWindow(phase);
        if (window === null) {
            throw new Error(`phase ${phase} has no marker yet`);
        }
        this.selectedPhase = phase;
        this.window = window;
        await this.refreshPreviews();
        void this.api
            .postInteraction(this.sessionId, "select_phase", { phase })
            .catch(() => undefined);
    }

    async selectWindow(fromMs: number, toMs: number): Promise<void> {
        const end = this.timeline?.end_ms ?? toMs;
        const window = {
            from_ms: Math.max(0, Math.min(fromMs, end)),
            to_ms: Math.max(0, Math.min(toMs, end)),
        };
        if (window.to_ms < window.from_ms) {
            window.to_ms = window.from_ms;
        }
        this.window = window;
        await this.refreshPreviews();
        void this.api
            .postInteraction(this.sessionId, "select_window", window)
            .catch(() => undefined);
    }

    /** Selecting an annotation pin targets the snippet control at the
     * surrounding 20-second range and refreshes the previews. */
    async selectPin(pin: AnnotationRecord): Promise<void> {
        this.snippet = await this.api.getSnippet(this.sessionId, pin.t_ms);
        await this.refreshPreviews();
        this.emit();
    }

    async refreshPreviews(): Promise<void> {
        const window = this.window;
        if (window === null || window.to_ms <= window.from_ms) {
            this.previews = {};
            this.emit();
            return;
        }
        const entries = await Promise.all(
            PREVIEW_VIZ.map(async (viz) => {
                const payload = await this.api.getAnalytics(
                    this.sessionId,
                    viz as Exclude<VizId, "snippet">,
                    window,
                );
                return [viz, payload] as const;
            }),
        );
        this.previews = Object.fromEntries(entries);
        this.emit();
    }

    canToggle(viz: VizId): boolean {
        return (
            this.selectedViz.includes(viz) || this.selectedViz.length < MAX_SELECTED
        );
    }

    toggleViz(viz: VizId): boolean {
        const index = this.selectedViz.indexOf(viz);
        if (index >= 0) {
            this.selectedViz.splice(index, 1);
            this.emit();
            return true;
        }
        if (this.selectedViz.length >= MAX_SELECTED) {
            return false; // the fourth checkbox stays disabled
        }
        this.selectedViz.push(viz);
        this.emit();
        return true;
    }

    canShare(): boolean {
        return (
            this.broadcast.connected &&
            this.window !== null &&
            this.selectedViz.length >= 1 &&
            this.selectedViz.length <= MAX_SELECTED
        );
    }

    share(): void {
        if (!this.canShare() || this.window === null) {
            throw new Error("share needs 1..3 selected visualizations");
        }
        const window = this.window;
        const items: ShareItem[] = this.selectedViz.map((viz) => ({
            viz,
            from_ms: window.from_ms,
            to_ms: window.to_ms,
        }));
        this.broadcast.share(items);
        void this.api
            .postInteraction(this.sessionId, "share", { items })
            .catch(() => undefined);
    }

    unshare(): void {
        this.broadcast.unshare();
        void this.api
            .postInteraction(this.sessionId, "unshare", {})
            .catch(() => undefined);
    }

    playSnippet(): void {
        if (this.snippet === null) {
            throw new Error("no snippet selected");
        }
        this.broadcast.playSnippet(this.snippet.from_ms, this.snippet.to_ms);
        void this.api
            .postInteraction(this.sessionId, "play_snippet", { ...this.snippet })
            .catch(() => undefined);
    }

    snapshot(): ControlSnapshot {
        return {
            phase: this.selectedPhase,
            window: this.window,
            previews: this.previews,
            selectedViz: [...this.selectedViz],
            snippet: this.snippet,
            sharedRevision: this.sharedRevision,
            connected: this.broadcast.connected,
            pins: [...this.pins],
        };
    }
}

// Wire types shared with the debriefkit service. Field names mirror the
// server's JSON exactly; the client adds no analytics of its own.

export type VizId = "priority" | "wardmap" | "sociogram" | "network" | "snippet";

export const PREVIEW_VIZ: VizId[] = ["priority", "wardmap", "sociogram", "network"];

export type Phase = "ALL" | "P1_HANDOVER_ENDS" | "P2_SN_ENTER" | "P3_DOCTOR_ENTER";

export const NAMED_PHASES: Phase[] = [
    "P1_HANDOVER_ENDS",
    "P2_SN_ENTER",
    "P3_DOCTOR_ENTER",
];

export interface TimeWindow {
    from_ms: number;
    to_ms: number;
}

export interface Timeline {
    session_id: string;
    status: "recording" | "sealed";
    start_ms: number;
    handover_ends_ms: number | null;
    sn_enter_ms: number | null;
    doctor_enter_ms: number | null;
    end_ms: number;
}

export interface ShareItem {
    viz: VizId;
    from_ms: number;
    to_ms: number;
}

export interface StateMessage {
    type: "state";
    revision: number;
    items: ShareItem[];
}

export interface ErrorMessage {
    type: "error";
    error: string;
    message: string;
}

export type ServerMessage = StateMessage | ErrorMessage;

export interface AnnotationRecord {
    id: string;
    t_ms: number;
    kind: "PHASE_TAG" | "ACTION_TAG";
    phase?: Phase;
    action_id?: string;
    note?: string;
    favorite: boolean;
    author: string;
}

export interface ActionDef {
    action_id: string;
    label: string;
    phase_hint: Phase;
}

export interface SnippetRange {
    from_ms: number;
    to_ms: number;
}

// Analytics payloads: the client treats them as render data, so only the
// fields the renderers touch are typed.
export interface PriorityPayload {
    viz: "priority";
    window: TimeWindow;
    fractions: Record<string, number>;
    labels: Record<string, string>;
    tick_count: number;
    empty: boolean;
}

export interface WardMapCell {
    entity: string;
    q: number;
    r: number;
    sample_count: number;
    voice_fraction: number;
    filled: boolean;
}

export interface WardMapPayload {
    viz: "wardmap";
    window: TimeWindow;
    hex_radius_mm: number;
    cells: WardMapCell[];
}

export interface SociogramPayload {
    viz: "sociogram";
    window: TimeWindow;
    nodes: Record<string, number>;
    edges: { from: string; to: string; ms: number }[];
}

export interface NetworkPayload {
    viz: "network";
    window: TimeWindow;
    node_counts: Record<string, number>;
    edge_counts: { codes: [string, string]; count: number }[];
    window_size: number;
}

export type AnalyticsPayload =
    | PriorityPayload
    | WardMapPayload
    | SociogramPayload
    | NetworkPayload;

export const ROLE_COLORS: Record<string, string> = {
    PN1: "red",
    PN2: "blue",
    SN1: "green",
    SN2: "yellow",
    DOCTOR: "purple",
    PATIENT: "grey",
    RELATIVE: "brown",
};

// Browser entry point. Hash routes pick the view:
//   #/tag/<sessionId>      tagging and annotation view (during the scenario)
//   #/control/<sessionId>  debrief control view
//   #/screen/<sessionId>   shared projector screen
// The API base defaults to the page origin; override with ?api=<url>.

import { DebriefApi } from "./api.js";
import { BroadcastClient } from "./broadcast.js";
import { ControlView } from "./control.js";
import { renderPayload, renderSnippetCard } from "./render.js";
import { SharedScreen } from "./shared.js";
import { TaggingView } from "./tagging.js";
import { AnalyticsPayload, PREVIEW_VIZ, Phase, ShareItem, VizId } from "./types.js";

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, value);
    }
    if (text) {
        node.textContent = text;
    }
    return node;
}

function apiBase(): string {
    const override = new URLSearchParams(location.search).get("api");
    return override ?? location.origin;
}

function wsUrl(sessionId: string): string {
    const base = apiBase().replace(/^http/, "ws");
    return `${base}/ws/debrief/${sessionId}`;
}

function route(): { view: string; sessionId: string } {
    const match = location.hash.match(/^#\/(tag|control|screen)\/([\w-]+)/);
    if (!match) {
        return { view: "help", sessionId: "" };
    }
    return { view: match[1], sessionId: match[2] };
}

function mountHelp(root: HTMLElement): void {
    root.append(
        el("h1", {}, "debriefkit"),
        el(
            "p",
            {},
            "Open #/tag/<session>, #/control/<session> or #/screen/<session>.",
        ),
    );
}

async function mountTagging(root: HTMLElement, sessionId: string): Promise<void> {
    const api = new DebriefApi(apiBase());
    const view = new TaggingView(api, sessionId);
    const phaseRow = el("div", { class: "row" });
    const actionRow = el("div", { class: "row" });
    const pinList = el("ul", { class: "pins" });
    const toast = el("div", { class: "toast" });
    root.append(el("h1", {}, `Tagging - ${sessionId}`), phaseRow, actionRow, toast, pinList);

    const phases: Phase[] = ["P1_HANDOVER_ENDS", "P2_SN_ENTER", "P3_DOCTOR_ENTER"];
    const startedAt = Date.now();
    const now = () => Date.now() - startedAt;
    for (const phase of phases) {
        const button = el("button", {}, phase.replace(/_/g, " "));
        button.addEventListener("click", async () => {
            const result = await view.tapPhase(phase, now());
            toast.textContent = result.ok ? "" : result.error ?? "rejected";
        });
        phaseRow.append(button);
    }
    await view.load();
    for (const action of view.catalog) {
        const button = el("button", {}, action.label);
        button.addEventListener("click", async () => {
            const result = await view.tapAction(action.action_id, now());
            toast.textContent = result.ok ? "" : result.error ?? "rejected";
        });
        actionRow.append(button);
    }
    view.onChange(() => {
        pinList.replaceChildren(
            ...view.pins.map((pin) =>
                el(
                    "li",
                    { class: `pin ${pin.status}` },
                    `${(pin.tMs / 1000).toFixed(1)}s ${pin.label}` +
                        (pin.note ? ` - ${pin.note}` : ""),
                ),
            ),
        );
    });
}

async function mountControl(root: HTMLElement, sessionId: string): Promise<void> {
    const api = new DebriefApi(apiBase());
    const broadcast = new BroadcastClient(wsUrl(sessionId));
    const control = new ControlView(api, broadcast, sessionId);

    const chipRow = el("div", { class: "row chips" });
    const grid = el("div", { class: "grid" });
    const shareRow = el("div", { class: "row" });
    const status = el("div", { class: "status" });
    root.append(el("h1", {}, `Debrief control - ${sessionId}`), chipRow, grid, shareRow, status);

    const panes = new Map<VizId, HTMLElement>();
    for (const viz of PREVIEW_VIZ) {
        const pane = el("figure", { class: "preview" });
        const checkbox = el("input", { type: "checkbox" }) as HTMLInputElement;
        checkbox.addEventListener("change", () => {
            if (!control.toggleViz(viz)) {
                checkbox.checked = false;
            }
        });
        const caption = el("figcaption", {}, viz);
        caption.prepend(checkbox);
        const body = el("div", { class: "preview-body" });
        pane.append(caption, body);
        panes.set(viz, pane);
        grid.append(pane);
    }

    const shareButton = el("button", {}, "add to projector") as HTMLButtonElement;
    shareButton.addEventListener("click", () => control.share());
    const unshareButton = el("button", {}, "stop sharing") as HTMLButtonElement;
    unshareButton.addEventListener("click", () => control.unshare());
    shareRow.append(shareButton, unshareButton);

    control.onChange(() => {
        for (const viz of PREVIEW_VIZ) {
            const payload = control.previews[viz] as AnalyticsPayload | undefined;
            const body = panes.get(viz)!.querySelector(".preview-body")!;
            body.innerHTML = payload ? renderPayload(payload) : "";
        }
        shareButton.disabled = !control.canShare();
        status.textContent =
            `window ${control.window?.from_ms ?? "-"}..${control.window?.to_ms ?? "-"} ` +
            `| shared revision ${control.sharedRevision}` +
            (control.snippet
                ? ` | snippet ${control.snippet.from_ms}..${control.snippet.to_ms}`
                : "");
        chipRow.replaceChildren(
            ...(["ALL", "P1_HANDOVER_ENDS", "P2_SN_ENTER", "P3_DOCTOR_ENTER"] as Phase[]).map(
                (phase) => {
                    const chip = el("button", { class: "chip" }, phase) as HTMLButtonElement;
                    chip.disabled = control.phaseWindow(phase) === null;
                    chip.addEventListener("click", () => void control.selectPhase(phase));
                    return chip;
                },
            ),
            ...control.pins.map((pin) => {
                const button = el(
                    "button",
                    { class: "pin-chip" },
                    `${(pin.t_ms / 1000).toFixed(0)}s ${pin.action_id ?? pin.phase}`,
                );
                button.addEventListener("click", () => void control.selectPin(pin));
                return button;
            }),
        );
    });

    broadcast.connect();
    await control.load();
    await control.selectPhase("ALL");
}

function mountScreen(root: HTMLElement, sessionId: string): void {
    const broadcast = new BroadcastClient(wsUrl(sessionId));
    const screen = new SharedScreen();
    const stage = el("div", { class: "stage idle" });
    root.append(stage);
    const api = new DebriefApi(apiBase());

    screen.onChange(async () => {
        stage.className = `stage ${screen.layout()}`;
        const panes = await Promise.all(
            screen.items.map(async (item: ShareItem) => {
                const pane = el("div", { class: "pane" });
                if (item.viz === "snippet") {
                    pane.innerHTML = renderSnippetCard(item);
                } else {
                    const payload = await api.getAnalytics(sessionId, item.viz, {
                        from_ms: item.from_ms,
                        to_ms: item.to_ms,
                    });
                    pane.innerHTML = renderPayload(payload);
                }
                return pane;
            }),
        );
        stage.replaceChildren(...panes);
        if (screen.items.length === 0) {
            stage.append(el("p", { class: "idle-card" }, "waiting for the educator"));
        }
    });
    screen.attach(broadcast);
    broadcast.connect();
}

async function boot(): Promise<void> {
    const root = document.getElementById("app")!;
    root.replaceChildren();
    const { view, sessionId } = route();
    if (view === "tag") {
        await mountTagging(root, sessionId);
    } else if (view === "control") {
        await mountControl(root, sessionId);
    } else if (view === "screen") {
        mountScreen(root, sessionId);
    } else {
        mountHelp(root);
    }
}

window.addEventListener("hashchange", () => void boot());
void boot();

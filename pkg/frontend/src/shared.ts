// Shared (projector) screen state: renders exactly the items of the latest
// revision, never more than three, and decides the pane layout.

import { BroadcastClient } from "./broadcast.js";
import { ShareItem, StateMessage } from "./types.js";

export type PaneLayout = "idle" | "single" | "two-up" | "primary-stack";

export class SharedScreen {
    public revision = -1;
    public items: ShareItem[] = [];

    private listeners: ((screen: SharedScreen) => void)[] = [];

    onChange(listener: (screen: SharedScreen) => void): void {
        this.listeners.push(listener);
    }

    /** Apply a state message; stale revisions are discarded. */
    apply(message: StateMessage): boolean {
        if (message.revision <= this.revision) {
            return false;
        }
        this.revision = message.revision;
        this.items = message.items.slice(0, 3); // defensive: the invariant is server-side
        this.listeners.forEach((cb) => cb(this));
        return true;
    }

    /** 1 item fills the screen, 2 sit side by side, 3 get one large + two stacked. */
    layout(): PaneLayout {
        switch (this.items.length) {
            case 0:
                return "idle";
            case 1:
                return "single";
            case 2:
                return "two-up";
            default:
                return "primary-stack";
        }
    }

    attach(broadcast: BroadcastClient): void {
        broadcast.onState((message) => this.apply(message));
    }
}

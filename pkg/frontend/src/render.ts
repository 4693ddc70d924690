// SVG builders for the four payloads. Pure functions from server JSON to
// markup; no analytics happen here.

import {
    AnalyticsPayload,
    NetworkPayload,
    PriorityPayload,
    ROLE_COLORS,
    ShareItem,
    SociogramPayload,
    WardMapPayload,
} from "./types.js";

const W = 480;
const H = 360;

function svg(body: string[]): string {
    return (
        `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" ` +
        `width="100%" height="100%">` +
        body.join("") +
        `</svg>`
    );
}

function ringPositions(names: string[]): Map<string, [number, number]> {
    const out = new Map<string, [number, number]>();
    const cx = W / 2;
    const cy = H / 2;
    const radius = Math.min(W, H) / 2 - 50;
    names.forEach((name, i) => {
        const angle = (2 * Math.PI * i) / names.length - Math.PI / 2;
        out.set(name, [cx + radius * Math.cos(angle), cy + radius * Math.sin(angle)]);
    });
    return out;
}

export function renderPriority(payload: PriorityPayload): string {
    const names = Object.keys(payload.fractions).sort();
    const slot = (W - 40) / names.length;
    const base = H - 60;
    const parts: string[] = [];
    names.forEach((name, i) => {
        const fraction = payload.fractions[name];
        const height = (base - 20) * fraction;
        const x = 20 + i * slot + slot * 0.15;
        parts.push(
            `<rect x="${x.toFixed(1)}" y="${(base - height).toFixed(1)}" ` +
                `width="${(slot * 0.7).toFixed(1)}" height="${height.toFixed(1)}" fill="#4878a8"/>`,
        );
        parts.push(
            `<text x="${(x + slot * 0.35).toFixed(1)}" y="${(base - height - 4).toFixed(1)}" ` +
                `font-size="9" text-anchor="middle">${(fraction * 100).toFixed(0)}%</text>`,
        );
        const label = (payload.labels?.[name] ?? name).slice(0, 18);
        parts.push(
            `<text x="${(x + slot * 0.35).toFixed(1)}" y="${base + 12}" font-size="7" ` +
                `text-anchor="middle">${label}</text>`,
        );
    });
    parts.push(`<line x1="20" y1="${base}" x2="${W - 20}" y2="${base}" stroke="#333"/>`);
    return svg(parts);
}

export function renderWardMap(payload: WardMapPayload): string {
    const radius = payload.hex_radius_mm;
    // room extents inferred from the data; the engine keeps cells near the room
    const scale = 0.04;
    const parts: string[] = [];
    for (const cell of payload.cells) {
        const cx = radius * (Math.sqrt(3) * cell.q + (Math.sqrt(3) / 2) * cell.r);
        const cy = radius * 1.5 * cell.r;
        const points: string[] = [];
        for (let k = 0; k < 6; k++) {
            const angle = (Math.PI / 180) * (60 * k - 30);
            const px = (cx + radius * Math.cos(angle)) * scale + 30;
            const py = H - 30 - (cy + radius * Math.sin(angle)) * scale;
            points.push(`${px.toFixed(1)},${py.toFixed(1)}`);
        }
        const color = ROLE_COLORS[cell.entity] ?? "black";
        const opacity = cell.filled ? 0.85 : 0.25;
        parts.push(
            `<polygon points="${points.join(" ")}" fill="${color}" ` +
                `fill-opacity="${opacity}" stroke="${color}"/>`,
        );
    }
    return svg(parts);
}

export function renderSociogram(payload: SociogramPayload): string {
    const names = Object.keys(payload.nodes).sort();
    if (names.length === 0) {
        return svg([
            `<text x="${W / 2}" y="${H / 2}" text-anchor="middle" font-size="14">no speech in window</text>`,
        ]);
    }
    const positions = ringPositions(names);
    const maxMs = Math.max(1, ...Object.values(payload.nodes));
    const maxEdge = Math.max(1, ...payload.edges.map((e) => e.ms));
    const parts: string[] = [];
    for (const edge of payload.edges) {
        const [x1, y1] = positions.get(edge.from)!;
        const [x2, y2] = positions.get(edge.to)!;
        const width = 1 + (4 * edge.ms) / maxEdge;
        parts.push(
            `<line x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" ` +
                `y2="${y2.toFixed(1)}" stroke="#555" stroke-width="${width.toFixed(1)}"/>`,
        );
    }
    for (const name of names) {
        const [x, y] = positions.get(name)!;
        const r = 8 + 16 * Math.sqrt(payload.nodes[name] / maxMs);
        const color = ROLE_COLORS[name] ?? "black";
        parts.push(
            `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${r.toFixed(1)}" ` +
                `fill="${color}" fill-opacity="0.8" stroke="black"/>`,
        );
        parts.push(
            `<text x="${x.toFixed(1)}" y="${(y + r + 11).toFixed(1)}" font-size="10" ` +
                `text-anchor="middle">${name}</text>`,
        );
    }
    return svg(parts);
}

export function renderNetwork(payload: NetworkPayload): string {
    const names = Object.keys(payload.node_counts).sort();
    if (names.length === 0) {
        return svg([
            `<text x="${W / 2}" y="${H / 2}" text-anchor="middle" font-size="14">no coded utterances</text>`,
        ]);
    }
    const positions = ringPositions(names);
    const maxCount = Math.max(1, ...Object.values(payload.node_counts));
    const maxEdge = Math.max(1, ...payload.edge_counts.map((e) => e.count));
    const parts: string[] = [];
    for (const edge of payload.edge_counts) {
        const [x1, y1] = positions.get(edge.codes[0])!;
        const [x2, y2] = positions.get(edge.codes[1])!;
        const width = 1 + (5 * edge.count) / maxEdge;
        parts.push(
            `<line x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" ` +
                `y2="${y2.toFixed(1)}" stroke="#777" stroke-width="${width.toFixed(1)}"/>`,
        );
    }
    for (const name of names) {
        const [x, y] = positions.get(name)!;
        const r = 10 + 14 * Math.sqrt(payload.node_counts[name] / maxCount);
        parts.push(
            `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${r.toFixed(1)}" ` +
                `fill="#b7cfe8" stroke="black"/>`,
        );
        parts.push(
            `<text x="${x.toFixed(1)}" y="${(y + 3).toFixed(1)}" font-size="8" ` +
                `text-anchor="middle">${name.toLowerCase()} (${payload.node_counts[name]})</text>`,
        );
    }
    return svg(parts);
}

export function renderPayload(payload: AnalyticsPayload): string {
    switch (payload.viz) {
        case "priority":
            return renderPriority(payload);
        case "wardmap":
            return renderWardMap(payload);
        case "sociogram":
            return renderSociogram(payload);
        case "network":
            return renderNetwork(payload);
    }
}

export function renderSnippetCard(item: ShareItem): string {
    const seconds = (ms: number) => (ms / 1000).toFixed(1);
    return svg([
        `<rect x="40" y="${H / 2 - 40}" width="${W - 80}" height="80" rx="8" fill="#222"/>`,
        `<text x="${W / 2}" y="${H / 2 - 4}" text-anchor="middle" fill="white" font-size="16">` +
            `video snippet</text>`,
        `<text x="${W / 2}" y="${H / 2 + 18}" text-anchor="middle" fill="#9cf" font-size="13">` +
            `${seconds(item.from_ms)}s – ${seconds(item.to_ms)}s</text>`,
    ]);
}

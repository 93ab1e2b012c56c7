// Single-page operator console: one WebSocket to the station, a heightmap
// canvas with footprint/COM/support-polygon overlay, and drive/step/e-stop
// controls. Rendering runs on requestAnimationFrame off the latest snapshot;
// input sampling runs on its own 5 Hz-gated loop so a slow frame never
// delays a command.

import { ConsoleClient } from "./client.js";
import {
    HeightGrid,
    decodeBase64,
    decodeHeightmap,
    renderHeightmap,
} from "./heightmap.js";
import { JoystickSampler } from "./input.js";
import { OverlayScene, buildOverlay } from "./overlay.js";
import {
    estopCommand,
    footprintCommand,
    joystickCommand,
    stepCommand,
} from "./protocol.js";

const PIXELS_PER_CELL = 4;

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

const canvas = el<HTMLCanvasElement>("map");
const ctx = canvas.getContext("2d")!;
const banner = el<HTMLDivElement>("banner");
const toast = el<HTMLDivElement>("toast");
const agesPanel = el<HTMLDivElement>("ages");
const posePanel = el<HTMLDivElement>("pose");

// serve this page from any static host; point it at the station with
// ?station=host:port (defaults to the page's own host)
const stationHost =
    new URLSearchParams(location.search).get("station") ?? location.host;
const wsUrl = `ws://${stationHost}/ws`;
const client = new ConsoleClient(wsUrl);
const sampler = new JoystickSampler();

let grid: HeightGrid | null = null;
let lastHeightmapB64 = "";
let overlay: OverlayScene | null = null;
let dragWheel = -1;                     // index into overlay.wheels while dragging

function showToast(text: string): void {
    toast.textContent = text;
    toast.classList.add("visible");
    setTimeout(() => toast.classList.remove("visible"), 2500);
}

async function submit(command: object): Promise<void> {
    try {
        const { response } = await client.send(command);
        if (response.type === "reject") {
            showToast(`rejected: ${response.reason}`);
        }
    } catch (e) {
        showToast(String(e));
    }
}

// ---- input ------------------------------------------------------------------

document.addEventListener("keydown", (ev) => {
    if (sampler.setKey(ev.code, true)) ev.preventDefault();
    if (ev.code === "Space") {
        ev.preventDefault();
        void submit(estopCommand());
    }
});
document.addEventListener("keyup", (ev) => {
    if (sampler.setKey(ev.code, false)) ev.preventDefault();
});

el<HTMLButtonElement>("estop").addEventListener("click", () => {
    void submit(estopCommand());
});
el<HTMLButtonElement>("step").addEventListener("click", () => {
    void submit(stepCommand("auto"));
});
el<HTMLInputElement>("throttle").addEventListener("input", (ev) => {
    sampler.throttle = Number((ev.target as HTMLInputElement).value);
});

// drag a wheel marker to nudge its planned foothold
canvas.addEventListener("pointerdown", (ev) => {
    if (!overlay) return;
    const rect = canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    dragWheel = overlay.wheels.findIndex(
        ([wx, wy]) => Math.hypot(wx - px, wy - py) < 12);
    if (dragWheel >= 0) canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointerup", (ev) => {
    if (dragWheel < 0 || !overlay || !grid) {
        dragWheel = -1;
        return;
    }
    if (!client.connected) {
        showToast("disconnected: footprint change dropped");
        dragWheel = -1;
        return;
    }
    const rect = canvas.getBoundingClientRect();
    const [sx, sy] = overlay.wheels[dragWheel];
    // canvas x is grid columns (world y), canvas y is rows (world x)
    const dxWorld = (ev.clientY - rect.top - sy) / PIXELS_PER_CELL
        * grid.resolution;
    const dyWorld = (ev.clientX - rect.left - sx) / PIXELS_PER_CELL
        * grid.resolution;
    void submit(footprintCommand(dragWheel, [dxWorld, dyWorld]));
    dragWheel = -1;
});

setInterval(() => {
    const axes = sampler.sample(performance.now());
    if (axes && client.connected) {
        void submit(joystickCommand(axes));
    }
}, 40);

// ---- rendering ----------------------------------------------------------------

function drawOverlay(scene: OverlayScene): void {
    if (scene.supportPolygon.length >= 3) {
        ctx.beginPath();
        scene.supportPolygon.forEach(([x, y], i) =>
            i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y));
        ctx.closePath();
        ctx.strokeStyle = "rgba(60, 220, 60, 0.9)";
        ctx.lineWidth = 2;
        ctx.stroke();
    }
    ctx.fillStyle = "#d03030";
    for (const [x, y] of scene.wheels) {
        ctx.fillRect(x - 5, y - 3, 10, 6);
    }
    ctx.beginPath();
    ctx.arc(scene.com[0], scene.com[1], 4, 0, 2 * Math.PI);
    ctx.fillStyle = "#ff2020";
    ctx.fill();
    ctx.save();
    ctx.translate(scene.base[0], scene.base[1]);
    ctx.rotate(scene.headingRad);
    ctx.fillStyle = "rgba(60, 90, 220, 0.8)";
    ctx.fillRect(-8, -14, 16, 28);
    ctx.restore();
}

function render(): void {
    const snap = client.snapshot;
    banner.classList.toggle("visible", client.isStale());

    if (snap?.heightmap_b64 && snap.heightmap_b64 !== lastHeightmapB64) {
        lastHeightmapB64 = snap.heightmap_b64;
        grid = decodeHeightmap(decodeBase64(snap.heightmap_b64));
    }
    if (grid) {
        const img = renderHeightmap(grid);
        canvas.width = img.width * PIXELS_PER_CELL;
        canvas.height = img.height * PIXELS_PER_CELL;
        // nearest-neighbor upscale keeps cell colors exact
        ctx.imageSmoothingEnabled = false;
        const off = new OffscreenCanvas(img.width, img.height);
        off.getContext("2d")!.putImageData(
            new ImageData(img.data, img.width, img.height), 0, 0);
        ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
        if (snap?.base && snap.pose) {
            overlay = buildOverlay(snap.base, snap.pose, grid, PIXELS_PER_CELL);
            if (overlay) drawOverlay(overlay);
        }
    } else {
        ctx.fillStyle = "#222";
        ctx.fillRect(0, 0, canvas.width, canvas.height);
        ctx.fillStyle = "#aaa";
        ctx.fillText("waiting for heightmap…", 20, 30);
    }

    if (snap) {
        agesPanel.textContent = Object.entries(snap.ages)
            .map(([k, v]) => `${k}: ${v.toFixed(1)}s`)
            .join("   ");
        if (snap.pose) {
            const [x, y, z] = snap.pose.position;
            posePanel.textContent =
                `x ${x.toFixed(2)}  y ${y.toFixed(2)}  z ${z.toFixed(2)}`
                + (snap.base?.estop ? "   E-STOP" : "");
        }
    }
    requestAnimationFrame(render);
}

requestAnimationFrame(render);

// Footprint / COM / support-polygon overlay geometry.
//
// Telemetry reports contacts and COM in the robot base frame; the heightmap
// lives in world XY. The overlay places everything in heightmap pixel space
// so main.ts can draw it on the same (scaled) canvas as the terrain. Pure
// math, no DOM.

import { BasePanel, PosePanel } from "./protocol.js";
import { HeightGrid, worldToCell } from "./heightmap.js";

export interface OverlayScene {
    base: [number, number];             // robot base, pixel coords
    wheels: [number, number][];         // contact points, pixel coords
    com: [number, number];
    supportPolygon: [number, number][]; // contacts in received (hull) order
    headingRad: number;                 // world yaw for the base marker
}

/** Yaw (rad) about +z from a wxyz quaternion. */
export function quatYaw(q: number[]): number {
    const [w, x, y, z] = q;
    return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

/** Base-frame XY -> world XY given the robot pose. */
export function baseToWorld(
    pose: PosePanel, px: number, py: number): [number, number] {
    const yaw = quatYaw(pose.quat_wxyz);
    const c = Math.cos(yaw);
    const s = Math.sin(yaw);
    return [
        pose.position[0] + c * px - s * py,
        pose.position[1] + s * px + c * py,
    ];
}

/**
 * Pixel placement of robot markers on the heightmap canvas. Cell rows index
 * world x and columns world y, and the canvas is drawn with columns as the
 * horizontal axis, so pixel = (col, row) * scale.
 */
export function buildOverlay(
    base: BasePanel, pose: PosePanel, grid: HeightGrid,
    scale = 1): OverlayScene | null {
    const toPixel = (wx: number, wy: number): [number, number] => {
        const [row, col] = worldToCell(grid, wx, wy);
        return [(col + 0.5) * scale, (row + 0.5) * scale];
    };
    const wheels = base.contacts.map((c) => {
        const [wx, wy] = baseToWorld(pose, c[0], c[1]);
        return toPixel(wx, wy);
    });
    const [comX, comY] = baseToWorld(pose, base.com[0], base.com[1]);
    return {
        base: toPixel(pose.position[0], pose.position[1]),
        wheels,
        com: toPixel(comX, comY),
        supportPolygon: wheels,
        headingRad: quatYaw(pose.quat_wxyz),
    };
}

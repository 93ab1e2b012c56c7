// JSON message shapes spoken on the station's /ws socket (see API.md in the
// repository root). The console only ever deals in these; all bit packing
// happens server-side.

export interface BasePanel {
    com: number[];                      // [x, y], base frame, meters
    contacts: number[][];               // up to 4 [x, y, z] contact points
    estop: boolean;
}

export interface PosePanel {
    position: number[];                 // [x, y, z], world frame
    quat_wxyz: number[];
}

export interface TelemetrySnapshot {
    type: "telemetry";
    now: number;                        // station clock, seconds
    ages: Record<string, number>;       // field name -> seconds since update
    base?: BasePanel;
    pose?: PosePanel;
    contour?: number[][];
    heightmap_b64?: string;             // base64 THM1 blob
    metrics?: string;
}

export interface Ack {
    type: "ack";
    seq: number;
    state: "sent" | "queued";
}

export interface Reject {
    type: "reject";
    reason: string;
}

export type ServerMessage = TelemetrySnapshot | Ack | Reject;

export function parseServerMessage(raw: string): ServerMessage {
    const doc = JSON.parse(raw);
    if (doc.type === "telemetry" || doc.type === "ack" || doc.type === "reject") {
        return doc as ServerMessage;
    }
    throw new Error(`unknown server message type: ${doc.type}`);
}

// ---- command builders ------------------------------------------------------

export interface JoystickAxes {
    vx: number;
    vy: number;
    omega: number;
    throttle: number;
}

export type WheelName = "auto" | "fl" | "fr" | "hl" | "hr";

export function joystickCommand(axes: JoystickAxes): object {
    return {
        cmd: "joystick",
        vx: axes.vx,
        vy: axes.vy,
        omega: axes.omega,
        throttle: axes.throttle,
    };
}

export function estopCommand(): object {
    return { cmd: "estop" };
}

export function stepCommand(wheel: WheelName = "auto"): object {
    return { cmd: "step", wheel };
}

export function footprintCommand(
    wheelIndex: number, delta: number[], velocity = 0.1): object {
    return { cmd: "footprint", wheel_index: wheelIndex, delta, velocity };
}

export function motionCommand(motionId: number, parameter = 0): object {
    return { cmd: "motion", motion_id: motionId, parameter };
}

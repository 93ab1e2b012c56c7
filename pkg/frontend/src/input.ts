// Keyboard/pointer joystick stand-in.
//
// Axis mapping (documented here because there is no physical stick):
//   W / ArrowUp      +vx (forward)        S / ArrowDown   -vx
//   A                +vy (strafe left)    D               -vy
//   Q / ArrowLeft    +omega (ccw yaw)     E / ArrowRight  -omega
// The throttle slider scales all three axes jointly.
//
// sample() is called from a fast UI loop but emits at most one command per
// 200 ms (the station's 5 Hz uplink rate), and stops emitting entirely once
// the axes have been zero for more than a second, so an idle console puts
// nothing on the wire.

import { JoystickAxes } from "./protocol.js";

export const SAMPLE_INTERVAL_MS = 200;       // 5 Hz
export const IDLE_SUPPRESS_MS = 1000;

const KEY_AXES: Record<string, [number, number, number]> = {
    KeyW: [1, 0, 0], ArrowUp: [1, 0, 0],
    KeyS: [-1, 0, 0], ArrowDown: [-1, 0, 0],
    KeyA: [0, 1, 0],
    KeyD: [0, -1, 0],
    KeyQ: [0, 0, 1], ArrowLeft: [0, 0, 1],
    KeyE: [0, 0, -1], ArrowRight: [0, 0, -1],
};

export class JoystickSampler {
    throttle = 1.0;

    private keys = new Set<string>();
    private pointer: [number, number] | null = null;   // vx, vy from drag pad
    private lastEmitMs = -Infinity;
    private lastActiveMs = -Infinity;

    /** Feed a keydown/keyup; returns true if the key is a joystick axis. */
    setKey(code: string, down: boolean): boolean {
        if (!(code in KEY_AXES)) return false;
        if (down) this.keys.add(code);
        else this.keys.delete(code);
        return true;
    }

    /** Feed a pointer-pad drag position, each component in [-1, 1]. */
    setPointer(vx: number, vy: number): void {
        this.pointer = [
            Math.min(1, Math.max(-1, vx)),
            Math.min(1, Math.max(-1, vy)),
        ];
    }

    clearPointer(): void {
        this.pointer = null;
    }

    /** Current axes before throttle scaling, each in [-1, 1]. */
    axes(): [number, number, number] {
        let vx = 0;
        let vy = 0;
        let omega = 0;
        for (const code of this.keys) {
            const [ax, ay, aw] = KEY_AXES[code];
            vx += ax;
            vy += ay;
            omega += aw;
        }
        if (this.pointer) {
            vx += this.pointer[0];
            vy += this.pointer[1];
        }
        const clamp = (v: number) => Math.min(1, Math.max(-1, v));
        return [clamp(vx), clamp(vy), clamp(omega)];
    }

    /**
     * Rate-limited sampler: returns a command at most every 200 ms, and null
     * while idle (axes zero for over a second). Zeros are still emitted for
     * the first second after input stops so the robot actually halts.
     */
    sample(nowMs: number): JoystickAxes | null {
        const [vx, vy, omega] = this.axes();
        const active = vx !== 0 || vy !== 0 || omega !== 0;
        if (active) this.lastActiveMs = nowMs;
        if (!active && nowMs - this.lastActiveMs > IDLE_SUPPRESS_MS) {
            return null;
        }
        if (nowMs - this.lastEmitMs < SAMPLE_INTERVAL_MS) {
            return null;
        }
        this.lastEmitMs = nowMs;
        // the station scales velocities by throttle, so the axes go out raw
        const th = Math.min(1, Math.max(0, this.throttle));
        return { vx, vy, omega, throttle: th };
    }
}

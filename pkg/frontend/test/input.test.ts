import { describe, expect, it } from "vitest";

import { InputTracker } from "../src/input.js";

describe("InputTracker", () => {
  it("W held produces forward move messages", () => {
    const input = new InputTracker();
    input.keyDown("KeyW");
    const msg = input.nextMessage();
    expect(msg?.payload.move).toEqual([0, 1]);
    // still held: keeps sending while moving
    expect(input.nextMessage()?.payload.move).toEqual([0, 1]);
  });

  it("no activity means no messages", () => {
    const input = new InputTracker();
    expect(input.nextMessage()).toBeNull();
    expect(input.nextMessage()).toBeNull();
  });

  it("release emits one final stop, then goes idle", () => {
    const input = new InputTracker();
    input.keyDown("KeyD");
    input.nextMessage();
    input.keyUp("KeyD");
    const stop = input.nextMessage();
    expect(stop?.payload.move).toEqual([0, 0]);
    expect(input.nextMessage()).toBeNull();
  });

  it("diagonals are normalized", () => {
    const input = new InputTracker();
    input.keyDown("KeyW");
    input.keyDown("KeyD");
    const move = input.nextMessage()?.payload.move!;
    expect(Math.hypot(move[0], move[1])).toBeCloseTo(1.0, 9);
  });

  it("slider changes are sent once and only when changed", () => {
    const input = new InputTracker();
    input.setCamera({ distance: 4.5 });
    const first = input.nextMessage();
    expect(first?.payload.camera).toEqual({ distance: 4.5 });
    expect(first?.payload.move).toBeUndefined();
    expect(input.nextMessage()).toBeNull();
    input.setCamera({ distance: 4.5 }); // same value: suppressed
    expect(input.nextMessage()).toBeNull();
    input.setCamera({ distance: 5.0 });
    expect(input.nextMessage()?.payload.camera).toEqual({ distance: 5.0 });
  });

  it("fly and land flags ride along once", () => {
    const input = new InputTracker();
    input.toggleFly(true);
    input.requestLand();
    const msg = input.nextMessage();
    expect(msg?.payload.fly).toBe(true);
    expect(msg?.payload.land).toBe(true);
    expect(input.nextMessage()).toBeNull();
  });

  it("sequence numbers increase", () => {
    const input = new InputTracker();
    input.keyDown("KeyW");
    const a = input.nextMessage()!;
    const b = input.nextMessage()!;
    expect(b.seq).toBeGreaterThan(a.seq);
  });
});

// Browser bootstrap: canvas, controls, socket, render loop.

import { Client } from "./client.js";
import { renderFrame, Surface, Viewport } from "./renderer.js";
import type { Overlays } from "./protocol.js";

function canvasSurface(ctx: CanvasRenderingContext2D): Surface {
  return {
    width: ctx.canvas.width,
    height: ctx.canvas.height,
    clear(color) {
      ctx.fillStyle = color;
      ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    },
    polygon(points, stroke, fill, lineWidth) {
      if (points.length < 2) return;
      ctx.beginPath();
      ctx.moveTo(points[0][0], points[0][1]);
      for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
      ctx.closePath();
      if (fill) {
        ctx.fillStyle = fill;
        ctx.fill();
      }
      ctx.strokeStyle = stroke;
      ctx.lineWidth = lineWidth;
      ctx.stroke();
    },
    line(a, b, color, lineWidth) {
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.strokeStyle = color;
      ctx.lineWidth = lineWidth;
      ctx.stroke();
    },
    circle(center, radius, stroke, fill) {
      ctx.beginPath();
      ctx.arc(center[0], center[1], radius, 0, Math.PI * 2);
      if (fill) {
        ctx.fillStyle = fill;
        ctx.fill();
      }
      ctx.strokeStyle = stroke;
      ctx.lineWidth = 1;
      ctx.stroke();
    },
    text(s, at, color) {
      ctx.fillStyle = color;
      ctx.font = "12px monospace";
      ctx.fillText(s, at[0], at[1]);
    },
  };
}

function main(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const status = document.getElementById("status")!;
  const client = new Client();
  const viewport = new Viewport();
  let fitted = false;

  const url = `ws://${location.hostname}:${location.port || 8080}`;
  let socket: WebSocket | null = null;

  function connect(): void {
    socket = new WebSocket(url);
    client.state.status = "connecting";
    socket.addEventListener("open", () => {
      client.state.status = "open";
    });
    socket.addEventListener("close", () => {
      client.state.status = "closed";
      setTimeout(connect, 1000);
    });
    socket.addEventListener("message", (ev) => client.onMessage(String(ev.data)));
  }
  connect();

  window.addEventListener("keydown", (ev) => {
    client.input.keyDown(ev.code);
    if (ev.code === "KeyF") client.input.toggleFly(true);
    if (ev.code === "KeyG") client.input.toggleFly(false);
    if (ev.code === "KeyL") client.input.requestLand();
  });
  window.addEventListener("keyup", (ev) => client.input.keyUp(ev.code));

  const overlays: Overlays = { graph: false, voxels: false, portals: false, visible: false };
  for (const name of ["graph", "voxels", "portals", "visible"] as const) {
    const box = document.getElementById(`overlay-${name}`) as HTMLInputElement;
    box.addEventListener("change", () => {
      overlays[name] = box.checked;
      client.state.overlays = { ...overlays };
      client.input.setOverlays({ ...overlays });
    });
  }
  for (const [id, key] of [["altitude", "altitude"], ["distance", "distance"],
                           ["down-angle", "down_angle"]] as const) {
    const slider = document.getElementById(`slider-${id}`) as HTMLInputElement;
    slider.addEventListener("input", () => {
      client.input.setCamera({ [key]: parseFloat(slider.value) });
    });
  }

  setInterval(() => {
    client.tick(socket && socket.readyState === 1 ? socket : null, Date.now());
  }, 1000 / 30);

  function draw(): void {
    const snapshot = client.state.snapshot;
    if (snapshot) {
      if (!fitted) {
        viewport.fit(snapshot, canvas.width, canvas.height);
        fitted = true;
      }
      const stats = renderFrame(canvasSurface(ctx), snapshot, client.state.frame,
                                client.state.overlays, viewport);
      const f = client.state.frame;
      status.textContent =
        `${client.state.status} | tick ${f?.tick ?? "-"} | ` +
        `visible ${f?.visible_count ?? "-"} | ` +
        `highlighted ${stats.highlightedElements} | ` +
        `violations ${f ? Object.values(f.violations).reduce((a, b) => a + b, 0) : "-"}`;
    } else {
      status.textContent = `${client.state.status} | waiting for snapshot`;
    }
    requestAnimationFrame(draw);
  }
  requestAnimationFrame(draw);
}

window.addEventListener("load", main);

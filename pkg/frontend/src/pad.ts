// The 2D valence-arousal pad.  Axis orientation: valence runs left (-1) to
// right (+1); arousal runs bottom (-1) to top (+1).

import { VaPoint } from "./api.js";
import { ExplorerStore, clampToPad } from "./store.js";

export function vaToPixel(p: VaPoint, size: number): { x: number; y: number } {
  return {
    x: ((p.valence + 1) / 2) * size,
    y: ((1 - p.arousal) / 2) * size, // canvas y grows downward
  };
}

export function pixelToVa(x: number, y: number, size: number): VaPoint {
  return clampToPad({
    valence: (x / size) * 2 - 1,
    arousal: 1 - (y / size) * 2,
  });
}

export class VaPad {
  private ctx: CanvasRenderingContext2D;
  private dragging = false;

  // getStore indirection: the app can swap stores on reconnect while the
  // canvas keeps its one set of listeners
  constructor(
    private canvas: HTMLCanvasElement,
    private getStore: () => ExplorerStore,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      canvas.setPointerCapture(e.pointerId);
      this.emit(e);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (this.dragging) this.emit(e);
    });
    canvas.addEventListener("pointerup", (e) => {
      this.dragging = false;
      canvas.releasePointerCapture(e.pointerId);
    });
    this.draw();
  }

  private emit(e: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const scale = this.canvas.width / rect.width;
    this.getStore().onPadMove(
      pixelToVa((e.clientX - rect.left) * scale, (e.clientY - rect.top) * scale,
                this.canvas.width),
    );
  }

  draw(): void {
    const store = this.getStore();
    const size = this.canvas.width;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, size, size);

    ctx.fillStyle = "#fafafa";
    ctx.fillRect(0, 0, size, size);
    ctx.strokeStyle = "#ccc";
    ctx.lineWidth = 1;
    ctx.strokeRect(0.5, 0.5, size - 1, size - 1);

    // axes through the origin
    ctx.beginPath();
    ctx.moveTo(size / 2, 0);
    ctx.lineTo(size / 2, size);
    ctx.moveTo(0, size / 2);
    ctx.lineTo(size, size / 2);
    ctx.strokeStyle = "#ddd";
    ctx.stroke();

    ctx.fillStyle = "#888";
    ctx.font = "11px sans-serif";
    ctx.fillText("valence +", size - 58, size / 2 - 6);
    ctx.fillText("valence -", 6, size / 2 - 6);
    ctx.fillText("arousal +", size / 2 + 6, 14);
    ctx.fillText("arousal -", size / 2 + 6, size - 8);

    // tau radius around the current target
    const t = vaToPixel(store.state.target, size);
    const r = (store.state.tau / 2) * size;
    ctx.beginPath();
    ctx.arc(t.x, t.y, r, 0, Math.PI * 2);
    ctx.strokeStyle = "rgba(70, 120, 220, 0.45)";
    ctx.setLineDash([4, 3]);
    ctx.stroke();
    ctx.setLineDash([]);

    // the VA of the displayed result, when any
    const res = store.state.lastResult;
    if (res) {
      const p = vaToPixel({ valence: res.valence, arousal: res.arousal }, size);
      ctx.beginPath();
      ctx.arc(p.x, p.y, 5, 0, Math.PI * 2);
      ctx.fillStyle = res.fallback_used ? "#d9822b" : "#2c9f45";
      ctx.fill();
    }

    // target crosshair
    ctx.beginPath();
    ctx.arc(t.x, t.y, 6, 0, Math.PI * 2);
    ctx.strokeStyle = "#3561c4";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}

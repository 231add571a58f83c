// DOM + canvas rendering: a pure projection of the ViewModel. Dots are
// filled gray circles inside a stroked view-boundary circle; radius is
// proportional to dot size, fill is the dot's gray level.

import {
  ViewModel,
  canSendMessage,
  canSelect,
  lockoutRemainingMs,
  partnerSelection,
} from "./state.js";

export const CANVAS_SIZE = 480;
const VIEW_PX = 220; // px radius of the view circle

export function dotToPixel(vm: ViewModel, x: number, y: number): [number, number] {
  const c = CANVAS_SIZE / 2;
  // world y grows upward, canvas y grows downward
  return [c + (x / vm.viewRadius) * VIEW_PX, c - (y / vm.viewRadius) * VIEW_PX];
}

export function dotRadiusPx(size: number): number {
  return size; // canonical sizes 8..15 map 1:1 to a sensible pixel radius
}

export function dotAt(vm: ViewModel, px: number, py: number): number | null {
  for (const d of vm.dots) {
    const [cx, cy] = dotToPixel(vm, d.x, d.y);
    const r = dotRadiusPx(d.size);
    if ((px - cx) ** 2 + (py - cy) ** 2 <= (r + 3) ** 2) {
      return d.id;
    }
  }
  return null;
}

export function statusLine(vm: ViewModel): string {
  switch (vm.phase) {
    case "connecting":
      return "Connecting…";
    case "waiting":
      return "Waiting for a partner…";
    case "reading": {
      const s = vm.remainingMs !== null ? Math.ceil(vm.remainingMs / 1000) : "…";
      return `Read the board — game starts in ${s}s`;
    }
    case "active": {
      const s = vm.remainingMs !== null ? Math.ceil(vm.remainingMs / 1000) : "…";
      const lock = lockoutRemainingMs(vm);
      const sel =
        vm.mySelection !== null
          ? "selection made"
          : lock !== null
            ? `selection opens in ${Math.ceil(lock / 1000)}s`
            : "selection open";
      return `${s}s left — ${vm.myTurn ? "your turn" : "partner's turn"} — ${sel}`;
    }
    case "done": {
      if (!vm.outcome) return "Game over";
      const head = { success: "Success!", failure: "No match.", expired: "Time ran out." }[
        vm.outcome.status
      ];
      const partner = partnerSelection(vm);
      const seen =
        partner === null
          ? "partner made no selection"
          : vm.dots.some((d) => d.id === partner)
            ? "partner's pick is highlighted"
            : "partner picked a dot outside your view";
      return `${head} ${seen}`;
    }
    case "disconnected":
      return "Session expired (connection lost)";
  }
}

export function drawBoard(ctx: CanvasRenderingContext2D, vm: ViewModel): void {
  const c = CANVAS_SIZE / 2;
  ctx.clearRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(c, c, VIEW_PX, 0, 2 * Math.PI);
  ctx.stroke();

  const partner = partnerSelection(vm);
  for (const d of vm.dots) {
    const [x, y] = dotToPixel(vm, d.x, d.y);
    const r = dotRadiusPx(d.size);
    const g = Math.round(d.color);
    ctx.fillStyle = `rgb(${g},${g},${g})`;
    ctx.beginPath();
    ctx.arc(x, y, r, 0, 2 * Math.PI);
    ctx.fill();
    if (d.id === vm.mySelection) {
      ctx.strokeStyle = "#c0392b";
      ctx.lineWidth = 3;
      ctx.stroke();
    }
    if (vm.phase === "done" && partner !== null && d.id === partner) {
      ctx.strokeStyle = "#2980b9";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.arc(x, y, r + 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

export interface Elements {
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  chat: HTMLElement;
  input: HTMLInputElement;
  sendBtn: HTMLButtonElement;
  notices: HTMLElement;
}

export function render(el: Elements, vm: ViewModel): void {
  el.status.textContent = statusLine(vm);
  const ctx = el.canvas.getContext("2d");
  if (ctx) drawBoard(ctx, vm);

  el.chat.innerHTML = "";
  for (const line of vm.chat) {
    const div = document.createElement("div");
    div.className = line.from === vm.agent ? "chat-line me" : "chat-line them";
    div.textContent = `${line.from === vm.agent ? "you" : "partner"}: ${line.text}`;
    el.chat.appendChild(div);
  }
  el.chat.scrollTop = el.chat.scrollHeight;

  const speak = canSendMessage(vm);
  el.input.disabled = !speak;
  el.sendBtn.disabled = !speak;
  el.input.placeholder = speak ? "Describe a dot…" : "Wait for your turn…";

  el.notices.innerHTML = "";
  for (const n of vm.notices.slice(-3)) {
    const div = document.createElement("div");
    div.className = "notice";
    div.textContent = `${n.code}: ${n.message}`;
    el.notices.appendChild(div);
  }

  const lock = lockoutRemainingMs(vm);
  el.canvas.title =
    vm.mySelection !== null
      ? "You already selected"
      : lock !== null
        ? `Selection opens in ${Math.ceil(lock / 1000)}s`
        : vm.phase === "active"
          ? "Click a dot to select it (one chance!)"
          : "";
  el.canvas.style.cursor = vm.phase === "active" && vm.selectOpen && vm.mySelection === null
    ? "pointer"
    : "default";
}

export { canSelect };

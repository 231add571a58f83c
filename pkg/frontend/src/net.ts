// Thin socket wrapper: parses frames, forwards them to the reducer loop.

import type { ClientFrame, ServerFrame } from "./protocol.js";

export interface GameSocket {
  send(frame: ClientFrame): void;
  close(): void;
}

export function connectGame(
  url: string,
  onFrame: (frame: ServerFrame) => void,
  onClose: () => void,
): GameSocket {
  const ws = new WebSocket(url);
  ws.onopen = () => ws.send(JSON.stringify({ type: "join" }));
  ws.onmessage = (ev) => {
    let frame: ServerFrame;
    try {
      frame = JSON.parse(String(ev.data));
    } catch {
      return; // server only ever sends JSON; ignore anything else
    }
    onFrame(frame);
  };
  ws.onclose = onClose;
  ws.onerror = () => ws.close();
  return {
    send: (frame) => {
      if (ws.readyState === WebSocket.OPEN) {
        ws.send(JSON.stringify(frame));
      }
    },
    close: () => ws.close(),
  };
}

import { connectGame } from "./net.js";
import { CANVAS_SIZE, Elements, canSelect, dotAt, render } from "./render.js";
import { ViewModel, canSendMessage, initialModel, onDisconnect, reduce } from "./state.js";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const el: Elements = {
  canvas: must<HTMLCanvasElement>("board"),
  status: must("status"),
  chat: must("chat"),
  input: must<HTMLInputElement>("chat-input"),
  sendBtn: must<HTMLButtonElement>("chat-send"),
  notices: must("notices"),
};
el.canvas.width = CANVAS_SIZE;
el.canvas.height = CANVAS_SIZE;

let vm: ViewModel = initialModel();

const scheme = location.protocol === "https:" ? "wss" : "ws";
const socket = connectGame(
  `${scheme}://${location.host}/ws`,
  (frame) => {
    vm = reduce(vm, frame);
    render(el, vm);
  },
  () => {
    vm = onDisconnect(vm);
    render(el, vm);
  },
);

function sendMessage(): void {
  const text = el.input.value.trim();
  if (!text || !canSendMessage(vm)) return;
  socket.send({ type: "message", text });
  el.input.value = "";
}

el.sendBtn.addEventListener("click", sendMessage);
el.input.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") sendMessage();
});

el.canvas.addEventListener("click", (ev) => {
  const rect = el.canvas.getBoundingClientRect();
  const id = dotAt(vm, ev.clientX - rect.left, ev.clientY - rect.top);
  if (id === null || !canSelect(vm, id)) return;
  // one chance only: confirm before the irrevocable selection
  if (window.confirm("Select this dot? You cannot change your mind.")) {
    socket.send({ type: "select", entity_id: id });
  }
});

render(el, vm);

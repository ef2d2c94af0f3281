// WebSocket client with a latest-snapshot mailbox: the render loop always
// reads the newest state; missed frames are simply skipped.

import { parseInbound, type Handshake, type Snapshot } from "./protocol.js";

export class SocketClient {
  handshake: Handshake | null = null;
  snapshot: Snapshot | null = null;
  connected = false;
  lastError = "";
  private ws: WebSocket | null = null;

  constructor(private url: string, private onChange: () => void = () => {}) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.connected = true;
      this.onChange();
    };
    this.ws.onmessage = (ev: MessageEvent) => {
      const msg = parseInbound(String(ev.data));
      if (!msg) return;
      if (msg.type === "handshake") this.handshake = msg;
      else if (msg.type === "state") this.snapshot = msg;
      else this.lastError = `${msg.error}: ${msg.detail}`;
      this.onChange();
    };
    this.ws.onclose = () => {
      this.connected = false;
      this.onChange();
    };
    this.ws.onerror = () => {
      this.connected = false;
    };
  }

  reconnect(): void {
    if (this.ws) this.ws.close();
    this.connect();
  }

  send(raw: string): void {
    if (this.connected && this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(raw);
    }
  }
}

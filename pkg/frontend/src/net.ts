// One websocket session. Outgoing messages are dropped (with a status
// callback) while disconnected; a closed socket retries on a timer so a
// gateway restart recovers the console without a reload.

import {
  parseServerMessage,
  serializeClientMessage,
  ProtocolError,
  type ClientMessage,
  type ServerMessage,
} from "./protocol.js";

const RETRY_MS = 1500;

export interface ConnectionHooks {
  onMessage(msg: ServerMessage): void;
  onStatus(connected: boolean, note: string): void;
}

export class Connection {
  private socket: WebSocket | null = null;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly hooks: ConnectionHooks,
  ) {
    this.open();
  }

  private open(): void {
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => this.hooks.onStatus(true, "connected");
    socket.onmessage = (ev: MessageEvent<string>) => {
      for (const line of ev.data.split("\n")) {
        if (!line.trim()) {
          continue;
        }
        try {
          this.hooks.onMessage(parseServerMessage(line));
        } catch (err) {
          if (err instanceof ProtocolError) {
            this.hooks.onStatus(true, err.message);
          } else {
            throw err;
          }
        }
      }
    };
    socket.onclose = () => {
      this.hooks.onStatus(false, "disconnected");
      if (!this.closed) {
        setTimeout(() => this.open(), RETRY_MS);
      }
    };
  }

  send(msg: ClientMessage): boolean {
    if (this.socket === null || this.socket.readyState !== WebSocket.OPEN) {
      this.hooks.onStatus(false, `dropped ${msg.kind}: not connected`);
      return false;
    }
    this.socket.send(serializeClientMessage(msg));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}

// Gateway connection. The socket type is injected so the browser build
// uses the native WebSocket and tests can pass the ws package; both offer
// the same onopen/onmessage handler surface.

import { decodeMessage, encodeMessage, WireError, WireMessage } from "./codec.js";
import { isInbound } from "./messages.js";
import { ConsoleEvent } from "./state.js";

export interface SocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export type ClientEvent = ConsoleEvent | { kind: "badframe"; error: string };

export class GatewayClient {
  private socket: SocketLike;
  private closed = false;

  constructor(
    url: string,
    private handler: (ev: ClientEvent) => void,
    makeSocket: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {
    this.handler({ kind: "connecting" });
    this.socket = makeSocket(url);
    this.socket.onopen = () => this.handler({ kind: "open" });
    this.socket.onclose = () => {
      if (!this.closed) {
        this.closed = true;
        this.handler({ kind: "close" });
      }
    };
    this.socket.onerror = () => {
      // The close event follows and carries the state change.
    };
    this.socket.onmessage = (ev) => this.ingest(ev.data);
  }

  private ingest(data: unknown): void {
    const text =
      typeof data === "string"
        ? data
        : new TextDecoder().decode(data as ArrayBufferView | ArrayBuffer);
    let msg: WireMessage;
    try {
      msg = decodeMessage(text);
    } catch (e) {
      if (e instanceof WireError) {
        this.handler({ kind: "badframe", error: e.message });
        return;
      }
      throw e;
    }
    if (isInbound(msg)) {
      this.handler({ kind: "message", message: msg });
    } else {
      this.handler({ kind: "badframe", error: `unexpected ${msg.type} frame` });
    }
  }

  send(msg: WireMessage): void {
    this.socket.send(encodeMessage(msg));
  }

  close(): void {
    this.closed = true;
    this.socket.close();
  }
}

// Socket wiring + render loop for the browser entry point.

import type { InputMessage, ServerMessage } from "./protocol.js";
import { ClientState } from "./state.js";
import { InputTracker } from "./input.js";

export interface SocketLike {
  send(data: string): void;
  readyState: number;
}

export class Client {
  state = new ClientState();
  input = new InputTracker();
  private buffered: InputMessage[] = [];
  private bufferedAt = 0;

  onMessage(raw: string): void {
    const msg = JSON.parse(raw) as ServerMessage;
    this.state.handleMessage(msg);
  }

  /** One client tick: emit the next input message if anything is active. */
  tick(socket: SocketLike | null, now: number): void {
    const msg = this.input.nextMessage();
    if (msg === null) {
      return;
    }
    if (socket !== null && socket.readyState === 1) {
      for (const queued of this.buffered) {
        socket.send(JSON.stringify(queued));
      }
      this.buffered = [];
      socket.send(JSON.stringify(msg));
    } else {
      // disconnected: keep up to one second of messages, then drop
      if (this.buffered.length === 0) {
        this.bufferedAt = now;
      }
      if (now - this.bufferedAt <= 1000) {
        this.buffered.push(msg);
      } else {
        this.buffered = [];
      }
    }
  }
}

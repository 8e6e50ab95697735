// Explorer state machine.
//
// Drag events outpace retrieval latency, so pad moves are debounced to at
// most one query burst per 100 ms, each issued request carries a sequence
// number, and a response is applied only when it answers the newest issued
// request.  Each panel (retrieve, weights, sweep) keeps at most one request
// in flight; a newer desired query waits in a one-slot queue.  When the
// service is unreachable the UI flags it and keeps the last good state.

import {
  ApiClient,
  ResultCell,
  ServiceError,
  SweepResponse,
  VaPoint,
  WeightRow,
} from "./api.js";

export const MIN_REQUEST_INTERVAL_MS = 100; // <= 10 bursts per second
export const MAX_SWEEP_SIDE = 9;

export interface ExplorerState {
  target: VaPoint;
  tau: number;
  sourceId: string | null;
  lastResult: ResultCell | null;
  lastResultTarget: VaPoint | null;
  lastSweep: SweepResponse | null;
  weights: WeightRow[];
  serviceUp: boolean;
  lastError: string | null;
  pendingRequests: number;
}

export type Listener = (state: ExplorerState) => void;

function clamp01(x: number): number {
  return Math.min(1, Math.max(-1, x));
}

export function clampToPad(p: VaPoint): VaPoint {
  return { valence: clamp01(p.valence), arousal: clamp01(p.arousal) };
}

interface ChannelOptions<Req, Res> {
  send: (req: Req) => Promise<Res>;
  apply: (req: Req, res: Res) => void;
}

// One-in-flight request channel with sequence-number staleness.
// onSettled(null) marks a superseded outcome: it must influence neither
// the panel's data nor the service-health flag.
class Channel<Req, Res> {
  private latestSeq = 0;
  private inFlight = false;
  private queued: { seq: number; req: Req } | null = null;
  private idleResolvers: (() => void)[] = [];

  constructor(
    private opts: ChannelOptions<Req, Res>,
    private onSettled: (ok: boolean | null, err?: unknown) => void,
  ) {}

  issue(req: Req): void {
    const seq = ++this.latestSeq;
    if (this.inFlight) {
      this.queued = { seq, req }; // supersedes any previously queued query
      return;
    }
    void this.fire(seq, req);
  }

  private async fire(seq: number, req: Req): Promise<void> {
    this.inFlight = true;
    try {
      const res = await this.opts.send(req);
      if (seq === this.latestSeq) {
        this.opts.apply(req, res);
        this.onSettled(true);
      } else {
        this.onSettled(null); // stale success, discarded
      }
    } catch (err) {
      if (seq === this.latestSeq) {
        this.onSettled(false, err);
      } else {
        this.onSettled(null); // stale failure, discarded
      }
    } finally {
      this.inFlight = false;
      const next = this.queued;
      this.queued = null;
      if (next !== null) {
        void this.fire(next.seq, next.req);
      } else {
        this.idleResolvers.splice(0).forEach((r) => r());
      }
    }
  }

  get busy(): boolean {
    return this.inFlight || this.queued !== null;
  }

  idle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }
}

type PanelName = "retrieve" | "weights" | "sweep";

export class ExplorerStore {
  readonly state: ExplorerState;
  private listeners: Listener[] = [];
  private retrieveChannel: Channel<{ target: VaPoint; tau: number; sourceId: string }, any>;
  private weightsChannel: Channel<VaPoint, any>;
  private sweepChannel: Channel<
    { vValues: number[]; aValues: number[]; tau: number; sourceId: string },
    SweepResponse
  >;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private lastIssueAt = -Infinity;
  private panelErrors: Record<PanelName, string | null> = {
    retrieve: null,
    weights: null,
    sweep: null,
  };

  constructor(private client: ApiClient) {
    this.state = {
      target: { valence: 0, arousal: 0 },
      tau: 0.3,
      sourceId: null,
      lastResult: null,
      lastResultTarget: null,
      lastSweep: null,
      weights: [],
      serviceUp: true,
      lastError: null,
      pendingRequests: 0,
    };
    this.retrieveChannel = new Channel(
      {
        send: (q) =>
          this.client.retrieve({
            source_id: q.sourceId,
            valence: q.target.valence,
            arousal: q.target.arousal,
            tau: q.tau,
          }),
        apply: (q, res) => {
          this.state.lastResult = res.result;
          this.state.lastResultTarget = q.target;
        },
      },
      (ok, err) => this.settle("retrieve", ok, err),
    );
    this.weightsChannel = new Channel(
      {
        send: (p) => this.client.weights(p.valence, p.arousal),
        apply: (_p, res) => {
          this.state.weights = res.weights;
        },
      },
      (ok, err) => this.settle("weights", ok, err),
    );
    this.sweepChannel = new Channel(
      {
        send: (q) =>
          this.client.sweep({
            source_id: q.sourceId,
            v_values: q.vValues,
            a_values: q.aValues,
            tau: q.tau,
          }),
        apply: (_q, res) => {
          this.state.lastSweep = res;
        },
      },
      (ok, err) => this.settle("sweep", ok, err),
    );
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    this.state.pendingRequests =
      Number(this.retrieveChannel.busy) +
      Number(this.weightsChannel.busy) +
      Number(this.sweepChannel.busy);
    this.listeners.forEach((l) => l(this.state));
  }

  private settle(panel: PanelName, ok: boolean | null, err?: unknown): void {
    if (ok === null) {
      this.notify(); // superseded outcome: no evidence about service health
      return;
    }
    if (ok) {
      this.state.serviceUp = true;
      this.panelErrors[panel] = null;
    } else if (err instanceof ServiceError && err.status < 500) {
      // the service answered; this panel's request itself was invalid
      this.state.serviceUp = true;
      this.panelErrors[panel] = err.message;
    } else {
      this.state.serviceUp = false;
      this.panelErrors[panel] = err instanceof Error ? err.message : String(err);
    }
    this.state.lastError =
      this.panelErrors.retrieve ?? this.panelErrors.weights ?? this.panelErrors.sweep;
    this.notify();
  }

  setSource(id: string): void {
    this.state.sourceId = id;
    this.notify();
    this.scheduleRefresh();
  }

  setTau(tau: number): void {
    if (!(tau > 0) || !Number.isFinite(tau)) {
      throw new RangeError(`tau must be a positive number, got ${tau}`);
    }
    this.state.tau = tau;
    this.notify();
    this.scheduleRefresh();
  }

  onPadMove(point: VaPoint): void {
    this.state.target = clampToPad(point);
    this.notify(); // the cursor tracks immediately; queries are debounced
    this.scheduleRefresh();
  }

  private scheduleRefresh(): void {
    if (this.state.sourceId === null) return;
    const now = Date.now();
    const wait = this.lastIssueAt + MIN_REQUEST_INTERVAL_MS - now;
    if (wait <= 0 && this.debounceTimer === null) {
      this.issueRefresh();
      return;
    }
    if (this.debounceTimer === null) {
      this.debounceTimer = setTimeout(() => {
        this.debounceTimer = null;
        this.issueRefresh();
      }, Math.max(wait, 0));
    }
    // a timer is already pending; it will read the latest target when it fires
  }

  private issueRefresh(): void {
    this.lastIssueAt = Date.now();
    const target = { ...this.state.target };
    this.retrieveChannel.issue({
      target,
      tau: this.state.tau,
      sourceId: this.state.sourceId!,
    });
    this.weightsChannel.issue(target);
    this.notify();
  }

  runSweep(vValues: number[], aValues: number[]): void {
    if (this.state.sourceId === null) {
      throw new Error("select a source record before sweeping");
    }
    if (vValues.length > MAX_SWEEP_SIDE || aValues.length > MAX_SWEEP_SIDE) {
      throw new RangeError(`sweep grids are limited to ${MAX_SWEEP_SIDE}x${MAX_SWEEP_SIDE}`);
    }
    if (vValues.length === 0 || aValues.length === 0) {
      throw new RangeError("sweep needs at least one value per axis");
    }
    const bad = [...vValues, ...aValues].find((x) => !(x >= -1 && x <= 1));
    if (bad !== undefined) {
      throw new RangeError(`sweep values must lie in [-1, 1], got ${bad}`);
    }
    this.sweepChannel.issue({
      vValues,
      aValues,
      tau: this.state.tau,
      sourceId: this.state.sourceId,
    });
    this.notify();
  }

  /** Resolves once every panel's in-flight and queued work has settled. */
  async idle(): Promise<void> {
    // debounce timers fire on their own; callers advancing fake timers or
    // waiting in real time only need the channels to drain
    await Promise.all([
      this.retrieveChannel.idle(),
      this.weightsChannel.idle(),
      this.sweepChannel.idle(),
    ]);
  }
}

/**
 * Client for the line-delimited JSON environment served by `eed2d serve-env`.
 *
 * One request per line on the child's stdin, one JSON reply per line on its
 * stdout; replies arrive strictly in request order.
 */

import { ChildProcessByStdio, spawn } from 'node:child_process';
import { once } from 'node:events';
import * as readline from 'node:readline';
import type { Readable, Writable } from 'node:stream';

type EnvChild = ChildProcessByStdio<Writable, Readable, null>;

export interface BridgeOptions {
  /** number of downlink users */
  k: number;
  /** number of BS antennas */
  m: number;
  seed?: number;
  mode?: 'fixed' | 'redraw';
  csi?: 'perfect' | 'imperfect';
  sigmaEps2?: number;
  /** command used to launch the environment (override for tests) */
  python?: string;
  /** extra key=value lines appended to the generated config file */
  extraConfig?: Record<string, string | number>;
}

export interface ResetReply {
  state: number[];
  k: number;
  m: number;
}

export interface StepReply {
  state: number[];
  reward: number;
  feasible: boolean;
  ee: number;
  rates: { users: number[]; d2d: number; harvested_w?: number; d2d_tx_w?: number };
}

interface Pending {
  resolve: (value: any) => void;
  reject: (err: Error) => void;
}

export class EnvBridge {
  private child: EnvChild;
  private queue: Pending[] = [];
  private closed = false;
  readonly stateDim: number;
  readonly actionDim: number;

  private constructor(child: EnvChild, k: number, m: number) {
    this.child = child;
    this.stateDim = 4 * k + 3 + (k * (k - 1)) / 2;
    this.actionDim = 1 + 2 * m * k;
    const rl = readline.createInterface({ input: child.stdout });
    rl.on('line', (line) => {
      const pending = this.queue.shift();
      if (!pending) return;
      try {
        const msg = JSON.parse(line);
        if (msg.error) pending.reject(new Error(`bridge error: ${msg.error}`));
        else pending.resolve(msg);
      } catch (err) {
        pending.reject(err as Error);
      }
    });
    child.on('exit', () => {
      this.closed = true;
      for (const p of this.queue.splice(0)) p.reject(new Error('bridge exited'));
    });
  }

  static async launch(opts: BridgeOptions): Promise<EnvBridge> {
    const fs = await import('node:fs/promises');
    const os = await import('node:os');
    const path = await import('node:path');
    const dir = await fs.mkdtemp(path.join(os.tmpdir(), 'eed2d-env-'));
    const cfgPath = path.join(dir, 'env.cfg');
    const lines = [`k = ${opts.k}`, `m = ${opts.m}`];
    for (const [key, value] of Object.entries(opts.extraConfig ?? {})) {
      lines.push(`${key} = ${value}`);
    }
    await fs.writeFile(cfgPath, lines.join('\n') + '\n');

    const args = [
      '-m',
      'eed2d.cli',
      'serve-env',
      '--config',
      cfgPath,
      '--seed',
      String(opts.seed ?? 0),
      '--mode',
      opts.mode ?? 'fixed',
      '--csi',
      opts.csi ?? 'perfect',
    ];
    if (opts.sigmaEps2 !== undefined) {
      args.push('--sigma-eps', String(opts.sigmaEps2));
    }
    const child = spawn(opts.python ?? 'python3', args, {
      stdio: ['pipe', 'pipe', 'inherit'],
    });
    await once(child, 'spawn');
    return new EnvBridge(child, opts.k, opts.m);
  }

  private request<T>(payload: object): Promise<T> {
    if (this.closed) return Promise.reject(new Error('bridge already closed'));
    return new Promise<T>((resolve, reject) => {
      this.queue.push({ resolve, reject });
      this.child.stdin.write(JSON.stringify(payload) + '\n');
    });
  }

  reset(seed?: number): Promise<ResetReply> {
    return this.request<ResetReply>(seed === undefined ? { cmd: 'reset' } : { cmd: 'reset', seed });
  }

  step(action: number[] | Float32Array): Promise<StepReply> {
    for (const v of action) {
      if (!Number.isFinite(v)) throw new Error('action contains non-finite entries');
    }
    return this.request<StepReply>({ cmd: 'step', action: Array.from(action) });
  }

  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.request<{ closed: boolean }>({ cmd: 'close' });
    } catch {
      // the child may already be gone
    }
    this.closed = true;
    this.child.stdin.end();
  }
}

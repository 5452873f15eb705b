/**
 * Circular experience replay for continuous actions.
 *
 * Sampling is uniform without replacement within a batch (a batch never
 * repeats a transition), while the buffer itself overwrites oldest-first
 * once capacity is reached.
 */

export interface Transition {
  state: Float32Array;
  action: Float32Array;
  reward: number;
  nextState: Float32Array;
}

export class ReplayBuffer {
  private buffer: Transition[];
  private position = 0;
  private filled = 0;

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error('capacity must be >= 1');
    this.buffer = new Array(capacity);
  }

  get size(): number {
    return this.filled;
  }

  push(t: Transition): void {
    this.buffer[this.position] = t;
    this.position = (this.position + 1) % this.capacity;
    this.filled = Math.min(this.filled + 1, this.capacity);
  }

  /** Uniform sample of `n` distinct transitions (requires n <= size). */
  sample(n: number, rng: () => number = Math.random): Transition[] {
    if (n > this.filled) throw new Error(`cannot sample ${n} of ${this.filled}`);
    // partial Fisher-Yates over an index pool
    const idx = Array.from({ length: this.filled }, (_, i) => i);
    const out: Transition[] = [];
    for (let i = 0; i < n; i++) {
      const j = i + Math.floor(rng() * (this.filled - i));
      [idx[i], idx[j]] = [idx[j], idx[i]];
      out.push(this.buffer[idx[i]]);
    }
    return out;
  }
}

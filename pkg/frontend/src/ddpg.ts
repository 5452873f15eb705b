/**
 * DDPG with four networks: actor/critic plus their targets.
 *
 * Per learning step on a sampled mini-batch of N transitions:
 *   critic minimizes (y - Q(s, a))^2 with y = r + gamma * Q'(s', mu'(s')),
 *   actor ascends the chained gradient of Q(s, mu(s)),
 *   targets track the evaluation networks by theta' <- xi*theta + (1-xi)*theta'.
 *
 * The actor's raw outputs are unconstrained: the environment re-scales the
 * beam block to the exact power budget and squashes the first entry into a
 * valid time-switching coefficient.
 */

import * as tf from '@tensorflow/tfjs';
import { ReplayBuffer, Transition } from './replay.js';

export interface AgentConfig {
  stateDim: number;
  actionDim: number;
  hidden: number[];
  actorLr: number;
  criticLr: number;
  gamma: number;
  /** soft-update coefficient */
  xi: number;
  batchSize: number;
  replayCapacity: number;
  noiseScale: number;
  noiseDecay: number; // linear: scale_t = noiseScale * max(0, 1 - t/decaySteps)
  noiseDecaySteps: number;
  /** rewards are stored divided by this (EE magnitudes are ~1e3-1e4) */
  rewardScale: number;
  /** store log1p(reward)/rewardScale instead of reward/rewardScale; the
   * transform is monotone, so the best action is unchanged while the
   * critic's target surface loses its cliff */
  logReward: boolean;
  /** actor outputs squashed to [-actionBound, actionBound] */
  actionBound: number;
  seed?: number;
}

export const defaultConfig = (stateDim: number, actionDim: number): AgentConfig => ({
  stateDim,
  actionDim,
  hidden: [64, 64],
  actorLr: 1e-3,
  criticLr: 1e-3,
  gamma: 0.9,
  xi: 0.01,
  batchSize: 64,
  replayCapacity: 50_000,
  noiseScale: 1.0,
  noiseDecay: 1.0,
  noiseDecaySteps: 8_000,
  rewardScale: 1.0,
  logReward: false,
  actionBound: 3.0,
  seed: 0,
});

function mlp(
  inputDim: number,
  hidden: number[],
  outputDim: number,
  seed: number,
  outputBound?: number,
): tf.Sequential {
  const model = tf.sequential();
  hidden.forEach((units, i) => {
    model.add(
      tf.layers.dense({
        units,
        activation: 'relu',
        inputShape: i === 0 ? [inputDim] : undefined,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + i }),
      }),
    );
  });
  model.add(
    tf.layers.dense({
      units: outputDim,
      // a bounded actor keeps the tau squash out of its saturated tails
      // and the critic inputs in a sane range; the environment's power
      // rescaling is direction-invariant so the bound costs nothing
      activation: outputBound !== undefined ? 'tanh' : undefined,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 100 }),
    }),
  );
  if (outputBound !== undefined && outputBound !== 1.0) {
    model.add(
      tf.layers.rescaling({ scale: outputBound }),
    );
  }
  return model;
}

/** Deterministic LCG so training runs are reproducible. */
export function makeRng(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

export function gaussian(rng: () => number): number {
  // Box-Muller; rng() in [0, 1)
  const u = Math.max(rng(), 1e-12);
  const v = rng();
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
}

export class DdpgAgent {
  readonly config: AgentConfig;
  readonly replay: ReplayBuffer;
  actor: tf.Sequential;
  critic: tf.Sequential;
  actorTarget: tf.Sequential;
  criticTarget: tf.Sequential;
  private actorOpt: tf.Optimizer;
  private criticOpt: tf.Optimizer;
  private rng: () => number;
  private steps = 0;

  constructor(config: AgentConfig) {
    if (!(config.xi > 0 && config.xi <= 1)) throw new Error('xi must be in (0, 1]');
    if (!(config.gamma >= 0 && config.gamma < 1)) throw new Error('gamma must be in [0, 1)');
    if (config.batchSize < 1) throw new Error('batchSize must be >= 1');
    this.config = config;
    this.replay = new ReplayBuffer(config.replayCapacity);
    const seed = config.seed ?? 0;
    const bound = config.actionBound;
    this.actor = mlp(config.stateDim, config.hidden, config.actionDim, seed, bound);
    this.critic = this.buildCritic(seed + 1000);
    this.actorTarget = mlp(config.stateDim, config.hidden, config.actionDim, seed, bound);
    this.criticTarget = this.buildCritic(seed + 1000);
    this.copyWeights(this.actor, this.actorTarget);
    this.copyWeights(this.critic, this.criticTarget);
    this.actorOpt = tf.train.adam(config.actorLr);
    this.criticOpt = tf.train.adam(config.criticLr);
    this.rng = makeRng(seed);
  }

  private buildCritic(seed: number): tf.Sequential {
    // Q(s, a): the concatenated [state, action] vector through an MLP
    return mlp(this.config.stateDim + this.config.actionDim, this.config.hidden, 1, seed);
  }

  private copyWeights(src: tf.Sequential, dst: tf.Sequential): void {
    dst.setWeights(src.getWeights().map((w) => w.clone()));
  }

  /** Deterministic policy output. */
  act(state: Float32Array): Float32Array {
    return tf.tidy(() => {
      const s = tf.tensor2d(state, [1, this.config.stateDim]);
      const a = this.actor.predict(s) as tf.Tensor2D;
      return new Float32Array(a.dataSync());
    });
  }

  /** Policy output plus decayed Gaussian exploration noise. */
  actNoisy(state: Float32Array): Float32Array {
    const a = this.act(state);
    const decay = Math.max(0, 1 - this.steps / this.config.noiseDecaySteps);
    const scale = this.config.noiseScale * decay;
    for (let i = 0; i < a.length; i++) a[i] += scale * gaussian(this.rng);
    return a;
  }

  remember(t: Transition): void {
    const r = this.config.logReward ? Math.log1p(Math.max(t.reward, 0)) : t.reward;
    this.replay.push({ ...t, reward: r / this.config.rewardScale });
  }

  /** One gradient step on a sampled mini-batch; no-op until it fills. */
  learn(): { criticLoss: number; actorObjective: number } | null {
    const { batchSize, gamma, stateDim, actionDim } = this.config;
    if (this.replay.size < batchSize) {
      this.steps++;
      return null;
    }
    const batch = this.replay.sample(batchSize, this.rng);
    const result = tf.tidy(() => {
      const states = tf.tensor2d(
        batch.flatMap((t) => Array.from(t.state)),
        [batchSize, stateDim],
      );
      const actions = tf.tensor2d(
        batch.flatMap((t) => Array.from(t.action)),
        [batchSize, actionDim],
      );
      const rewards = tf.tensor2d(batch.map((t) => t.reward), [batchSize, 1]);
      const nextStates = tf.tensor2d(
        batch.flatMap((t) => Array.from(t.nextState)),
        [batchSize, stateDim],
      );

      // y = r + gamma * Q'(s', mu'(s'))
      const nextActions = this.actorTarget.predict(nextStates) as tf.Tensor2D;
      const nextQ = this.criticTarget.predict(
        tf.concat([nextStates, nextActions], 1),
      ) as tf.Tensor2D;
      const y = rewards.add(nextQ.mul(gamma));

      const criticLoss = this.criticOpt.minimize(
        () => {
          const q = this.critic.predict(tf.concat([states, actions], 1)) as tf.Tensor2D;
          return q.sub(y).square().mean() as tf.Scalar;
        },
        true,
        this.critic.getWeights(true) as tf.Variable[],
      ) as tf.Scalar;

      const actorObjective = this.actorOpt.minimize(
        () => {
          const a = this.actor.predict(states) as tf.Tensor2D;
          const q = this.critic.predict(tf.concat([states, a], 1)) as tf.Tensor2D;
          return q.mean().mul(-1) as tf.Scalar;
        },
        true,
        this.actor.getWeights(true) as tf.Variable[],
      ) as tf.Scalar;

      return {
        criticLoss: criticLoss.dataSync()[0],
        actorObjective: -actorObjective.dataSync()[0],
      };
    });
    this.softUpdate();
    this.steps++;
    return result;
  }

  /** theta' <- xi * theta + (1 - xi) * theta' for both target networks. */
  softUpdate(): void {
    const { xi } = this.config;
    for (const [src, dst] of [
      [this.actor, this.actorTarget],
      [this.critic, this.criticTarget],
    ] as const) {
      const blended = tf.tidy(() =>
        src.getWeights().map((w, i) => w.mul(xi).add(dst.getWeights()[i].mul(1 - xi))),
      );
      dst.setWeights(blended);
      blended.forEach((t) => t.dispose());
    }
  }

  /** Serializable snapshot of all four networks (format internal, v1). */
  async snapshot(): Promise<object> {
    const dump = async (net: tf.Sequential) => ({
      weights: net.getWeights().map((w) => ({
        shape: w.shape,
        values: Array.from(w.dataSync()),
      })),
    });
    return {
      version: 1,
      config: this.config,
      actor: await dump(this.actor),
      critic: await dump(this.critic),
      actorTarget: await dump(this.actorTarget),
      criticTarget: await dump(this.criticTarget),
    };
  }

  restore(snapshot: any): void {
    if (snapshot.version !== 1) throw new Error('unknown snapshot version');
    const load = (net: tf.Sequential, dump: any) => {
      net.setWeights(
        dump.weights.map((w: any) => tf.tensor(w.values, w.shape)),
      );
    };
    load(this.actor, snapshot.actor);
    load(this.critic, snapshot.critic);
    load(this.actorTarget, snapshot.actorTarget);
    load(this.criticTarget, snapshot.criticTarget);
  }
}

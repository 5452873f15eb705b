/**
 * Training loop against the stdio environment.
 *
 * Punished (reward 0) transitions are stored like any other, matching how
 * the environment reports them.  Alongside the usual learning curve the
 * run tracks the best single-step reward ever seen, which is the
 * selection rule used for the reported result.
 */

import * as fs from 'node:fs/promises';
import { EnvBridge } from './bridge.js';
import { DdpgAgent, AgentConfig } from './ddpg.js';

export interface TrainOptions {
  episodes: number;
  stepsPerEpisode: number;
  /** reseed the environment every episode (redraw mode only) */
  reseedEachEpisode?: boolean;
  curvePath?: string;
  snapshotPath?: string;
  log?: (line: string) => void;
}

export interface CurvePoint {
  episode: number;
  step: number;
  reward: number;
  feasible: boolean;
}

export interface TrainResult {
  bestReward: number;
  bestAction: Float32Array | null;
  bestEpisode: number;
  curve: CurvePoint[];
  episodeReturns: number[];
}

export async function train(
  agent: DdpgAgent,
  bridge: EnvBridge,
  opts: TrainOptions,
): Promise<TrainResult> {
  const curve: CurvePoint[] = [];
  const episodeReturns: number[] = [];
  let bestReward = -Infinity;
  let bestAction: Float32Array | null = null;
  let bestEpisode = -1;

  for (let episode = 0; episode < opts.episodes; episode++) {
    const reset = await bridge.reset(
      opts.reseedEachEpisode ? episode : undefined,
    );
    let state = Float32Array.from(reset.state);
    let episodeReturn = 0;

    for (let step = 0; step < opts.stepsPerEpisode; step++) {
      const action = agent.actNoisy(state);
      const reply = await bridge.step(action);
      const nextState = Float32Array.from(reply.state);
      agent.remember({ state, action, reward: reply.reward, nextState });
      agent.learn();

      episodeReturn += reply.reward;
      curve.push({ episode, step, reward: reply.reward, feasible: reply.feasible });
      if (reply.reward > bestReward) {
        bestReward = reply.reward;
        bestAction = action.slice();
        bestEpisode = episode;
      }
      state = nextState;
    }
    episodeReturns.push(episodeReturn / opts.stepsPerEpisode);
    if (opts.log && (episode + 1) % 25 === 0) {
      opts.log(
        `episode ${episode + 1}/${opts.episodes} mean reward ${(
          episodeReturn / opts.stepsPerEpisode
        ).toFixed(2)} best ${bestReward.toFixed(2)}`,
      );
    }
  }

  if (opts.curvePath) {
    const lines = ['episode,step,reward,feasible'];
    for (const p of curve) {
      lines.push(`${p.episode},${p.step},${p.reward},${p.feasible}`);
    }
    await fs.writeFile(opts.curvePath, lines.join('\n') + '\n');
  }
  if (opts.snapshotPath) {
    const snap = {
      ...(await agent.snapshot()),
      bestReward,
      bestAction: bestAction ? Array.from(bestAction) : null,
    };
    await fs.writeFile(opts.snapshotPath, JSON.stringify(snap));
  }
  return { bestReward, bestAction, bestEpisode, curve, episodeReturns };
}

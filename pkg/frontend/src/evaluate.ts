/**
 * Deterministic policy evaluation: no exploration noise, fresh seeds.
 */

import { EnvBridge } from './bridge.js';
import { DdpgAgent } from './ddpg.js';

export interface EvalResult {
  meanEe: number;
  bestEe: number;
  feasibleRate: number;
  perSeed: { seed: number; ee: number; feasible: boolean }[];
}

export async function evaluate(
  agent: DdpgAgent,
  bridge: EnvBridge,
  seeds: number[],
  stepsPerSeed = 1,
): Promise<EvalResult> {
  const perSeed: EvalResult['perSeed'] = [];
  let feasibleSteps = 0;
  let totalSteps = 0;
  for (const seed of seeds) {
    const reset = await bridge.reset(seed);
    let state = Float32Array.from(reset.state);
    let ee = 0;
    let feasible = false;
    for (let i = 0; i < stepsPerSeed; i++) {
      const reply = await bridge.step(agent.act(state));
      totalSteps += 1;
      if (reply.feasible) feasibleSteps += 1;
      if (reply.reward >= ee) {
        ee = reply.reward;
        feasible = reply.feasible;
      }
      state = Float32Array.from(reply.state);
    }
    perSeed.push({ seed, ee, feasible });
  }
  const ees = perSeed.map((r) => r.ee);
  return {
    meanEe: ees.reduce((a, b) => a + b, 0) / ees.length,
    bestEe: Math.max(...ees),
    feasibleRate: feasibleSteps / Math.max(totalSteps, 1),
    perSeed,
  };
}

/**
 * Minimal CLI: `train` runs a fixed-channel training session and writes the
 * learning curve + snapshot; `evaluate` reloads a snapshot and reports the
 * deterministic policy's EE over fresh seeds.
 */

import * as fs from 'node:fs/promises';
import { EnvBridge } from './bridge.js';
import { DdpgAgent, defaultConfig } from './ddpg.js';
import { evaluate } from './evaluate.js';
import { train } from './train.js';

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 ? process.argv[i + 1] : fallback;
}

async function main() {
  const command = process.argv[2];
  const k = Number(arg('k', '1'));
  const m = Number(arg('m', '2'));
  const seed = Number(arg('seed', '0'));
  const csi = arg('csi', 'perfect') as 'perfect' | 'imperfect';
  const sigmaEps2 = Number(arg('sigma-eps', '0'));
  const snapshotPath = arg('snapshot', 'ddpg-snapshot.json');

  const bridge = await EnvBridge.launch({ k, m, seed, csi, sigmaEps2 });
  const agent = new DdpgAgent({
    ...defaultConfig(bridge.stateDim, bridge.actionDim),
    seed,
  });

  try {
    if (command === 'train') {
      const episodes = Number(arg('episodes', '500'));
      const steps = Number(arg('steps', '20'));
      const result = await train(agent, bridge, {
        episodes,
        stepsPerEpisode: steps,
        curvePath: arg('curve', 'learning-curve.csv'),
        snapshotPath,
        log: console.log,
      });
      console.log(
        JSON.stringify({ bestReward: result.bestReward, bestEpisode: result.bestEpisode }),
      );
    } else if (command === 'evaluate') {
      const snapshot = JSON.parse(await fs.readFile(snapshotPath, 'utf-8'));
      agent.restore(snapshot);
      const trials = Number(arg('trials', '10'));
      const seeds = Array.from({ length: trials }, (_, i) => seed + 1000 + i);
      const result = await evaluate(agent, bridge, seeds);
      console.log(JSON.stringify(result));
    } else {
      console.error('usage: cli.ts train|evaluate [--k N] [--m N] [--seed N] ...');
      process.exitCode = 2;
    }
  } finally {
    await bridge.close();
  }
}

main().catch((err) => {
  console.error(err);
  process.exitCode = 1;
});

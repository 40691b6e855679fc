// Live acceptance tests against a running play service. Enabled when
// SLOTWORLD_SERVICE_URL and SLOTWORLD_CHECKPOINT_ID are set (the Python
// side's serve command provides both); otherwise skipped.

import { describe, expect, it } from "vitest";

import { PlayClient } from "../src/api/client";
import { SessionController } from "../src/state/session";

const serverUrl = process.env.SLOTWORLD_SERVICE_URL;
const checkpointId = process.env.SLOTWORLD_CHECKPOINT_ID ?? "default";
const seedFrameB64 = process.env.SLOTWORLD_SEED_FRAME_B64;

const live = serverUrl && seedFrameB64 ? describe : describe.skip;

async function sha256Hex(text: string): Promise<string> {
  const data = new TextEncoder().encode(text);
  const digest = await crypto.subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

live("live play loop (S1/S2)", () => {
  it(
    "15 prototype steps reproduce exactly under action-log replay, with low overhead",
    { timeout: 120_000 },
    async () => {
      const client = new PlayClient(serverUrl!);
      const controller = new SessionController(client);
      await controller.create({
        mode: "user",
        checkpoint_id: checkpointId,
        seed: 123,
        seed_frame_b64: seedFrameB64!,
      });

      const hashes: string[] = [];
      const overheads: number[] = [];
      const codebook = await client.getCodebook(checkpointId);
      for (let step = 0; step < 15; step++) {
        const proto = step % codebook.k;
        const started = performance.now();
        const resp = await controller.step(proto);
        const elapsed = performance.now() - started;
        overheads.push(elapsed - resp.compute_ms);
        hashes.push(await sha256Hex(resp.frame_b64));
      }

      // Replay the same action log into a fresh session: hashes must match.
      const log = controller.replayLog();
      const replayController = new SessionController(client);
      await replayController.create({
        mode: "user",
        checkpoint_id: checkpointId,
        seed: 123,
        seed_frame_b64: seedFrameB64!,
      });
      for (let i = 0; i < log.length; i++) {
        const resp = await replayController.step(log[i].prototype_index, log[i].variability);
        expect(await sha256Hex(resp.frame_b64)).toBe(hashes[i]);
      }

      const meanOverhead = overheads.reduce((a, b) => a + b, 0) / overheads.length;
      expect(meanOverhead).toBeLessThan(100);
    },
  );

  it("rewind-by-replay reproduces byte-identical frames for the prefix", { timeout: 120_000 }, async () => {
    const client = new PlayClient(serverUrl!);
    const controller = new SessionController(client);
    await controller.create({
      mode: "user",
      checkpoint_id: checkpointId,
      seed: 77,
      seed_frame_b64: seedFrameB64!,
    });
    const frames: string[] = [];
    for (const proto of [0, 1, 2, 0, 1, 2]) {
      const resp = await controller.step(proto);
      frames.push(resp.frame_b64);
    }
    const replayed = await controller.rewind(4);
    expect(replayed.map((f) => f.frameB64)).toEqual(frames.slice(0, 4));
  });
});

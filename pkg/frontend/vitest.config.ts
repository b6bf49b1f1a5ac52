import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    testTimeout: 600_000,
    hookTimeout: 120_000,
    // one worker: tests share a spawned service and a generated benchmark
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});

import { defineConfig } from "vitest/config";

// tests spawn the registration pipeline's CLI (renders run in-process there);
// run files serially so process startup and rendering do not contend
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 240_000,
    fileParallelism: false,
  },
});

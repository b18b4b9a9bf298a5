import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the integration suite boots the Python service and drives a full run
    testTimeout: 90_000,
    hookTimeout: 30_000,
  },
});

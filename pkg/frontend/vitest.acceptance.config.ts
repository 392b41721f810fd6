import { defineConfig } from "vitest/config";

// The scripted end-to-end run: boots the real service (stub provider) and
// drives the UI against it, so timeouts are generous.
export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/acceptance.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 120_000,
  },
});

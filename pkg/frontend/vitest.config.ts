import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    // the live test drives a real server and a real study run
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});

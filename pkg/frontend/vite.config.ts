import { defineConfig } from "vitest/config";

export default defineConfig({
  base: "/ui/",
  build: { outDir: "dist" },
  server: {
    proxy: {
      "/projects": "http://127.0.0.1:8400",
      "/sessions": "http://127.0.0.1:8400",
    },
  },
  test: {
    environment: "jsdom",
  },
});

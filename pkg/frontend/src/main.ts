import { ExplorerApp } from "./app";

// API base URL: same-origin by default (vite dev proxies /api), overridable
// via ?api=http://host:port or a build-time env var.
const params = new URLSearchParams(window.location.search);
const apiBaseUrl =
  params.get("api") ?? (import.meta.env.VITE_API_BASE_URL as string | undefined) ?? "";
const thumbnailTemplate =
  (import.meta.env.VITE_THUMBNAIL_TEMPLATE as string | undefined) ?? undefined;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root");
void new ExplorerApp(root, { apiBaseUrl, thumbnailTemplate }).start();

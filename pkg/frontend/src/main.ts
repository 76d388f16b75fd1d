import { ApiClient } from "./api";
import { App } from "./app";

declare global {
  interface Window {
    SENTRANK_API_BASE?: string;
  }
}

const base = window.SENTRANK_API_BASE ?? "";
const root = document.getElementById("app");
if (root) new App(root, new ApiClient(base));

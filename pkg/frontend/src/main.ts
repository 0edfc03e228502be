import { BridgeClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(location.search);
const base = params.get("bridge") ?? "http://127.0.0.1:8441";
const root = document.getElementById("app");
if (!(root instanceof HTMLElement)) throw new Error("missing #app mount point");

const app = createApp(root, new BridgeClient(base));
void app.start();

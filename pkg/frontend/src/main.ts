// App shell: wires the store to the pad, panels, and controls.
// Configuration is a single service base URL (input box or ?api=).

import { ApiClient } from "./api.js";
import { VaPad } from "./pad.js";
import { bannerHtml, resultPanelHtml, sweepHtml, weightsHtml } from "./panels.js";
import { ExplorerStore } from "./store.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function boot(): void {
  const params = new URLSearchParams(location.search);
  const baseInput = el<HTMLInputElement>("base-url");
  baseInput.value = params.get("api") ?? "http://127.0.0.1:8000";

  let store = new ExplorerStore(new ApiClient(baseInput.value));
  const pad = new VaPad(el<HTMLCanvasElement>("pad"), () => store);

  const banner = el<HTMLDivElement>("banner");
  const result = el<HTMLDivElement>("result-panel");
  const weights = el<HTMLDivElement>("weights-panel");
  const sweepPanel = el<HTMLDivElement>("sweep-panel");
  const status = el<HTMLSpanElement>("status");
  const tauSlider = el<HTMLInputElement>("tau");
  const tauValue = el<HTMLSpanElement>("tau-value");
  const sourceInput = el<HTMLInputElement>("source-id");

  function render(): void {
    banner.innerHTML = bannerHtml(store.state);
    result.innerHTML = resultPanelHtml(store.state);
    weights.innerHTML = weightsHtml(store.state);
    sweepPanel.innerHTML = sweepHtml(store.state);
    tauValue.textContent = store.state.tau.toFixed(2);
    status.textContent = store.state.pendingRequests > 0 ? "querying..." : "";
  }

  function connect(): void {
    const client = new ApiClient(baseInput.value);
    store = new ExplorerStore(client);
    store.subscribe(render);
    store.subscribe(() => pad.draw());
    client
      .health()
      .then((h) => {
        status.textContent = `${h.records} records, dim ${h.embedding_dim}`;
      })
      .catch((e) => {
        status.textContent = `service unreachable: ${e}`;
      });
    const source = params.get("source") ?? sourceInput.value;
    if (source) {
      sourceInput.value = source;
      store.setSource(source);
    }
    render();
  }

  el<HTMLButtonElement>("connect").addEventListener("click", connect);
  el<HTMLButtonElement>("use-source").addEventListener("click", () => {
    if (sourceInput.value) store.setSource(sourceInput.value.trim());
  });
  tauSlider.addEventListener("input", () => {
    store.setTau(Number(tauSlider.value));
  });
  el<HTMLButtonElement>("run-sweep").addEventListener("click", () => {
    const axis = [-0.8, 0, 0.8];
    try {
      store.runSweep(axis, axis);
    } catch (e) {
      sweepPanel.innerHTML = `<p class="hint">${String(e)}</p>`;
    }
  });

  connect();
}

document.addEventListener("DOMContentLoaded", boot);

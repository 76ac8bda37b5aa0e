// Page wiring: a diagnosis stepper and a pathway explorer over the serve API.

import { ApiClient } from "./api.js";
import { layoutSankey, renderSankey } from "./sankey.js";
import { StepperFlow, FlowState } from "./stepper.js";

const api = new ApiClient("");
let flow = new StepperFlow(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderFlow(state: FlowState): void {
  const panel = el<HTMLDivElement>("stepper-state");
  const banner = el<HTMLDivElement>("stepper-banner");
  banner.textContent = "";
  banner.className = "banner hidden";
  const crumb = state.breadcrumb
    .map((h) => (h.entered === null ? h.label : `${h.label}=${h.entered}`))
    .join(" → ");
  el<HTMLDivElement>("breadcrumb").textContent = crumb;

  if (state.phase === "awaiting-value" && state.suggestion) {
    panel.innerHTML = "";
    const label = document.createElement("div");
    label.className = "suggestion";
    label.textContent = `Suggested test: ${state.suggestion.label}`;
    panel.appendChild(label);
    el<HTMLDivElement>("entry-controls").classList.remove("hidden");
  } else if (state.phase === "diagnosed") {
    el<HTMLDivElement>("entry-controls").classList.add("hidden");
    panel.innerHTML = `<div class="diagnosis">Diagnosis: <b>${state.diagnosis}</b></div>`;
    const bars = document.createElement("div");
    bars.className = "scores";
    for (const s of state.scores) {
      const row = document.createElement("div");
      row.className = "score-row";
      row.innerHTML =
        `<span class="score-label">${s.label}</span>` +
        `<span class="score-bar" style="width:${Math.round(280 * s.value)}px"></span>` +
        `<span>${(100 * s.value).toFixed(1)}%</span>`;
      bars.appendChild(row);
    }
    panel.appendChild(bars);
  } else if (state.phase === "aborted") {
    el<HTMLDivElement>("entry-controls").classList.add("hidden");
    panel.textContent = "Session ended without a diagnosis.";
  } else if (state.phase === "expired") {
    banner.textContent = "Session expired. Start a new one.";
    banner.className = "banner";
  } else if (state.phase === "error") {
    banner.textContent = `Network problem: ${state.error}. Your session is preserved.`;
    banner.className = "banner";
  }
}

async function refreshPolicies(): Promise<void> {
  const docs = await api.policies();
  for (const selectId of ["policy-select", "graph-policy-select"]) {
    const select = el<HTMLSelectElement>(selectId);
    select.innerHTML = "";
    for (const p of docs) {
      const opt = document.createElement("option");
      opt.value = p.id;
      opt.textContent = `${p.id} (${p.use_case}, ${p.kind})`;
      select.appendChild(opt);
    }
  }
}

async function drawGraph(): Promise<void> {
  const policy = el<HTMLSelectElement>("graph-policy-select").value;
  const classes = el<HTMLInputElement>("class-filter").value.trim();
  const topK = el<HTMLInputElement>("top-k").value.trim();
  const panel = el<HTMLDivElement>("sankey-error");
  panel.textContent = "";
  try {
    const graph = await api.pathways(
      policy,
      classes ? classes.split(",").map((c) => c.trim()) : undefined,
      topK ? Number(topK) : undefined
    );
    if (graph.schema !== "pathway-graph/1") {
      panel.textContent = `unsupported graph schema: ${graph.schema}`;
      return;
    }
    if (graph.nodes.length === 0) {
      panel.textContent = "No pathways for this filter.";
    }
    renderSankey(el<HTMLElement>("sankey") as unknown as SVGSVGElement, layoutSankey(graph));
  } catch (err) {
    panel.textContent = String(err);
  }
}

function bind(): void {
  el<HTMLButtonElement>("start-session").onclick = async () => {
    flow = new StepperFlow(api);
    renderFlow(await flow.start(el<HTMLSelectElement>("policy-select").value));
  };
  el<HTMLButtonElement>("submit-value").onclick = async () => {
    const raw = el<HTMLInputElement>("value-input").value;
    if (raw.trim() === "") return;
    renderFlow(await flow.submit(Number(raw)));
    el<HTMLInputElement>("value-input").value = "";
  };
  el<HTMLButtonElement>("submit-missing").onclick = async () => {
    renderFlow(await flow.submit("missing"));
  };
  el<HTMLButtonElement>("draw-graph").onclick = drawGraph;
  el<HTMLInputElement>("class-filter").onchange = drawGraph;
  el<HTMLInputElement>("top-k").onchange = drawGraph;
  refreshPolicies().catch((err) => {
    el<HTMLDivElement>("stepper-banner").textContent = String(err);
  });
}

bind();

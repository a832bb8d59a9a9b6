// Operator console wiring: sliders -> debounced search -> result grid,
// plus label suggestions with a confidence-floor slider.

import { ApiError, getHealth, getLabels, getPresets, postClassify } from "./api.js";
import { SearchController } from "./controller.js";
import type { Kind, LabelSpaceInfo, Preset, SuggestionRow } from "./types.js";
import { gridTiles, suggestionBars, weightBadge } from "./view.js";
import {
  applyPreset,
  displayWeights,
  initialState,
  searchEnabled,
  setSlider,
  type WeightPanelState,
} from "./weights.js";

const base = "";

const el = {
  banner: document.getElementById("banner") as HTMLDivElement,
  sliders: document.getElementById("sliders") as HTMLDivElement,
  presets: document.getElementById("presets") as HTMLDivElement,
  normalized: document.getElementById("normalized") as HTMLDivElement,
  grid: document.getElementById("grid") as HTMLDivElement,
  gridMeta: document.getElementById("grid-meta") as HTMLDivElement,
  suggestions: document.getElementById("suggestions") as HTMLDivElement,
  queryId: document.getElementById("query-id") as HTMLInputElement,
  queryFile: document.getElementById("query-file") as HTMLInputElement,
  kSelect: document.getElementById("k-select") as HTMLSelectElement,
  floor: document.getElementById("floor") as HTMLInputElement,
  floorValue: document.getElementById("floor-value") as HTMLSpanElement,
  searchButton: document.getElementById("search-button") as HTMLButtonElement,
  classifyButton: document.getElementById("classify-button") as HTMLButtonElement,
  method: document.getElementById("method") as HTMLSelectElement,
};

let panel: WeightPanelState = { sliders: {}, activePreset: null };
let labelNames: Partial<Record<Kind, Map<number, string>>> = {};
let classifyKinds: Kind[] = [];
let lastSuggestions: Partial<Record<Kind, SuggestionRow[]>> = {};

const controller = new SearchController(base, {
  onResults: (response) => {
    el.banner.hidden = true;
    el.gridMeta.textContent =
      `${response.hits.length} hit(s), weights ${weightBadge(response.weights as Record<string, number>)}`;
    el.grid.replaceChildren(
      ...gridTiles(response, labelNames).map((tile) => {
        const card = document.createElement("figure");
        card.className = "tile";
        const img = document.createElement("img");
        img.src = tile.thumbnail;
        img.alt = `logo ${tile.id}`;
        const caption = document.createElement("figcaption");
        caption.textContent = `#${tile.id} d=${tile.distanceText}`;
        const labels = document.createElement("small");
        labels.textContent = tile.labelText;
        card.append(img, caption, labels);
        return card;
      }),
    );
    if (response.hits.length === 0) {
      el.grid.textContent = "no results for this query";
    }
  },
  onError: (error) => {
    el.banner.hidden = false;
    el.banner.textContent =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    // previous results stay on screen
  },
});

function currentQuery(): void {
  const file = el.queryFile.files?.[0];
  if (file) {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      controller.query = { image_b64: url.slice(url.indexOf(",") + 1) };
      refreshSearch();
    };
    reader.readAsDataURL(file);
    return;
  }
  const id = parseInt(el.queryId.value, 10);
  controller.query = Number.isFinite(id) ? { logo_id: id } : null;
  refreshSearch();
}

function renderPanel(): void {
  for (const [kind, value] of Object.entries(panel.sliders)) {
    const input = el.sliders.querySelector<HTMLInputElement>(`input[data-kind="${kind}"]`);
    if (input) input.value = String(value);
  }
  const weights = displayWeights(panel);
  el.normalized.textContent = Object.entries(weights)
    .map(([kind, w]) => `${kind}: ${w.toFixed(3)}`)
    .join("   ");
  const enabled = searchEnabled(panel);
  el.searchButton.disabled = !enabled;
  el.searchButton.title = enabled ? "" : "all sliders are at zero; raise at least one";
}

function refreshSearch(): void {
  renderPanel();
  if (searchEnabled(panel)) controller.queueSearch(panel);
}

function buildSliders(kinds: Kind[]): void {
  panel = initialState(kinds);
  el.sliders.replaceChildren(
    ...kinds.map((kind) => {
      const row = document.createElement("label");
      row.className = "slider-row";
      const name = document.createElement("span");
      name.textContent = kind.replace("_", " ");
      const input = document.createElement("input");
      input.type = "range";
      input.min = "0";
      input.max = "100";
      input.dataset.kind = kind;
      input.value = String(panel.sliders[kind]);
      input.addEventListener("input", () => {
        panel = setSlider(panel, kind, Number(input.value));
        refreshSearch();
      });
      row.append(name, input);
      return row;
    }),
  );
}

function buildPresets(presets: Preset[]): void {
  el.presets.replaceChildren(
    ...presets.map((preset) => {
      const button = document.createElement("button");
      button.textContent = preset.name.replace("_", " / ");
      button.addEventListener("click", () => {
        panel = applyPreset(panel, preset);
        refreshSearch();
      });
      return button;
    }),
  );
}

function renderSuggestions(): void {
  const floor = Number(el.floor.value) / 100;
  el.floorValue.textContent = `${el.floor.value}%`;
  const sections: HTMLElement[] = [];
  for (const [kind, rows] of Object.entries(lastSuggestions)) {
    const section = document.createElement("section");
    const heading = document.createElement("h3");
    heading.textContent = kind.replace("_", " ");
    section.append(heading);
    const bars = suggestionBars(rows ?? [], floor);
    if (bars.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "nothing above the floor";
      section.append(empty);
    }
    for (const bar of bars) {
      const row = document.createElement("div");
      row.className = "bar-row";
      const fill = document.createElement("div");
      fill.className = "bar";
      fill.style.width = `${Math.round(bar.confidence * 100)}%`;
      const text = document.createElement("span");
      text.textContent = `${bar.name} ${bar.percentText}`;
      row.append(fill, text);
      section.append(row);
    }
    sections.push(section);
  }
  el.suggestions.replaceChildren(...sections);
}

async function classify(): Promise<void> {
  if (controller.query === null) return;
  try {
    const response = await postClassify(
      base, controller.query, classifyKinds, el.method.value, 0.0,
    );
    lastSuggestions = response.results;
    renderSuggestions();
  } catch (error) {
    el.banner.hidden = false;
    el.banner.textContent =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
  }
}

async function boot(): Promise<void> {
  try {
    const [health, labels, presets] = await Promise.all([
      getHealth(base),
      getLabels(base),
      getPresets(base),
    ]);
    const kinds = Object.keys(health.schema) as Kind[];
    labelNames = {};
    classifyKinds = [];
    for (const space of labels.spaces as LabelSpaceInfo[]) {
      labelNames[space.kind] = new Map(space.labels.map((l) => [l.id, l.name]));
      if (kinds.includes(space.kind)) classifyKinds.push(space.kind);
    }
    buildSliders(kinds);
    buildPresets(presets.presets.filter((p) =>
      Object.keys(p.weights).every((kind) => kinds.includes(kind as Kind)),
    ));
    controller.k = presets.default_k;
    el.floor.value = String(Math.round(presets.confidence_floor * 100));
    renderPanel();
  } catch (error) {
    el.banner.hidden = false;
    el.banner.textContent = `service unreachable: ${String(error)}`;
  }
}

el.queryId.addEventListener("change", currentQuery);
el.queryFile.addEventListener("change", currentQuery);
el.kSelect.addEventListener("change", () => {
  controller.k = Number(el.kSelect.value);
  refreshSearch();
});
el.searchButton.addEventListener("click", () => void controller.searchNow(panel));
el.classifyButton.addEventListener("click", () => void classify());
el.floor.addEventListener("input", renderSuggestions);

void boot();

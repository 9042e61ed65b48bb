import { createPredictClient } from './api';
import { diffColor, heatColor, layerColor } from './colormap';
import { decodeNpy, encodeNpy } from './npy';
import { formatValue, panelFrom } from './panel';
import { canvasToGrid, drawGrid } from './render';
import {
  createState,
  diffView,
  EditorState,
  paintStroke,
  pinBaseline,
  setLayerValues,
  undo,
} from './state';
import { GRID_SIZE, LAYER_NAMES, LayerName, StrokePoint } from './types';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let state: EditorState = createState();
let showDiff = false;
let busy = false;

const serverInput = $<HTMLInputElement>('server-url');
const client = () => createPredictClient(serverInput.value.replace(/\/$/, ''));

const editorCanvas = $<HTMLCanvasElement>('editor');
const resultCanvas = $<HTMLCanvasElement>('result');
const banner = $<HTMLDivElement>('banner');

const showError = (message: string) => {
  banner.textContent = message;
  banner.style.display = 'block';
};
const clearError = () => {
  banner.style.display = 'none';
};

const renderEditor = () => {
  drawGrid(editorCanvas, state.layers[state.activeLayer], layerColor);
};

const renderResult = () => {
  const last = state.lastResponse;
  if (showDiff && last && state.baseline) {
    const d = diffView(last, state.baseline);
    drawGrid(resultCanvas, d.values, diffColor);
    $('diff-stats').textContent =
      `Δmax ${formatValue(d.deltaMax)}  Δhotspots ${d.deltaHotspots}`;
  } else if (last) {
    drawGrid(resultCanvas, last.ir_drop.flat(), heatColor);
    $('diff-stats').textContent = '';
  }
  if (last) {
    const panel = panelFrom(last);
    $('stat-max').textContent = formatValue(panel.maxIrDrop);
    $('stat-mean').textContent = formatValue(panel.meanIrDrop);
    $('stat-count').textContent = String(panel.hotspotCount);
    $('stat-ms').textContent = `${formatValue(panel.inferenceMs, 1)} ms`;
    const badge = $<HTMLSpanElement>('stat-risk');
    badge.textContent = panel.riskLevel;
    badge.className = `badge ${panel.riskLevel.toLowerCase()}`;
  }
  $<HTMLButtonElement>('btn-diff').disabled = !state.baseline;
};

const runPredict = async () => {
  if (busy) return;
  busy = true;
  $<HTMLButtonElement>('btn-predict').disabled = true;
  try {
    const response = await client().predict(state.layers);
    if (response) {
      state = { ...state, lastResponse: response };
      clearError();
      renderResult();
    }
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  } finally {
    busy = false;
    $<HTMLButtonElement>('btn-predict').disabled = false;
  }
};

// --- painting -------------------------------------------------------------

let stroke: StrokePoint[] | null = null;

editorCanvas.addEventListener('pointerdown', (ev) => {
  stroke = [canvasToGrid(editorCanvas, ev.clientX, ev.clientY)];
  editorCanvas.setPointerCapture(ev.pointerId);
});

editorCanvas.addEventListener('pointermove', (ev) => {
  if (!stroke) return;
  stroke.push(canvasToGrid(editorCanvas, ev.clientX, ev.clientY));
  // live preview: paint a transient copy
  const preview = paintStroke(state, state.activeLayer, stroke, state.brush);
  drawGrid(editorCanvas, preview.layers[state.activeLayer], layerColor);
});

editorCanvas.addEventListener('pointerup', () => {
  if (!stroke) return;
  state = paintStroke(state, state.activeLayer, stroke, state.brush);
  stroke = null;
  renderEditor();
  void runPredict();
});

// --- controls ---------------------------------------------------------------

for (const name of LAYER_NAMES) {
  $(`tab-${name}`).addEventListener('click', () => {
    state = { ...state, activeLayer: name };
    document
      .querySelectorAll('.tab')
      .forEach((el) => el.classList.toggle('active', el.id === `tab-${name}`));
    renderEditor();
  });
}

$<HTMLInputElement>('brush-radius').addEventListener('input', (ev) => {
  state.brush.radius = Number((ev.target as HTMLInputElement).value);
});
$<HTMLInputElement>('brush-intensity').addEventListener('input', (ev) => {
  state.brush.intensity = Number((ev.target as HTMLInputElement).value);
});

$('btn-undo').addEventListener('click', () => {
  state = undo(state);
  renderEditor();
  void runPredict();
});

$('btn-predict').addEventListener('click', () => void runPredict());

$('btn-pin').addEventListener('click', () => {
  state = pinBaseline(state);
  renderResult();
});

$('btn-diff').addEventListener('click', () => {
  showDiff = !showDiff;
  $('btn-diff').textContent = showDiff ? 'Show prediction' : 'Show diff';
  renderResult();
});

$('btn-clear').addEventListener('click', () => {
  state = setLayerValues(
    state,
    state.activeLayer,
    new Float64Array(GRID_SIZE * GRID_SIZE),
  );
  renderEditor();
});

// --- .npy import / export ---------------------------------------------------

$<HTMLInputElement>('file-import').addEventListener('change', async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files && input.files[0];
  if (!file) return;
  try {
    const parsed = decodeNpy(new Uint8Array(await file.arrayBuffer()));
    if (parsed.shape.length !== 2 || parsed.shape[0] !== GRID_SIZE || parsed.shape[1] !== GRID_SIZE) {
      throw new Error(`expected a (${GRID_SIZE}, ${GRID_SIZE}) array, got (${parsed.shape})`);
    }
    state = setLayerValues(state, state.activeLayer, parsed.data);
    clearError();
    renderEditor();
    void runPredict();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  } finally {
    input.value = '';
  }
});

$('btn-export').addEventListener('click', () => {
  const bytes = encodeNpy(state.layers[state.activeLayer], [GRID_SIZE, GRID_SIZE], 'f4');
  const blob = new Blob([bytes], { type: 'application/octet-stream' });
  const link = document.createElement('a');
  link.href = URL.createObjectURL(blob);
  link.download = `${state.activeLayer}.npy`;
  link.click();
  URL.revokeObjectURL(link.href);
});

// --- bundled fixtures --------------------------------------------------------

interface Fixture {
  name: string;
  inputs: Record<LayerName, number[][]>;
}

$<HTMLSelectElement>('fixture-select').addEventListener('change', async (ev) => {
  const value = (ev.target as HTMLSelectElement).value;
  if (!value) return;
  try {
    const res = await fetch(`fixtures/${value}.json`);
    if (!res.ok) throw new Error(`cannot load fixture (${res.status})`);
    const fixture = (await res.json()) as Fixture;
    for (const name of LAYER_NAMES) {
      state = setLayerValues(state, name, Float64Array.from(fixture.inputs[name].flat()));
    }
    clearError();
    renderEditor();
    void runPredict();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  }
});

// --- boot ---------------------------------------------------------------------

renderEditor();
client()
  .health()
  .then((h) => {
    $('health').textContent = `service ok · model ${h.model_version}`;
  })
  .catch(() => {
    $('health').textContent = 'service unreachable';
  });

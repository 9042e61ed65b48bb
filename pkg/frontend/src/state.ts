import { applyStroke } from './brush';
import {
  BrushSettings,
  GRID_SIZE,
  LAYER_NAMES,
  LayerName,
  PredictResponse,
  StrokePoint,
} from './types';

export type Layers = Record<LayerName, Float64Array>;

export interface EditorState {
  layers: Layers;
  activeLayer: LayerName;
  brush: BrushSettings;
  lastResponse: PredictResponse | null;
  baseline: PredictResponse | null;
  undoStack: { layer: LayerName; values: Float64Array }[];
}

export const createState = (): EditorState => ({
  layers: {
    power_grid: new Float64Array(GRID_SIZE * GRID_SIZE),
    cell_density: new Float64Array(GRID_SIZE * GRID_SIZE),
    switching: new Float64Array(GRID_SIZE * GRID_SIZE),
  },
  activeLayer: 'power_grid',
  brush: { radius: 6, intensity: 0.35 },
  lastResponse: null,
  baseline: null,
  undoStack: [],
});

export const paintStroke = (
  state: EditorState,
  layer: LayerName,
  path: StrokePoint[],
  brush: BrushSettings,
): EditorState => ({
  ...state,
  layers: {
    ...state.layers,
    [layer]: applyStroke(state.layers[layer], path, brush),
  },
  undoStack: [...state.undoStack, { layer, values: state.layers[layer].slice() }],
});

export const undo = (state: EditorState): EditorState => {
  const top = state.undoStack[state.undoStack.length - 1];
  if (!top) return state;
  return {
    ...state,
    layers: { ...state.layers, [top.layer]: top.values.slice() },
    undoStack: state.undoStack.slice(0, -1),
  };
};

export const setLayerValues = (
  state: EditorState,
  layer: LayerName,
  values: Float64Array,
): EditorState => {
  if (values.length !== GRID_SIZE * GRID_SIZE) {
    throw new Error(`layer must have ${GRID_SIZE * GRID_SIZE} values`);
  }
  return {
    ...state,
    layers: { ...state.layers, [layer]: values.slice() },
    undoStack: [...state.undoStack, { layer, values: state.layers[layer].slice() }],
  };
};

export const pinBaseline = (state: EditorState): EditorState =>
  state.lastResponse
    ? { ...state, baseline: structuredClone(state.lastResponse) }
    : state;

export interface DiffView {
  values: Float64Array; // current minus baseline, row-major
  deltaMax: number;
  deltaHotspots: number;
}

export const diffView = (
  current: PredictResponse,
  baseline: PredictResponse,
): DiffView => {
  const values = new Float64Array(GRID_SIZE * GRID_SIZE);
  for (let y = 0; y < GRID_SIZE; y += 1) {
    for (let x = 0; x < GRID_SIZE; x += 1) {
      values[y * GRID_SIZE + x] = current.ir_drop[y][x] - baseline.ir_drop[y][x];
    }
  }
  return {
    values,
    deltaMax: current.max_ir_drop - baseline.max_ir_drop,
    deltaHotspots: current.hotspot_count - baseline.hotspot_count,
  };
};

export const layersAsNested = (layers: Layers): Record<LayerName, number[][]> => {
  const nested = {} as Record<LayerName, number[][]>;
  for (const name of LAYER_NAMES) {
    const rows: number[][] = [];
    for (let y = 0; y < GRID_SIZE; y += 1) {
      rows.push(Array.from(layers[name].subarray(y * GRID_SIZE, (y + 1) * GRID_SIZE)));
    }
    nested[name] = rows;
  }
  return nested;
};

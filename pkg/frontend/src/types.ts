export const GRID_SIZE = 64;

export type LayerName = 'power_grid' | 'cell_density' | 'switching';

export const LAYER_NAMES: LayerName[] = ['power_grid', 'cell_density', 'switching'];

export interface PredictResponse {
  ir_drop: number[][];
  max_ir_drop: number;
  mean_ir_drop: number;
  hotspot_count: number;
  risk_level: string;
  threshold_used: number;
  inference_ms: number;
  model_version?: string;
}

export interface BrushSettings {
  radius: number;
  intensity: number;
}

export interface StrokePoint {
  x: number;
  y: number;
}

import { PredictResponse } from './types';

/**
 * Risk panel view-model. The values are the service response fields verbatim
 * — no client-side recomputation — so the panel always matches what the CLI
 * would print for the same inputs.
 */
export interface RiskPanel {
  maxIrDrop: number;
  meanIrDrop: number;
  hotspotCount: number;
  riskLevel: string;
  thresholdUsed: number;
  inferenceMs: number;
}

export const panelFrom = (response: PredictResponse): RiskPanel => ({
  maxIrDrop: response.max_ir_drop,
  meanIrDrop: response.mean_ir_drop,
  hotspotCount: response.hotspot_count,
  riskLevel: response.risk_level,
  thresholdUsed: response.threshold_used,
  inferenceMs: response.inference_ms,
});

export const formatValue = (value: number, digits = 4): string =>
  Number.isInteger(value) ? String(value) : value.toFixed(digits);

import { Layers, layersAsNested } from './state';
import { PredictResponse } from './types';

export interface PredictClient {
  predict(layers: Layers, threshold?: number): Promise<PredictResponse | null>;
  health(): Promise<{ status: string; model_version: string }>;
}

/**
 * Prediction client with latest-wins semantics: if another request is issued
 * while one is in flight, the earlier response resolves to null and must be
 * discarded by the caller.
 */
export const createPredictClient = (
  baseUrl: string,
  fetchFn: typeof fetch = fetch,
): PredictClient => {
  let token = 0;
  return {
    async predict(layers, threshold) {
      token += 1;
      const mine = token;
      const body: Record<string, unknown> = layersAsNested(layers);
      if (threshold !== undefined) body.threshold = threshold;
      const res = await fetchFn(`${baseUrl}/predict`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body),
      });
      if (mine !== token) return null; // a newer request superseded this one
      if (!res.ok) {
        let detail = `${res.status}`;
        try {
          const payload = await res.json();
          if (payload && payload.detail) detail = `${res.status}: ${payload.detail}`;
        } catch {
          // keep the bare status
        }
        throw new Error(`predict failed (${detail})`);
      }
      return (await res.json()) as PredictResponse;
    },
    async health() {
      const res = await fetchFn(`${baseUrl}/health`);
      if (!res.ok) throw new Error(`health check failed (${res.status})`);
      return res.json();
    },
  };
};

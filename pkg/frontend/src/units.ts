/** Gas channels travel as scaled integers (value x 100); temperature and
 * the rest already arrive in engineering units. Mirrors the server's
 * rendering rules so charts plot %vol, not raw counts. */

const SCALED_BY_100 = new Set(['methane', 'oxygen']);

export function engineeringValue(kind: string, value: number): number {
  return SCALED_BY_100.has(kind) ? value / 100 : value;
}

export function formatValue(kind: string, value: number): string {
  const v = engineeringValue(kind, value);
  switch (kind) {
    case 'temperature':
      return `${v.toFixed(1)} °C`;
    case 'light':
      return `${v} lx`;
    case 'methane':
      return `${v.toFixed(2)} %vol`;
    case 'oxygen':
      return `${v.toFixed(2)} %vol`;
    case 'co':
      return `${v} ppm`;
    default:
      return String(v);
  }
}

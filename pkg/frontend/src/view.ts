// Map geometry: fitting the scene into a canvas and shaping vehicles.
// World coordinates are meters, y up; canvas pixels go y down.

export interface Viewport {
  scale: number; // px per meter
  cx: number; // world point at the canvas center
  cy: number;
  width: number; // canvas size in px
  height: number;
}

export function fitPoints(
  points: Iterable<[number, number]>,
  width: number,
  height: number,
  marginPx = 30,
): Viewport {
  let xlo = Infinity, xhi = -Infinity, ylo = Infinity, yhi = -Infinity;
  for (const [x, y] of points) {
    if (x < xlo) xlo = x;
    if (x > xhi) xhi = x;
    if (y < ylo) ylo = y;
    if (y > yhi) yhi = y;
  }
  if (xlo > xhi) {
    return { scale: 100, cx: 0, cy: 0, width, height };
  }
  const spanX = Math.max(xhi - xlo, 1e-9);
  const spanY = Math.max(yhi - ylo, 1e-9);
  const scale = Math.min(
    (width - 2 * marginPx) / spanX,
    (height - 2 * marginPx) / spanY,
  );
  return {
    scale: Math.max(scale, 1e-9),
    cx: (xlo + xhi) / 2,
    cy: (ylo + yhi) / 2,
    width,
    height,
  };
}

export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [
    vp.width / 2 + (x - vp.cx) * vp.scale,
    vp.height / 2 - (y - vp.cy) * vp.scale,
  ];
}

/** Rectangle corners of a vehicle body in world coordinates, centered on
 * (x, y), long axis along yaw. Width is cosmetic: the simulation treats
 * bodies as lengths along their paths. */
export function vehicleOutline(
  x: number,
  y: number,
  yaw: number,
  length: number,
  aspect = 0.44,
): [number, number][] {
  const hl = length / 2;
  const hw = (length * aspect) / 2;
  const c = Math.cos(yaw);
  const s = Math.sin(yaw);
  const corners: [number, number][] = [
    [hl, hw],
    [hl, -hw],
    [-hl, -hw],
    [-hl, hw],
  ];
  return corners.map(([lx, ly]) => [x + lx * c - ly * s, y + lx * s + ly * c]);
}

// Gesture-to-command mapping.  Pure functions: the connection layer turns
// their results into exactly one wire message each.

import type { CameraState } from "./protocol.js";

export interface OrbitDelta {
  yaw: number;
  pitch: number;
  zoom: number;
}

/** Horizontal drag orbits around the up axis: dragging right yaws positive. */
export function dragToOrbit(
  dxPx: number,
  dyPx: number,
  viewWidth: number,
  viewHeight: number,
): OrbitDelta {
  return {
    yaw: (dxPx / viewWidth) * Math.PI,
    pitch: (dyPx / viewHeight) * (Math.PI / 2),
    zoom: 1.0,
  };
}

/** Wheel away (positive deltaY) backs the camera off. */
export function wheelToZoom(deltaY: number): OrbitDelta {
  return { yaw: 0, pitch: 0, zoom: deltaY > 0 ? 1.1 : 1 / 1.1 };
}

export interface PointerRay {
  origin: [number, number, number];
  dir: [number, number, number];
}

/**
 * Reconstruct the server camera from its orbit parameters and cast a ray
 * through a frame pixel.  Mirrors the service's pinhole convention:
 * u = 2(i+0.5)/w - 1, v = 1 - 2(j+0.5)/h,
 * dir = normalize(forward + u*tan(fov/2)*aspect*right + v*tan(fov/2)*up).
 */
export function clickToPointerRay(
  pxX: number,
  pxY: number,
  frameWidth: number,
  frameHeight: number,
  camera: CameraState,
): PointerRay {
  const sinY = Math.sin(camera.yaw);
  const cosY = Math.cos(camera.yaw);
  const sinP = Math.sin(camera.pitch);
  const cosP = Math.cos(camera.pitch);
  const forward = [cosP * sinY, cosP * cosY, -sinP];
  const up = [sinP * sinY, sinP * cosY, cosP];
  const right = [
    forward[1] * up[2] - forward[2] * up[1],
    forward[2] * up[0] - forward[0] * up[2],
    forward[0] * up[1] - forward[1] * up[0],
  ];
  const eye = camera.center_mm.map(
    (c, k) => c - forward[k] * camera.distance_mm,
  ) as [number, number, number];

  const tanHalf = Math.tan(camera.vertical_fov / 2);
  const aspect = frameWidth / frameHeight;
  const u = (2 * (pxX + 0.5)) / frameWidth - 1;
  const v = 1 - (2 * (pxY + 0.5)) / frameHeight;
  const dir = [0, 1, 2].map(
    (k) => forward[k] + u * tanHalf * aspect * right[k] + v * tanHalf * up[k],
  );
  const norm = Math.hypot(dir[0], dir[1], dir[2]);
  return {
    origin: eye,
    dir: [dir[0] / norm, dir[1] / norm, dir[2] / norm],
  };
}

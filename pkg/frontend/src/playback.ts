// Trajectory playback: frame timing, world-to-canvas projection, and the
// actual track/car drawing. Drawing targets a minimal 2D-context surface so
// the whole module stays testable without a browser canvas.

import type { CarPose, CourseGeometry, Frame, FrameDoc } from "./api.js";

// ---------------------------------------------------------------- timing

/** Frame clock over one recorded trajectory. */
export class Playback {
  constructor(readonly doc: FrameDoc) {
    if (doc.frames.length === 0) throw new Error("frame document is empty");
    if (doc.fps <= 0) throw new Error("fps must be positive");
  }

  get fps(): number {
    return this.doc.fps;
  }

  /** Seconds spanned by the recording (first frame sits at t=0). */
  get duration(): number {
    return (this.doc.frames.length - 1) / this.doc.fps;
  }

  /** Nearest frame to t, clamped to the recording. */
  frameIndexAt(t: number): number {
    const i = Math.round(t * this.doc.fps);
    return Math.min(Math.max(i, 0), this.doc.frames.length - 1);
  }

  frameAt(t: number): Frame {
    const frame = this.doc.frames[this.frameIndexAt(t)];
    if (frame === undefined) throw new Error("frame index out of range");
    return frame;
  }

  agentCar(frame: Frame): CarPose {
    const car = frame.cars.find((c) => c.index === frame.agent_index);
    if (car === undefined) throw new Error(`agent car ${frame.agent_index} missing from frame`);
    return car;
  }

  /** Times where the agent is in contact with another car. */
  collisionTimes(): number[] {
    return this.flaggedTimes((car) => car.collision);
  }

  /** Times where the agent has left the track surface. */
  offCourseTimes(): number[] {
    return this.flaggedTimes((car) => car.off_course);
  }

  private flaggedTimes(flag: (car: CarPose) => boolean): number[] {
    return this.doc.frames.filter((f) => flag(this.agentCar(f))).map((f) => f.time);
  }

  /** Positions of event times along the scrub bar, as fractions in [0, 1]. */
  markerFractions(times: number[]): number[] {
    const span = this.duration;
    if (span <= 0) return times.map(() => 0);
    return times.map((t) => Math.min(Math.max(t / span, 0), 1));
  }
}

// ---------------------------------------------------------------- camera

export interface Viewport {
  scale: number; // world units -> pixels
  offsetX: number;
  offsetY: number;
}

/** Fit a set of world points into a width x height canvas, y flipped. */
export function fitViewport(
  points: readonly (readonly [number, number])[],
  width: number,
  height: number,
  margin = 24,
): Viewport {
  if (points.length === 0) throw new Error("cannot fit an empty point set");
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  // center the world bbox on the canvas; canvas y grows downward
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return { scale, offsetX: width / 2 - cx * scale, offsetY: height / 2 + cy * scale };
}

export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.offsetX + x * vp.scale, vp.offsetY - y * vp.scale];
}

// ---------------------------------------------------------------- drawing

/** The slice of CanvasRenderingContext2D the renderer actually uses. */
export interface Ctx2D {
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  font: string;
  textAlign: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
}

export const PALETTE = {
  background: "#101418",
  asphalt: "#2a2f36",
  edge: "#8b93a1",
  centerline: "#4a5260",
  agent: "#4cc2ff",
  opponent: "#c7cdd8",
  collision: "#ff5d5d",
  offCourse: "#ffb347",
  text: "#e8ebf0",
} as const;

/** Left/right track edges: centerline points pushed out along local normals. */
export function courseEdges(
  course: CourseGeometry,
): { left: [number, number][]; right: [number, number][] } {
  const pts = course.centerline;
  const n = pts.length;
  const left: [number, number][] = [];
  const right: [number, number][] = [];
  for (let i = 0; i < n; i++) {
    const prev = pts[(i - 1 + n) % n]!;
    const next = pts[(i + 1) % n]!;
    const here = pts[i]!;
    const tx = next[0] - prev[0];
    const ty = next[1] - prev[1];
    const len = Math.hypot(tx, ty) || 1e-9;
    const nx = -ty / len;
    const ny = tx / len;
    left.push([here[0] + nx * course.half_width, here[1] + ny * course.half_width]);
    right.push([here[0] - nx * course.half_width, here[1] - ny * course.half_width]);
  }
  return { left, right };
}

function tracePolyline(ctx: Ctx2D, vp: Viewport, pts: readonly [number, number][]): void {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(vp, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
}

export function drawCourse(ctx: Ctx2D, course: CourseGeometry, vp: Viewport): void {
  const { left, right } = courseEdges(course);
  // tarmac: fill between the edges (outer edge path + reversed inner path)
  ctx.fillStyle = PALETTE.asphalt;
  ctx.beginPath();
  left.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(vp, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  [...right].reverse().forEach(([x, y]) => {
    const [sx, sy] = worldToScreen(vp, x, y);
    ctx.lineTo(sx, sy);
  });
  ctx.closePath();
  ctx.fill();

  ctx.lineWidth = 1.5;
  ctx.strokeStyle = PALETTE.edge;
  tracePolyline(ctx, vp, left);
  ctx.stroke();
  tracePolyline(ctx, vp, right);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.strokeStyle = PALETTE.centerline;
  tracePolyline(ctx, vp, course.centerline);
  ctx.stroke();
}

export interface DrawStats {
  carsDrawn: number;
  collisionIndices: number[];
  offCourseIndices: number[];
  placeholder: boolean;
}

const CAR_RADIUS_WORLD = 1.1;

/**
 * One frame of cars over the (already drawn) course. A null frame renders
 * the missing-trajectory placeholder instead.
 */
export function drawFrame(ctx: Ctx2D, frame: Frame | null, vp: Viewport, width = 0, height = 0): DrawStats {
  if (frame === null) {
    ctx.fillStyle = PALETTE.text;
    ctx.textAlign = "center";
    ctx.fillText("no trajectory loaded", width / 2, height / 2);
    return { carsDrawn: 0, collisionIndices: [], offCourseIndices: [], placeholder: true };
  }
  const stats: DrawStats = {
    carsDrawn: 0,
    collisionIndices: [],
    offCourseIndices: [],
    placeholder: false,
  };
  const r = Math.max(CAR_RADIUS_WORLD * vp.scale, 3);
  for (const car of frame.cars) {
    const [sx, sy] = worldToScreen(vp, car.x, car.y);
    const isAgent = car.index === frame.agent_index;
    ctx.save();
    ctx.translate(sx, sy);
    ctx.rotate(-car.heading); // world heading is counter-clockwise, canvas y is down
    ctx.fillStyle = car.off_course
      ? PALETTE.offCourse
      : isAgent
        ? PALETTE.agent
        : PALETTE.opponent;
    ctx.beginPath();
    // wedge pointing along the heading
    ctx.moveTo(r * 1.4, 0);
    ctx.lineTo(-r * 0.8, r * 0.7);
    ctx.lineTo(-r * 0.8, -r * 0.7);
    ctx.closePath();
    ctx.fill();
    if (car.collision) {
      ctx.strokeStyle = PALETTE.collision;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(0, 0, r * 1.8, 0, Math.PI * 2);
      ctx.stroke();
      stats.collisionIndices.push(car.index);
    }
    if (car.off_course) stats.offCourseIndices.push(car.index);
    ctx.restore();
    stats.carsDrawn += 1;
  }
  return stats;
}

/** Canvas rendering of a FaceProjection: outline, skin, curves, landmarks. */

import { FaceProjection, Point2 } from "./projection.js";

const RIGID_BONES = new Set(["Jaw", "Head", "Neck", "Chest", "Root", "Hair"]);

function path(ctx: CanvasRenderingContext2D, points: Point2[], closed: boolean): void {
    ctx.beginPath();
    ctx.moveTo(points[0].x, points[0].y);
    for (let i = 1; i < points.length; i++) {
        ctx.lineTo(points[i].x, points[i].y);
    }
    if (closed) ctx.closePath();
}

export function drawFace(ctx: CanvasRenderingContext2D, projection: FaceProjection): void {
    const { width, height } = ctx.canvas;
    ctx.clearRect(0, 0, width, height);

    const head = projection.headOutline;
    ctx.save();
    ctx.translate(head.center.x, head.center.y);
    ctx.rotate(head.rollRad);
    ctx.beginPath();
    ctx.ellipse(0, 0, head.rx, head.ry, 0, 0, 2 * Math.PI);
    ctx.fillStyle = projection.skinFill;
    ctx.fill();
    if (projection.ageOverlayAlpha > 0) {
        ctx.fillStyle = `rgba(90,80,70,${projection.ageOverlayAlpha.toFixed(3)})`;
        ctx.fill();
    }
    ctx.strokeStyle = "#5a4632";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.restore();

    ctx.lineWidth = 2;
    ctx.lineJoin = "round";
    for (const curve of projection.curves) {
        path(ctx, curve.points, curve.closed);
        if (curve.name === "lips") {
            ctx.fillStyle = "rgba(170,80,80,0.85)";
            ctx.fill();
        }
        ctx.strokeStyle = "#47342a";
        ctx.stroke();
    }

    for (const [name, point] of Object.entries(projection.points)) {
        ctx.beginPath();
        ctx.arc(point.x, point.y, 2.5, 0, 2 * Math.PI);
        ctx.fillStyle = RIGID_BONES.has(name) ? "#2e8b57" : "#c8a400";
        ctx.fill();
    }
}

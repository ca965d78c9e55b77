/** Home top-view map: walls on a canvas, icons as a DOM overlay.
 *
 * Walls paint with their decoded width and RGB.  Icons sit absolutely
 * positioned over the canvas; ones with a non-zero OID are buttons wired
 * to the click callback, OID zero marks furniture and stays inert.
 */

import { svgFor } from "./icons.js";
import type { DeviceStat, HomeMap, MapIcon } from "./model.js";

export interface MapCallbacks {
  onDeviceClick: (icon: MapIcon) => void;
}

const SCALE = 12;
const MARGIN = 16;
const ICON_PX = 24;

export class MapView {
  private canvas: HTMLCanvasElement;
  private overlay: HTMLDivElement;
  private banner: HTMLDivElement;
  private lastGood: HomeMap | null = null;

  constructor(private container: HTMLElement, private callbacks: MapCallbacks) {
    this.banner = document.createElement("div");
    this.banner.className = "map-banner";
    this.banner.hidden = true;
    const frame = document.createElement("div");
    frame.className = "map-frame";
    this.canvas = document.createElement("canvas");
    this.overlay = document.createElement("div");
    this.overlay.className = "map-overlay";
    frame.append(this.canvas, this.overlay);
    container.append(this.banner, frame);
  }

  /** Replace the map; on a decode error keep the previous rendering. */
  show(map: HomeMap): void {
    this.lastGood = map;
    this.banner.hidden = true;
    this.paint(map);
  }

  showError(message: string): void {
    this.banner.textContent = message;
    this.banner.hidden = false;
    if (this.lastGood) this.paint(this.lastGood);
  }

  /** Refresh icon art from newer status records without re-laying out. */
  refreshStats(stats: Map<number, DeviceStat>): void {
    if (!this.lastGood) return;
    for (const [oid, stat] of stats) this.lastGood.stats.set(oid, stat);
    for (const element of this.overlay.querySelectorAll<HTMLElement>("[data-oid]")) {
      const oid = Number(element.dataset.oid);
      const stat = this.lastGood.stats.get(oid);
      if (stat && element.dataset.iconId !== stat.iconId) {
        element.dataset.iconId = stat.iconId;
        element.innerHTML = svgFor(stat.iconId);
      }
    }
  }

  private paint(map: HomeMap): void {
    const xs = map.walls.flatMap((w) => w.points.map((p) => p[0]));
    const ys = map.walls.flatMap((w) => w.points.map((p) => p[1]));
    for (const icon of map.icons) {
      xs.push(icon.pos[0]);
      ys.push(icon.pos[1]);
    }
    const w = (Math.max(0, ...xs) + 1) * SCALE + 2 * MARGIN;
    const h = (Math.max(0, ...ys) + 1) * SCALE + 2 * MARGIN;
    this.canvas.width = w;
    this.canvas.height = h;
    const frame = this.canvas.parentElement as HTMLElement;
    frame.style.width = `${w}px`;
    frame.style.height = `${h}px`;

    const ctx = this.canvas.getContext("2d");
    if (ctx) {
      ctx.clearRect(0, 0, w, h);
      ctx.lineCap = "round";
      for (const wall of map.walls) {
        ctx.strokeStyle = `rgb(${wall.rgb[0]},${wall.rgb[1]},${wall.rgb[2]})`;
        ctx.lineWidth = wall.width;
        ctx.beginPath();
        for (const [i, [x, y]] of wall.points.entries()) {
          const px = MARGIN + x * SCALE;
          const py = MARGIN + y * SCALE;
          if (i === 0) ctx.moveTo(px, py);
          else ctx.lineTo(px, py);
        }
        ctx.stroke();
      }
    }

    this.overlay.replaceChildren();
    for (const icon of map.icons) {
      this.overlay.appendChild(this.buildIcon(icon, map.stats.get(icon.oid)));
    }
  }

  private buildIcon(icon: MapIcon, stat: DeviceStat | undefined): HTMLElement {
    const selectable = icon.oid !== 0;
    const element = document.createElement(selectable ? "button" : "div");
    element.className = selectable ? "icon selectable" : "icon inert";
    element.title = icon.name;
    const iconId = stat?.iconId ?? icon.iconId;
    element.dataset.oid = String(icon.oid);
    element.dataset.iconId = iconId;
    element.innerHTML = svgFor(iconId);
    element.style.left = `${MARGIN + icon.pos[0] * SCALE - ICON_PX / 2}px`;
    element.style.top = `${MARGIN + icon.pos[1] * SCALE - ICON_PX / 2}px`;
    if (selectable) {
      element.addEventListener("click", () => this.callbacks.onDeviceClick(icon));
    }
    return element;
  }
}

/** The two-option prompt for a selectable device. */
export function openDeviceDialog(
  icon: MapIcon,
  actions: { checkStatus: () => void; addScenario: () => void },
): HTMLElement {
  closeDeviceDialog();
  const dialog = document.createElement("div");
  dialog.className = "device-dialog";
  dialog.setAttribute("role", "dialog");
  const title = document.createElement("p");
  title.textContent = icon.name;
  const status = document.createElement("button");
  status.textContent = "Check Status";
  const scenario = document.createElement("button");
  scenario.textContent = "Add Scenario";
  const dismiss = () => dialog.remove();
  status.addEventListener("click", () => {
    dismiss();
    actions.checkStatus();
  });
  scenario.addEventListener("click", () => {
    dismiss();
    actions.addScenario();
  });
  dialog.append(title, status, scenario);
  document.body.appendChild(dialog);
  return dialog;
}

export function closeDeviceDialog(): void {
  document.querySelector(".device-dialog")?.remove();
}

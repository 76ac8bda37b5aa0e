// Layered flow-diagram layout for pathway graphs. Pure geometry: nodes form
// depth columns, node heights and link widths are proportional to support.

import { PathwayGraph } from "./api.js";

export interface LaidNode {
  id: string;
  label: string;
  kind: string;
  x: number;
  y: number;
  width: number;
  height: number;
  count: number;
  tooltip: string;
}

export interface LaidLink {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  width: number;
  value: number;
}

export interface Layout {
  width: number;
  height: number;
  nodes: LaidNode[];
  links: LaidLink[];
}

const NODE_W = 18;
const PAD = 12;

export function layoutSankey(graph: PathwayGraph, width = 760, height = 420): Layout {
  const depths = new Map<number, number[]>();
  graph.nodes.forEach((n, i) => {
    const col = depths.get(n.depth) ?? [];
    col.push(i);
    depths.set(n.depth, col);
  });
  const nCols = Math.max(1, depths.size);
  const colX = (d: number) =>
    nCols === 1 ? PAD : PAD + (d * (width - NODE_W - 2 * PAD)) / (nCols - 1);

  // one support unit maps to the same number of pixels everywhere, so link
  // widths are directly comparable (and monotone in support)
  let maxColumnTotal = 1;
  depths.forEach((ids) => {
    const total = ids.reduce((s, i) => s + graph.nodes[i].count, 0);
    maxColumnTotal = Math.max(maxColumnTotal, total);
  });
  const unit = (height - 2 * PAD - 40) / maxColumnTotal;

  const laid: LaidNode[] = new Array(graph.nodes.length);
  depths.forEach((ids, depth) => {
    let y = PAD;
    for (const i of ids) {
      const n = graph.nodes[i];
      const h = Math.max(2, n.count * unit);
      const stats = n.stats;
      const tooltip =
        stats && stats.mean !== null
          ? `${n.label}: count ${stats.count}, mean ${stats.mean.toFixed(2)}, ` +
            `min ${stats.min!.toFixed(2)}, max ${stats.max!.toFixed(2)}`
          : `${n.label}: count ${n.count}`;
      laid[i] = {
        id: n.id,
        label: n.label,
        kind: n.kind,
        x: colX(depth),
        y,
        width: NODE_W,
        height: h,
        count: n.count,
        tooltip,
      };
      y += h + 8;
    }
  });

  const outOffset = new Map<number, number>();
  const inOffset = new Map<number, number>();
  const links: LaidLink[] = graph.links.map((l) => {
    const s = laid[l.source];
    const t = laid[l.target];
    const w = Math.max(1, l.value * unit);
    const oy = outOffset.get(l.source) ?? 0;
    const iy = inOffset.get(l.target) ?? 0;
    outOffset.set(l.source, oy + w);
    inOffset.set(l.target, iy + w);
    return {
      x1: s.x + s.width,
      y1: s.y + oy + w / 2,
      x2: t.x,
      y2: t.y + iy + w / 2,
      width: w,
      value: l.value,
    };
  });

  return { width, height, nodes: laid, links };
}

export function renderSankey(svg: SVGSVGElement, layout: Layout): void {
  const ns = "http://www.w3.org/2000/svg";
  svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);
  while (svg.firstChild) svg.removeChild(svg.firstChild);
  for (const link of layout.links) {
    const path = document.createElementNS(ns, "path");
    const mx = (link.x1 + link.x2) / 2;
    path.setAttribute(
      "d",
      `M ${link.x1} ${link.y1} C ${mx} ${link.y1}, ${mx} ${link.y2}, ${link.x2} ${link.y2}`
    );
    path.setAttribute("class", "sankey-link");
    path.setAttribute("stroke-width", String(link.width));
    const title = document.createElementNS(ns, "title");
    title.textContent = `${link.value} patients`;
    path.appendChild(title);
    svg.appendChild(path);
  }
  for (const node of layout.nodes) {
    const g = document.createElementNS(ns, "g");
    const rect = document.createElementNS(ns, "rect");
    rect.setAttribute("x", String(node.x));
    rect.setAttribute("y", String(node.y));
    rect.setAttribute("width", String(node.width));
    rect.setAttribute("height", String(node.height));
    rect.setAttribute("class", `sankey-node ${node.kind}`);
    const title = document.createElementNS(ns, "title");
    title.textContent = node.tooltip;
    rect.appendChild(title);
    const text = document.createElementNS(ns, "text");
    text.setAttribute("x", String(node.x + node.width + 4));
    text.setAttribute("y", String(node.y + Math.min(node.height, 14)));
    text.setAttribute("class", "sankey-label");
    text.textContent = node.label;
    g.appendChild(rect);
    g.appendChild(text);
    svg.appendChild(g);
  }
}

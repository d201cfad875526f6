"""SVG overlays of scanpaths: numbered circles, radius grows with duration."""
from xml.sax.saxutils import escape

COLORS = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#808000")


def fixation_radius(t_ms):
    return min(30.0, 4.0 + 10.0 * (t_ms / 1000.0))


def scanpath_svg(paths, width=None, height=None, title=None):
    """One polyline plus numbered circles per scanpath."""
    if not paths:
        raise ValueError("nothing to plot")
    width = width or paths[0].img_w
    height = height or paths[0].img_h
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="#f4f4f4" stroke="#999"/>']
    if title:
        out.append(f'<title>{escape(title)}</title>')
    for k, p in enumerate(paths):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(p.x, p.y))
        out.append(f'<g class="scanpath" data-subject="{escape(p.subject)}">')
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2" opacity="0.6"/>')
        for i, (x, y, t) in enumerate(p.fixations, start=1):
            r = fixation_radius(t)
            out.append(f'<circle class="fixation" cx="{x:.1f}" cy="{y:.1f}" r="{r:.1f}" '
                       f'fill="{color}" fill-opacity="0.5" stroke="{color}"/>')
            out.append(f'<text x="{x:.1f}" y="{y + 4:.1f}" font-size="12" text-anchor="middle">{i}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out)


def write_svg(path, paths, **kw):
    with open(path, "w") as fh:
        fh.write(scanpath_svg(paths, **kw))

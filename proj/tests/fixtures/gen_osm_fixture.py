"""Regenerates grid50.osm and its expected manifest grid50.manifest.

Layout: a 5 x 10 lattice of nodes (ids 1001..1050). Streets:
  rows 0..4 are east-west ways (highways vary, row 2 is oneway, row 4 is a footway and must
  be filtered out); columns 0, 4, 9 are north-south residential ways; column 9 also references
  a node (9999) that does not exist. A relation and a few tagged nodes are present as noise.
"""
import pathlib

here = pathlib.Path(__file__).parent
rows, cols = 5, 10
lat0, lon0, step = 37.7700000, -122.4300000, 0.0009
nodes = {}
for r in range(rows):
    for c in range(cols):
        nid = 1001 + r * cols + c
        nodes[nid] = (round(lat0 + r * step, 7), round(lon0 + c * step, 7))

row_highway = ["residential", "primary", "secondary", "tertiary", "footway"]
ways = []  # (id, refs, tags)
for r in range(rows):
    refs = [1001 + r * cols + c for c in range(cols)]
    tags = {"highway": row_highway[r], "name": f"Row {r} St"}
    if r == 2:
        tags["oneway"] = "yes"
    ways.append((2000 + r, refs, tags))
for c in (0, 4, 9):
    refs = [1001 + r * cols + c for r in range(rows)]
    if c == 9:
        refs.insert(2, 9999)
    if c == 4:
        refs = list(reversed(refs))
    tags = {"highway": "residential"}
    if c == 4:
        tags["oneway"] = "-1"
    ways.append((3000 + c, refs, tags))

lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="fixture">',
         '  <bounds minlat="37.77" minlon="-122.43" maxlat="37.7736" maxlon="-122.4219"/>',
         '  <!-- hand-built 50 node fixture -->']
for nid, (lat, lon) in nodes.items():
    if nid % 17 == 0:
        lines.append(f'  <node id="{nid}" lat="{lat}" lon="{lon}" version="1">')
        lines.append('    <tag k="highway" v="traffic_signals"/>')
        lines.append('  </node>')
    else:
        lines.append(f'  <node id="{nid}" lat="{lat}" lon="{lon}" version="1"/>')
for wid, refs, tags in ways:
    lines.append(f'  <way id="{wid}" version="1">')
    for ref in refs:
        lines.append(f'    <nd ref="{ref}"/>')
    for k, v in tags.items():
        lines.append(f'    <tag k="{k}" v="{v}"/>')
    lines.append('  </way>')
lines.append('  <relation id="1"><member type="way" ref="2000" role="outer"/><tag k="type" v="route"/></relation>')
lines.append('</osm>')
(here / "grid50.osm").write_text("\n".join(lines) + "\n")

manifest = []
for nid, (lat, lon) in nodes.items():
    manifest.append(f"node\t{nid}\t{lat!r}\t{lon!r}")
for wid, refs, tags in ways:
    if tags["highway"] == "footway":
        continue
    oneway = {"yes": "forward", "-1": "reverse"}.get(tags.get("oneway", ""), "no")
    kept = [r for r in refs if r in nodes]
    manifest.append(f"way\t{wid}\t{oneway}\t" + ",".join(map(str, kept)))
manifest.append("dangling\t1")
(here / "grid50.manifest").write_text("\n".join(manifest) + "\n")

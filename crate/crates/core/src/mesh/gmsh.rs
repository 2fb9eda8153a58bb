//! Reader and writer for the ASCII Gmsh 2.2 subset used by the solver.
//!
//! Supported: `$MeshFormat` 2.x ASCII, `$Nodes`, `$Elements` with 4-node
//! tetrahedra (type 4) and 3-node triangles (type 2). Points (15) and lines
//! (1) are skipped; any other element type is an error. The first element
//! tag is the physical tag, mapped through a [`TagMap`]. Unknown sections are
//! skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{face_key, signed_volume, BoundaryFace, BoundaryLabel, Mesh, MeshError, Region, Tet};

/// Physical tag ↔ region / boundary label mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    pub regions: BTreeMap<i64, Region>,
    pub boundaries: BTreeMap<i64, BoundaryLabel>,
}

impl Default for TagMap {
    fn default() -> Self {
        let regions = [
            (1, Region::Tube),
            (2, Region::Tsp),
            (3, Region::Defect),
            (4, Region::Coil1),
            (5, Region::Coil2),
            (6, Region::Vacuum),
        ];
        let boundaries = [
            (11, BoundaryLabel::OuterLateral),
            (12, BoundaryLabel::OuterTop),
            (13, BoundaryLabel::OuterBottom),
            (14, BoundaryLabel::Gamma),
            (15, BoundaryLabel::GammaP),
        ];
        TagMap {
            regions: regions.into_iter().collect(),
            boundaries: boundaries.into_iter().collect(),
        }
    }
}

impl TagMap {
    fn region_tag(&self, region: Region) -> i64 {
        self.regions
            .iter()
            .find(|(_, r)| **r == region)
            .map(|(t, _)| *t)
            .unwrap_or(region.index() as i64 + 1)
    }

    fn label_tag(&self, label: BoundaryLabel) -> i64 {
        self.boundaries
            .iter()
            .find(|(_, l)| **l == label)
            .map(|(t, _)| *t)
            .unwrap_or(label as i64 + 11)
    }
}

pub fn load_mesh(path: &Path, tags: &TagMap) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mesh(&text, tags)
}

pub fn write_mesh(mesh: &Mesh, path: &Path, tags: &TagMap) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(mesh, tags)).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                self.line = i + 1;
                return Some(l);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let line = self.line;
        self.next().ok_or_else(|| MeshError::Parse {
            line: line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line,
            message: message.into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| lines.err(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(format!("invalid {what} '{tok}'")))
}

/// Parse mesh text; see the module documentation for the accepted subset.
pub fn parse_mesh(text: &str, tags: &TagMap) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut raw_tets: Vec<([usize; 4], Region, usize)> = Vec::new();
    let mut raw_tris: Vec<([usize; 3], BoundaryLabel, usize)> = Vec::new();
    let mut saw_nodes = false;
    let mut saw_elements = false;
    let mut pending_elements: Vec<(usize, Vec<i64>, i64, i64)> = Vec::new();

    while let Some(l) = lines.next() {
        match l {
            "$MeshFormat" => {
                let f = lines.expect("format line")?;
                let mut it = f.split_whitespace();
                let version: f64 = parse_num(&lines, it.next(), "format version")?;
                let file_type: i64 = parse_num(&lines, it.next(), "file type")?;
                if !(2.0..3.0).contains(&version) || file_type != 0 {
                    return Err(lines.err(format!(
                        "unsupported mesh format '{f}', expected ASCII version 2.2"
                    )));
                }
                close_section(&mut lines, "$EndMeshFormat")?;
            }
            "$Nodes" => {
                let first = lines_next(&mut lines, "node count")?;
                let n: usize = parse_num(&lines, first, "node count")?;
                coords.reserve(n);
                for _ in 0..n {
                    let l = lines.expect("node line")?;
                    let mut it = l.split_whitespace();
                    let id: i64 = parse_num(&lines, it.next(), "node id")?;
                    let mut p = [0.0f64; 3];
                    for (k, c) in p.iter_mut().enumerate() {
                        *c = parse_num(&lines, it.next(), ["x", "y", "z"][k])?;
                    }
                    if !p.iter().all(|c| c.is_finite()) {
                        return Err(lines.err("non-finite node coordinate"));
                    }
                    if node_ids.insert(id, coords.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    coords.push(p);
                }
                close_section(&mut lines, "$EndNodes")?;
                saw_nodes = true;
            }
            "$Elements" => {
                let n: usize =
                    {
                        let first = lines_next(&mut lines, "element count")?;
                        parse_num(&lines, first, "element count")?
                    };
                for _ in 0..n {
                    let l = lines.expect("element line")?;
                    let mut it = l.split_whitespace();
                    let _id: i64 = parse_num(&lines, it.next(), "element id")?;
                    let ty: i64 = parse_num(&lines, it.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, it.next(), "tag count")?;
                    let mut etags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        etags.push(parse_num::<i64>(&lines, it.next(), "tag")?);
                    }
                    let rest: Vec<i64> = it
                        .map(|t| t.parse().map_err(|_| lines.err(format!("invalid node id '{t}'"))))
                        .collect::<Result<_, _>>()?;
                    let expected = match ty {
                        4 => 4,
                        2 => 3,
                        1 => 2,
                        15 => 1,
                        _ => return Err(lines.err(format!("unsupported element type {ty}"))),
                    };
                    if rest.len() != expected {
                        return Err(lines.err(format!(
                            "element type {ty} needs {expected} nodes, found {}",
                            rest.len()
                        )));
                    }
                    if ty == 1 || ty == 15 {
                        continue;
                    }
                    let phys = *etags
                        .first()
                        .ok_or_else(|| lines.err("element without physical tag"))?;
                    pending_elements.push((lines.line, rest, ty, phys));
                }
                close_section(&mut lines, "$EndElements")?;
                saw_elements = true;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                loop {
                    match lines.next() {
                        Some(l) if l == end => break,
                        Some(_) => {}
                        None => return Err(lines.err(format!("missing {end}"))),
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line '{other}'"))),
        }
    }
    if !saw_nodes || !saw_elements {
        return Err(MeshError::Parse {
            line: lines.line,
            message: "file needs both $Nodes and $Elements sections".into(),
        });
    }

    for (line, ids, ty, phys) in pending_elements {
        let err = |message: String| MeshError::Parse { line, message };
        let mut idx = Vec::with_capacity(ids.len());
        for id in ids {
            idx.push(
                *node_ids
                    .get(&id)
                    .ok_or_else(|| err(format!("undefined node id {id}")))?,
            );
        }
        if ty == 4 {
            let region = *tags
                .regions
                .get(&phys)
                .ok_or(MeshError::UnknownTag { line, tag: phys })?;
            raw_tets.push(([idx[0], idx[1], idx[2], idx[3]], region, line));
        } else {
            let label = *tags
                .boundaries
                .get(&phys)
                .ok_or(MeshError::UnknownTag { line, tag: phys })?;
            raw_tris.push(([idx[0], idx[1], idx[2]], label, line));
        }
    }

    // Drop nodes not used by any tetrahedron, keeping file order.
    let mut used = vec![false; coords.len()];
    for (t, _, _) in &raw_tets {
        for &n in t {
            used[n] = true;
        }
    }
    let mut remap = vec![usize::MAX; coords.len()];
    let mut nodes = Vec::new();
    for (n, &u) in used.iter().enumerate() {
        if u {
            remap[n] = nodes.len();
            nodes.push(coords[n]);
        }
    }
    let mut tets = Vec::with_capacity(raw_tets.len());
    for (t, region, _) in &raw_tets {
        tets.push(Tet {
            nodes: t.map(|n| remap[n]),
            region: *region,
        });
    }
    let scale = nodes
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    for (i, t) in tets.iter_mut().enumerate() {
        let v = signed_volume(t.nodes.map(|n| nodes[n]));
        if !(v.abs() > 1e-14 * scale.powi(3)) {
            return Err(MeshError::InvertedTet { tet: i, volume: v });
        }
        if v < 0.0 {
            t.nodes.swap(2, 3);
        }
    }
    let mut boundary_faces = Vec::with_capacity(raw_tris.len());
    for (f, label, line) in &raw_tris {
        if f.iter().any(|&n| remap[n] == usize::MAX) {
            return Err(MeshError::Parse {
                line: *line,
                message: "triangle is not a face of any tetrahedron".into(),
            });
        }
        boundary_faces.push(BoundaryFace {
            nodes: f.map(|n| remap[n]),
            label: *label,
        });
    }

    let mut mesh = Mesh {
        nodes,
        tets,
        boundary_faces,
    };
    let table = mesh.face_table();
    if let Some((face, owners)) = table.overfull.first() {
        return Err(MeshError::NonConforming {
            face: *face,
            count: owners.len(),
        });
    }
    if mesh.boundary_faces.is_empty() {
        mesh.relabel();
    } else {
        let report = mesh.validate();
        if !report.is_empty() {
            log::warn!(
                "stored face labels disagree with region adjacency ({} diagnostics)",
                report.diagnostics.len()
            );
        }
    }
    Ok(mesh)
}

fn lines_next<'a>(lines: &mut Lines<'a>, what: &str) -> Result<Option<&'a str>, MeshError> {
    Ok(Some(lines.expect(what)?))
}

fn close_section(lines: &mut Lines, end: &str) -> Result<(), MeshError> {
    match lines.next() {
        Some(l) if l == end => Ok(()),
        Some(l) => Err(lines.err(format!("expected {end}, found '{l}'"))),
        None => Err(lines.err(format!("missing {end}"))),
    }
}

/// Serialize a mesh in the same subset; coordinates round-trip exactly.
pub fn format_mesh(mesh: &Mesh, tags: &TagMap) -> String {
    let mut s = String::with_capacity(64 * (mesh.nodes.len() + mesh.tets.len()));
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.tets.len() + mesh.boundary_faces.len());
    let mut id = 1;
    for f in &mesh.boundary_faces {
        let tag = tags.label_tag(f.label);
        let [a, b, c] = f.nodes;
        let _ = writeln!(s, "{id} 2 2 {tag} {tag} {} {} {}", a + 1, b + 1, c + 1);
        id += 1;
    }
    for t in &mesh.tets {
        let tag = tags.region_tag(t.region);
        let [a, b, c, d] = t.nodes;
        let _ = writeln!(s, "{id} 4 2 {tag} {tag} {} {} {} {}", a + 1, b + 1, c + 1, d + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

/// Faces keyed by sorted node triple, for label lookups in tests and tools.
pub fn label_lookup(mesh: &Mesh) -> HashMap<[usize; 3], BoundaryLabel> {
    mesh.boundary_faces
        .iter()
        .map(|f| (face_key(f.nodes), f.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_cube_mesh;

    const SINGLE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n\
1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n1\n1 4 2 6 6 1 2 3 4\n$EndElements\n";

    #[test]
    fn single_tet() {
        let m = parse_mesh(SINGLE, &TagMap::default()).unwrap();
        assert_eq!(m.tets.len(), 1);
        assert!((m.total_volume() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.boundary_faces.len(), 4);
    }

    #[test]
    fn face_owned_by_three_tets() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n6\n\
1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n5 0 0 -1\n6 1 1 1\n$EndNodes\n$Elements\n3\n\
1 4 2 6 6 1 2 3 4\n2 4 2 6 6 1 2 3 5\n3 4 2 6 6 1 2 3 6\n$EndElements\n";
        match parse_mesh(text, &TagMap::default()) {
            Err(MeshError::NonConforming { count, .. }) => assert_eq!(count, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = SINGLE.replace("3 0 1 0", "3 0 x 0");
        match parse_mesh(&bad, &TagMap::default()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let unknown = SINGLE.replace("1 4 2 6 6", "1 4 2 99 99");
        assert!(matches!(
            parse_mesh(&unknown, &TagMap::default()),
            Err(MeshError::UnknownTag { tag: 99, .. })
        ));
        let hex = SINGLE.replace("1 4 2 6 6 1 2 3 4", "1 5 2 6 6 1 2 3 4");
        assert!(matches!(
            parse_mesh(&hex, &TagMap::default()),
            Err(MeshError::Parse { .. })
        ));
    }

    #[test]
    fn flat_tet_rejected() {
        let flat = SINGLE.replace("4 0 0 1", "4 1 1 0");
        assert!(matches!(
            parse_mesh(&flat, &TagMap::default()),
            Err(MeshError::InvertedTet { .. })
        ));
    }

    #[test]
    fn negative_orientation_is_canonicalized() {
        let swapped = SINGLE.replace("1 4 2 6 6 1 2 3 4", "1 4 2 6 6 2 1 3 4");
        let m = parse_mesh(&swapped, &TagMap::default()).unwrap();
        assert!(m.tet_volume(0) > 0.0);
    }

    #[test]
    fn cube_round_trip() {
        let m = unit_cube_mesh(2, Region::Tube);
        let back = parse_mesh(&format_mesh(&m, &TagMap::default()), &TagMap::default()).unwrap();
        assert_eq!(back, m);
    }
}

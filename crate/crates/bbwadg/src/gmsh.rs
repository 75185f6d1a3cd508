//! Reader for Gmsh MSH 2.2 ASCII files with linear simplices.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

const TRIANGLE: u32 = 2;
const TETRAHEDRON: u32 = 4;

/// Outcome of a mesh read: the mesh plus the number of elements of other
/// types that were skipped.
pub struct GmshImport {
    pub mesh: Mesh,
    pub skipped_elements: usize,
}

pub fn read_gmsh(path: &Path, dim: usize) -> Result<GmshImport> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    parse_gmsh(&lines, dim)
}

pub fn parse_gmsh(lines: &[String], dim: usize) -> Result<GmshImport> {
    let mut it = lines.iter().map(|s| s.trim()).peekable();
    let mut nodes: Vec<(u64, [f64; 3])> = Vec::new();
    let mut raw_elements: Vec<Vec<u64>> = Vec::new();
    let mut skipped = 0usize;
    let mut saw_format = false;

    while let Some(line) = it.next() {
        match line {
            "$MeshFormat" => {
                let header = it
                    .next()
                    .ok_or_else(|| Error::Gmsh("truncated $MeshFormat".into()))?;
                let mut parts = header.split_whitespace();
                let version = parts
                    .next()
                    .ok_or_else(|| Error::Gmsh("empty format line".into()))?;
                if !version.starts_with("2.") {
                    return Err(Error::Gmsh(format!(
                        "unsupported MSH version {version}, need 2.x ASCII"
                    )));
                }
                let ftype = parts.next().unwrap_or("0");
                if ftype != "0" {
                    return Err(Error::Gmsh("binary MSH files are not supported".into()));
                }
                expect_section_end(&mut it, "$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let count: usize = parse_count(it.next(), "$Nodes")?;
                for _ in 0..count {
                    let l = it
                        .next()
                        .ok_or_else(|| Error::Gmsh("truncated $Nodes".into()))?;
                    let mut p = l.split_whitespace();
                    let id: u64 = p
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Gmsh(format!("bad node line: {l}")))?;
                    let mut xyz = [0.0f64; 3];
                    for c in xyz.iter_mut() {
                        *c = p
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::Gmsh(format!("bad node line: {l}")))?;
                    }
                    nodes.push((id, xyz));
                }
                expect_section_end(&mut it, "$EndNodes")?;
            }
            "$Elements" => {
                let count: usize = parse_count(it.next(), "$Elements")?;
                let wanted = if dim == 2 { TRIANGLE } else { TETRAHEDRON };
                for _ in 0..count {
                    let l = it
                        .next()
                        .ok_or_else(|| Error::Gmsh("truncated $Elements".into()))?;
                    let fields: Vec<u64> = l
                        .split_whitespace()
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::Gmsh(format!("bad element line: {l}")))
                        })
                        .collect::<Result<_>>()?;
                    if fields.len() < 3 {
                        return Err(Error::Gmsh(format!("bad element line: {l}")));
                    }
                    let etype = fields[1] as u32;
                    let ntags = fields[2] as usize;
                    if etype != wanted {
                        skipped += 1;
                        continue;
                    }
                    let conn = &fields[3 + ntags..];
                    if conn.len() != dim + 1 {
                        return Err(Error::Gmsh(format!(
                            "element has {} nodes, expected {}",
                            conn.len(),
                            dim + 1
                        )));
                    }
                    raw_elements.push(conn.to_vec());
                }
                expect_section_end(&mut it, "$EndElements")?;
            }
            _ if line.starts_with('$') && !line.starts_with("$End") => {
                // Unknown section: skip to its end marker.
                let end = format!("$End{}", &line[1..]);
                for l in it.by_ref() {
                    if l == end {
                        break;
                    }
                }
            }
            _ => {}
        }
    }

    if !saw_format {
        return Err(Error::Gmsh("missing $MeshFormat section".into()));
    }
    if raw_elements.is_empty() {
        return Err(Error::Gmsh(format!(
            "no admissible elements of dimension {dim} found ({skipped} other elements skipped)"
        )));
    }

    let id_map: HashMap<u64, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, &(id, _))| (id, i as u32))
        .collect();
    let vertices: Vec<[f64; 3]> = nodes.iter().map(|&(_, xyz)| xyz).collect();
    let mut elements = Vec::with_capacity(raw_elements.len());
    for conn in &raw_elements {
        let mut quad = [0u32; 4];
        for (slot, &nid) in conn.iter().enumerate() {
            quad[slot] = *id_map
                .get(&nid)
                .ok_or_else(|| Error::Gmsh(format!("element references unknown node {nid}")))?;
        }
        elements.push(quad);
    }
    if skipped > 0 {
        eprintln!("gmsh: skipped {skipped} elements of other types");
    }
    let mesh = Mesh::from_raw(dim, vertices, elements)?;
    Ok(GmshImport {
        mesh,
        skipped_elements: skipped,
    })
}

fn parse_count(line: Option<&str>, section: &str) -> Result<usize> {
    line.and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Gmsh(format!("bad count in {section}")))
}

fn expect_section_end<'a>(
    it: &mut impl Iterator<Item = &'a str>,
    end: &str,
) -> Result<()> {
    match it.next() {
        Some(l) if l == end => Ok(()),
        other => Err(Error::Gmsh(format!(
            "expected {end}, found {:?}",
            other.unwrap_or("<eof>")
        ))),
    }
}

/// Write a mesh in MSH 2.2 ASCII (used by round-trip tests and tooling).
pub fn write_gmsh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    s.push_str(&format!("{}\n", mesh.vertices.len()));
    for (i, v) in mesh.vertices.iter().enumerate() {
        s.push_str(&format!("{} {} {} {}\n", i + 1, v[0], v[1], v[2]));
    }
    s.push_str("$EndNodes\n$Elements\n");
    s.push_str(&format!("{}\n", mesh.elements.len()));
    let etype = if mesh.dim == 2 { TRIANGLE } else { TETRAHEDRON };
    for (i, e) in mesh.elements.iter().enumerate() {
        s.push_str(&format!("{} {} 2 0 0", i + 1, etype));
        for &v in &e[..mesh.dim + 1] {
            s.push_str(&format!(" {}", v + 1));
        }
        s.push('\n');
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_lines(s: &str) -> Vec<String> {
        s.lines().map(|l| l.to_string()).collect()
    }

    #[test]
    fn two_element_case_roundtrips_exactly() {
        let mesh = Mesh::uniform(2, 1).unwrap();
        let text = write_gmsh(&mesh);
        let imported = parse_gmsh(&to_lines(&text), 2).unwrap();
        assert_eq!(imported.mesh.num_elements(), 2);
        assert_eq!(imported.skipped_elements, 0);
        for (a, b) in mesh.vertices.iter().zip(&imported.mesh.vertices) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn negative_jacobian_element_is_repaired() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
                    $Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n\
                    $Elements\n1\n1 4 2 0 0 1 3 2 4\n$EndElements\n";
        let imported = parse_gmsh(&to_lines(text), 3).unwrap();
        assert!(imported.mesh.geo[0].jacobian > 0.0);
    }

    #[test]
    fn other_element_types_are_skipped_with_count() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
                    $Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n\
                    $Elements\n3\n1 15 2 0 0 1\n2 1 2 0 0 1 2\n3 4 2 0 0 1 2 3 4\n$EndElements\n";
        let imported = parse_gmsh(&to_lines(text), 3).unwrap();
        assert_eq!(imported.mesh.num_elements(), 1);
        assert_eq!(imported.skipped_elements, 2);
    }

    #[test]
    fn malformed_header_rejected() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        assert!(parse_gmsh(&to_lines(text), 3).is_err());
    }

    #[test]
    fn unknown_node_reference_rejected() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
                    $Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n\
                    $Elements\n1\n1 2 2 0 0 1 2 9\n$EndElements\n";
        assert!(parse_gmsh(&to_lines(text), 2).is_err());
    }

    #[test]
    fn zero_admissible_elements_rejected() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
                    $Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n\
                    $Elements\n1\n1 1 2 0 0 1 2\n$EndElements\n";
        assert!(parse_gmsh(&to_lines(text), 3).is_err());
    }
}

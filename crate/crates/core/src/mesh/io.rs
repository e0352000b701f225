//! Plain-text mesh format.
//!
//! ```text
//! vertices <nv>        # then nv lines: x y
//! geometries <ng>      # then ng lines: circle cx cy r
//! cells <nc>           # then nc lines: m v1 v2 ... vm   (counter-clockwise)
//! arcs <na>            # then na lines: va vb geom_id
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment. The
//! `geometries` and `arcs` sections are optional.

use std::fmt::Write as _;
use std::path::Path;

use super::{FaceKind, Mesh2D, MeshDescription};
use crate::error::{HhoError, Result};
use crate::geometry::{ArcGeometry, Point2};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    let text = std::fs::read_to_string(path)?;
    Mesh2D::build(parse_mesh(&text)?)
}

pub fn parse_mesh(text: &str) -> Result<MeshDescription> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
        .collect();

    let mut desc = MeshDescription::default();
    let mut seen = [false; 4];
    let mut pos = 0;
    while pos < lines.len() {
        let (line, toks) = &lines[pos];
        let err = |msg: String| HhoError::Parse { line: *line, msg };
        if toks.len() != 2 {
            return Err(err(format!("expected '<section> <count>', found '{}'", toks.join(" "))));
        }
        let count: usize = toks[1].parse().map_err(|_| err(format!("bad count '{}'", toks[1])))?;
        let section = match toks[0] {
            "vertices" => 0,
            "geometries" => 1,
            "cells" => 2,
            "arcs" => 3,
            other => return Err(err(format!("unknown section '{other}'"))),
        };
        if std::mem::replace(&mut seen[section], true) {
            return Err(err(format!("section '{}' appears twice", toks[0])));
        }
        if pos + 1 + count > lines.len() {
            return Err(err(format!("section '{}' is truncated", toks[0])));
        }
        for (line, toks) in &lines[pos + 1..pos + 1 + count] {
            let err = |msg: String| HhoError::Parse { line: *line, msg };
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
            let idx = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad index '{s}'")));
            match section {
                0 => {
                    if toks.len() != 2 {
                        return Err(err("vertex lines hold exactly two coordinates".into()));
                    }
                    desc.vertices.push(Point2::new(num(toks[0])?, num(toks[1])?));
                }
                1 => {
                    if toks.len() != 4 || toks[0] != "circle" {
                        return Err(err("geometry lines read 'circle cx cy r'".into()));
                    }
                    desc.geometries
                        .push(ArcGeometry::new(Point2::new(num(toks[1])?, num(toks[2])?), num(toks[3])?));
                }
                2 => {
                    let m = idx(toks[0])?;
                    if toks.len() != m + 1 {
                        return Err(err(format!("cell announces {m} vertices but lists {}", toks.len() - 1)));
                    }
                    desc.cells.push(toks[1..].iter().map(|s| idx(s)).collect::<Result<Vec<_>>>()?);
                }
                _ => {
                    if toks.len() != 3 {
                        return Err(err("arc lines read 'va vb geom_id'".into()));
                    }
                    desc.arcs.push((idx(toks[0])?, idx(toks[1])?, idx(toks[2])?));
                }
            }
        }
        pos += 1 + count;
    }
    if !seen[0] || !seen[2] {
        return Err(HhoError::Parse { line: 0, msg: "both 'vertices' and 'cells' sections are required".into() });
    }
    Ok(desc)
}

/// Serializes a mesh; coordinates are written with round-trip precision.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
    }
    if !mesh.geometries.is_empty() {
        let _ = writeln!(out, "geometries {}", mesh.geometries.len());
        for g in &mesh.geometries {
            let _ = writeln!(out, "circle {:?} {:?} {:?}", g.center.x, g.center.y, g.radius);
        }
    }
    let _ = writeln!(out, "cells {}", mesh.cells.len());
    for c in &mesh.cells {
        let ids: Vec<String> = c.vertices.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {}", ids.len(), ids.join(" "));
    }
    let arcs: Vec<_> = mesh
        .faces
        .iter()
        .filter_map(|f| match f.kind {
            FaceKind::Arc { geometry_id, .. } => Some((f.vertices[0], f.vertices[1], geometry_id)),
            FaceKind::Straight => None,
        })
        .collect();
    if !arcs.is_empty() {
        let _ = writeln!(out, "arcs {}", arcs.len());
        for (a, b, g) in arcs {
            let _ = writeln!(out, "{a} {b} {g}");
        }
    }
    out
}

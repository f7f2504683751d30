//! Plain-text mesh format.
//!
//! ```text
//! VERTICES n
//! i x y
//! ELEMENTS n
//! i v1 v2 v3 region
//! FACES n
//! i v1 v2 tag owner neighbor
//! ```
//!
//! `neighbor` is −1 on boundary faces. Reading rebuilds faces and periodic pairs from
//! the triangles and checks them against the listed faces.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, FaceTag, Mesh, Vec2};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "VERTICES {}", mesh.vertices.len())?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        writeln!(w, "{i} {:.16e} {:.16e}", v.x, v.y)?;
    }
    writeln!(w, "ELEMENTS {}", mesh.elements.len())?;
    for (i, e) in mesh.elements.iter().enumerate() {
        let [a, b, c] = e.vertices;
        writeln!(w, "{i} {a} {b} {c} {}", e.region)?;
    }
    writeln!(w, "FACES {}", mesh.faces.len())?;
    for (i, f) in mesh.faces.iter().enumerate() {
        let nb = f.neighbor.map(|n| n as i64).unwrap_or(-1);
        writeln!(w, "{i} {} {} {} {} {nb}", f.vertices[0], f.vertices[1], f.tag.as_str(), f.owner)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_tokens(&mut self) -> Result<Option<Vec<String>>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some(t.split_whitespace().map(str::to_owned).collect()));
        }
        Ok(None)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.number, message: message.into() }
    }

    fn expect_tokens(&mut self, n: usize) -> Result<Vec<String>> {
        let t = self.next_tokens()?.ok_or_else(|| self.err("unexpected end of file"))?;
        if t.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", t.len())));
        }
        Ok(t)
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let t = self.expect_tokens(2)?;
        if t[0] != name {
            return Err(self.err(format!("expected section {name}, found {}", t[0])));
        }
        self.parse(&t[1])
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn index(&self, s: &str, expected: usize) -> Result<()> {
        let i: usize = self.parse(s)?;
        if i != expected {
            return Err(self.err(format!("expected index {expected}, found {i}")));
        }
        Ok(())
    }
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh> {
    let mut lines = Lines { inner: r.lines(), number: 0 };
    let nv = lines.section("VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let t = lines.expect_tokens(3)?;
        lines.index(&t[0], i)?;
        vertices.push(Vec2::new(lines.parse(&t[1])?, lines.parse(&t[2])?));
    }
    let ne = lines.section("ELEMENTS")?;
    let mut triangles = Vec::with_capacity(ne);
    for i in 0..ne {
        let t = lines.expect_tokens(5)?;
        lines.index(&t[0], i)?;
        let v = [lines.parse(&t[1])?, lines.parse(&t[2])?, lines.parse(&t[3])?];
        if v.iter().any(|&x: &usize| x >= nv) {
            return Err(lines.err("vertex index out of range"));
        }
        triangles.push((v, lines.parse(&t[4])?));
    }
    let nf = lines.section("FACES")?;
    let mut listed = Vec::with_capacity(nf);
    for i in 0..nf {
        let t = lines.expect_tokens(6)?;
        lines.index(&t[0], i)?;
        let a: usize = lines.parse(&t[1])?;
        let b: usize = lines.parse(&t[2])?;
        let tag = FaceTag::parse(&t[3]).ok_or_else(|| lines.err(format!("unknown face tag '{}'", t[3])))?;
        listed.push(((a.min(b), a.max(b)), tag, lines.line_number()));
    }
    if lines.next_tokens()?.is_some() {
        return Err(lines.err("trailing content after FACES section"));
    }

    let robin = listed.iter().any(|(_, t, _)| *t == FaceTag::Robin);
    let boundary = if robin {
        BoundaryKind::AllRobin
    } else {
        let half_height = vertices.iter().map(|v| v.y.abs()).fold(0.0, f64::max);
        BoundaryKind::Strip { half_height }
    };
    let mesh = Mesh::from_triangles(vertices, triangles, boundary)?;
    if mesh.faces.len() != nf {
        return Err(Error::Parse {
            line: lines.number,
            message: format!("{nf} faces listed, the triangles define {}", mesh.faces.len()),
        });
    }
    let built: HashMap<(usize, usize), FaceTag> = mesh
        .faces
        .iter()
        .map(|f| {
            let [a, b] = f.vertices;
            ((a.min(b), a.max(b)), f.tag)
        })
        .collect();
    for (key, tag, line) in listed {
        match built.get(&key) {
            Some(t) if *t == tag => {}
            Some(t) => {
                return Err(Error::Parse {
                    line,
                    message: format!("face {:?} tagged {} but classifies as {}", key, tag.as_str(), t.as_str()),
                })
            }
            None => return Err(Error::Parse { line, message: format!("face {key:?} is not an edge of the triangulation") }),
        }
    }
    Ok(mesh)
}

impl<R> Lines<R> {
    fn line_number(&self) -> usize {
        self.number
    }
}

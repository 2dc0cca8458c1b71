//! Two-dimensional triangular meshes.
//!
//! A [`Mesh`] always carries linear (T3) connectivity on its vertex set. After
//! [`Mesh::promote_to_t6`] it additionally carries quadratic (T6) connectivity:
//! midside nodes are appended after the vertices, so vertex indices (and with
//! them the T3 elements used by the phase field) never change.
//!
//! T6 node order within an element is `[v0, v1, v2, m01, m12, m20]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    n_vertices: usize,
    t3: Vec<[usize; 3]>,
    t6: Vec<[usize; 6]>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a linear mesh, validating indices, areas and edge manifoldness.
    /// Clockwise triangles are reoriented.
    pub fn from_t3(
        nodes: Vec<Point>,
        mut t3: Vec<[usize; 3]>,
        boundary_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let n = nodes.len();
        if t3.is_empty() {
            return Err(Error::InvalidMesh("mesh has no elements".into()));
        }
        for (e, tri) in t3.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} references node {bad} but mesh has {n} nodes"
                )));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            let scale = edge_scale(&nodes, tri);
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!("element {e} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut boundary_sets = boundary_sets;
        for (name, ids) in boundary_sets.iter_mut() {
            if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "set {name} references node {bad} but mesh has {n} nodes"
                )));
            }
            ids.sort_unstable();
            ids.dedup();
        }
        let mesh = Mesh {
            nodes,
            n_vertices: n,
            t3,
            t6: Vec::new(),
            boundary_sets,
        };
        mesh.check_edges()?;
        Ok(mesh)
    }

    fn check_edges(&self) -> Result<()> {
        let mut count: HashMap<(usize, usize), u8> = HashMap::new();
        for tri in &self.t3 {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                let c = count.entry(key).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key.0, key.1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of vertex (T3) nodes; these occupy indices `0..n_vertices`.
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_elements(&self) -> usize {
        self.t3.len()
    }

    pub fn t3_elements(&self) -> &[[usize; 3]] {
        &self.t3
    }

    /// Quadratic connectivity; empty until the mesh is promoted.
    pub fn t6_elements(&self) -> &[[usize; 6]] {
        &self.t6
    }

    pub fn is_quadratic(&self) -> bool {
        !self.t6.is_empty()
    }

    pub fn boundary_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.boundary_sets
    }

    pub fn boundary_set(&self, name: &str) -> Option<&[usize]> {
        self.boundary_sets.get(name).map(Vec::as_slice)
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let t = self.t3[e];
        signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    pub fn centroid(&self, e: usize) -> Point {
        let t = self.t3[e];
        let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Smallest and largest edge length over all elements.
    pub fn edge_length_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for tri in &self.t3 {
            for k in 0..3 {
                let (a, b) = (self.nodes[tri[k]], self.nodes[tri[(k + 1) % 3]]);
                let l = (b[0] - a[0]).hypot(b[1] - a[1]);
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        (lo, hi)
    }

    /// Keeps the elements whose centroid satisfies `keep`, drops orphaned
    /// nodes and renumbers the survivors in their original order.
    pub fn carve(&self, keep: impl Fn(Point) -> bool) -> Result<Mesh> {
        if self.is_quadratic() {
            return Err(Error::InvalidMesh(
                "carve must be applied before promotion to T6".into(),
            ));
        }
        let kept: Vec<[usize; 3]> = (0..self.n_elements())
            .filter(|&e| keep(self.centroid(e)))
            .map(|e| self.t3[e])
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidMesh("carving removed every element".into()));
        }
        let mut used = vec![false; self.n_nodes()];
        for tri in &kept {
            for &i in tri {
                used[i] = true;
            }
        }
        let mut new_index = vec![usize::MAX; self.n_nodes()];
        let mut nodes = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                new_index[i] = nodes.len();
                nodes.push(self.nodes[i]);
            }
        }
        let t3 = kept
            .into_iter()
            .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
            .collect();
        let sets = self
            .boundary_sets
            .iter()
            .map(|(name, ids)| {
                let ids = ids
                    .iter()
                    .filter(|&&i| used[i])
                    .map(|&i| new_index[i])
                    .collect();
                (name.clone(), ids)
            })
            .collect();
        Mesh::from_t3(nodes, t3, sets)
    }

    /// Inserts one midside node per unique edge and fills the T6 connectivity.
    pub fn promote_to_t6(&self) -> Result<Mesh> {
        if self.is_quadratic() {
            return Err(Error::InvalidMesh("mesh is already quadratic".into()));
        }
        let mut nodes = self.nodes.clone();
        let mut midside: HashMap<(usize, usize), usize> = HashMap::new();
        let mut t6 = Vec::with_capacity(self.t3.len());
        for tri in &self.t3 {
            let mut elem = [tri[0], tri[1], tri[2], 0, 0, 0];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let id = *midside.entry(edge_key(a, b)).or_insert_with(|| {
                    let (pa, pb) = (self.nodes[a], self.nodes[b]);
                    nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    nodes.len() - 1
                });
                elem[3 + k] = id;
            }
            t6.push(elem);
        }
        let mut sets = self.boundary_sets.clone();
        for ids in sets.values_mut() {
            let mut member = vec![false; self.n_vertices];
            for &i in ids.iter() {
                member[i] = true;
            }
            let mut extra: Vec<usize> = midside
                .iter()
                .filter(|((a, b), _)| member[*a] && member[*b])
                .map(|(_, &m)| m)
                .collect();
            ids.append(&mut extra);
            ids.sort_unstable();
        }
        Ok(Mesh {
            nodes,
            n_vertices: self.n_vertices,
            t3: self.t3.clone(),
            t6,
            boundary_sets: sets,
        })
    }

    /// Applies `f` to every vertex position. Only valid before promotion so
    /// that midside nodes stay on straight edges.
    pub fn map_nodes(&self, f: impl Fn(Point) -> Point) -> Result<Mesh> {
        if self.is_quadratic() {
            return Err(Error::InvalidMesh(
                "node mapping must be applied before promotion to T6".into(),
            ));
        }
        let nodes = self.nodes.iter().map(|&p| f(p)).collect();
        Mesh::from_t3(nodes, self.t3.clone(), self.boundary_sets.clone())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Mesh> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_mesh(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Canonical text form. Quadratic meshes are written with six node ids
    /// per element line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", p[0], p[1]);
        }
        let _ = writeln!(s, "elements {}", self.t3.len());
        if self.is_quadratic() {
            for (e, t) in self.t6.iter().enumerate() {
                let _ = writeln!(s, "{e} {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
            }
        } else {
            for (e, t) in self.t3.iter().enumerate() {
                let _ = writeln!(s, "{e} {} {} {}", t[0], t[1], t[2]);
            }
        }
        for (name, ids) in &self.boundary_sets {
            let _ = write!(s, "set {name} {}", ids.len());
            for id in ids {
                let _ = write!(s, " {id}");
            }
            s.push('\n');
        }
        s
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn edge_scale(nodes: &[Point], tri: &[usize; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b) = (nodes[tri[k]], nodes[tri[(k + 1) % 3]]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(0.0, f64::max)
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            items.extend(line.split_whitespace().map(|t| (i + 1, t)));
        }
        Tokens { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or_else(|| self.items.last())
            .map_or(1, |t| t.0)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self
            .items
            .get(self.pos)
            .map(|t| t.1)
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next(kw)?;
        if t != kw {
            self.pos -= 1;
            return Err(self.err(format!("expected `{kw}`, found `{t}`")));
        }
        Ok(())
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse().map_err(|_| {
            self.pos -= 1;
            self.err(format!("invalid {what} `{t}`"))
        })
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let t = self.next(what)?;
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("invalid {what} `{t}`")))
            }
        }
    }
}

/// Parses the mesh text format (see [`Mesh::to_text`]).
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut tk = Tokens::new(text);
    tk.keyword("nodes")?;
    let n = tk.usize("node count")?;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let id = tk.usize("node id")?;
        if id != i {
            tk.pos -= 1;
            return Err(tk.err(format!("node ids must be consecutive from 0, found {id}")));
        }
        nodes.push([tk.f64("x coordinate")?, tk.f64("y coordinate")?]);
    }
    tk.keyword("elements")?;
    let m = tk.usize("element count")?;
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut width = None;
    for e in 0..m {
        let line = tk.line();
        let id = tk.usize("element id")?;
        if id != e {
            tk.pos -= 1;
            return Err(tk.err(format!("element ids must be consecutive from 0, found {id}")));
        }
        let mut row = Vec::with_capacity(6);
        while row.len() < 6 && tk.items.get(tk.pos).is_some_and(|t| t.0 == line) {
            let node_line = tk.line();
            let v = tk.usize("node index")?;
            if v >= n {
                return Err(Error::Parse {
                    line: node_line,
                    message: format!("node index {v} out of range ({n} nodes)"),
                });
            }
            row.push(v);
        }
        if row.len() != 3 && row.len() != 6 {
            return Err(Error::Parse {
                line,
                message: format!("element {e} has {} node ids, expected 3 or 6", row.len()),
            });
        }
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse {
                line,
                message: "mixed T3 and T6 element lines".into(),
            });
        }
        rows.push(row);
    }
    let mut sets = BTreeMap::new();
    while tk.peek().is_some() {
        tk.keyword("set")?;
        let name = tk.next("set name")?.to_string();
        let k = tk.usize("set size")?;
        let mut ids = Vec::with_capacity(k);
        for _ in 0..k {
            let line = tk.line();
            let v = tk.usize("set node id")?;
            if v >= n {
                return Err(Error::Parse {
                    line,
                    message: format!("set {name}: node index {v} out of range ({n} nodes)"),
                });
            }
            ids.push(v);
        }
        sets.insert(name, ids);
    }

    if width == Some(6) {
        let t6: Vec<[usize; 6]> = rows
            .iter()
            .map(|r| [r[0], r[1], r[2], r[3], r[4], r[5]])
            .collect();
        let n_vertices = t6
            .iter()
            .flat_map(|t| t[..3].iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let t3 = t6.iter().map(|t| [t[0], t[1], t[2]]).collect();
        let vertex_sets = sets
            .iter()
            .map(|(k, v): (&String, &Vec<usize>)| {
                (k.clone(), v.iter().copied().filter(|&i| i < n_vertices).collect())
            })
            .collect();
        let linear = Mesh::from_t3(nodes[..n_vertices].to_vec(), t3, vertex_sets)
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?;
        let promoted = linear.promote_to_t6()?;
        // Accept the file only if it matches the canonical promotion.
        for (e, t) in t6.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (nodes[t[k]], nodes[t[(k + 1) % 3]]);
                let mid = nodes[t[3 + k]];
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let dx = mid[0] - 0.5 * (a[0] + b[0]);
                let dy = mid[1] - 0.5 * (a[1] + b[1]);
                if dx.hypot(dy) > 1e-12 * len {
                    return Err(Error::InvalidMesh(format!(
                        "element {e}: midside node {} is not at its edge midpoint",
                        t[3 + k]
                    )));
                }
            }
        }
        if promoted.t6 != t6 || promoted.nodes.len() != n {
            return Err(Error::InvalidMesh(
                "T6 connectivity is not in canonical promoted order".into(),
            ));
        }
        let mut promoted = promoted;
        promoted.nodes = nodes;
        promoted.boundary_sets = sets
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_unstable();
                v.dedup();
                (k, v)
            })
            .collect();
        Ok(promoted)
    } else {
        let t3 = rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
        Mesh::from_t3(nodes, t3, sets)
    }
}

/// Structured triangulation of a tensor-product grid with coordinates `xs`
/// (columns) and `ys` (rows). Each cell is split along alternating diagonals.
/// Boundary sets `left`, `right`, `bottom` and `top` are populated.
pub fn generate_grid(xs: &[f64], ys: &[f64]) -> Result<Mesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidInput(
            "grid needs at least two coordinates per direction".into(),
        ));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "grid coordinates must be strictly increasing".into(),
        ));
    }
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in ys {
        for &x in xs {
            nodes.push([x, y]);
        }
    }
    let mut t3 = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                t3.push([p00, p10, p11]);
                t3.push([p00, p11, p01]);
            } else {
                t3.push([p00, p10, p01]);
                t3.push([p10, p11, p01]);
            }
        }
    }
    let mut sets = BTreeMap::new();
    sets.insert("left".to_string(), (0..=ny).map(|j| id(0, j)).collect());
    sets.insert("right".to_string(), (0..=ny).map(|j| id(nx, j)).collect());
    sets.insert("bottom".to_string(), (0..=nx).map(|i| id(i, 0)).collect());
    sets.insert("top".to_string(), (0..=nx).map(|i| id(i, ny)).collect());
    Mesh::from_t3(nodes, t3, sets)
}

/// Uniform structured rectangle `[0, width] x [0, height]`.
pub fn generate_rectangle(nx: usize, ny: usize, width: f64, height: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("cell counts must be at least 1".into()));
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::InvalidInput("width and height must be positive".into()));
    }
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
    generate_grid(&xs, &ys)
}

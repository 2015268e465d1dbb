//! Triangulations with tagged boundaries and boundary-component topology.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Cell;

/// Boundary label. `D` is the traction side (`sigma n = 0`), `N` the
/// displacement side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcTag {
    D,
    N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcMode {
    /// no boundary condition on the stress; same as `FullDisplacement`
    None,
    FullDisplacement,
    FullTraction,
    /// use the tags stored with the mesh
    FileTags,
}

impl BcMode {
    pub fn from_name(s: &str) -> Result<BcMode> {
        Ok(match s {
            "none" => BcMode::None,
            "displacement" | "full_displacement" => BcMode::FullDisplacement,
            "traction" | "full_traction" => BcMode::FullTraction,
            "file-tags" | "file_tags" | "mixed" => BcMode::FileTags,
            other => return Err(Error::Config(format!("unknown boundary condition mode {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            BcMode::None => "none",
            BcMode::FullDisplacement => "displacement",
            BcMode::FullTraction => "traction",
            BcMode::FileTags => "file-tags",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshKind {
    UnitTriangle,
    Crisscross(usize),
    SquareAnnulus,
    File(String),
}

impl MeshKind {
    /// `unit_triangle`, `crisscross(n)` / `crisscross:n`, `square_annulus`,
    /// anything else is read as a file path.
    pub fn parse(s: &str) -> Result<MeshKind> {
        let s = s.trim();
        if s == "unit_triangle" {
            return Ok(MeshKind::UnitTriangle);
        }
        if s == "square_annulus" {
            return Ok(MeshKind::SquareAnnulus);
        }
        if let Some(rest) = s.strip_prefix("crisscross") {
            let n = rest.trim_start_matches(['(', ':']).trim_end_matches(')');
            let n = if n.is_empty() { "1" } else { n };
            let n: usize = n
                .parse()
                .map_err(|_| Error::Config(format!("bad crisscross size in {s:?}")))?;
            return Ok(MeshKind::Crisscross(n));
        }
        Ok(MeshKind::File(s.to_string()))
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshKind::UnitTriangle => write!(f, "unit_triangle"),
            MeshKind::Crisscross(n) => write!(f, "crisscross({n})"),
            MeshKind::SquareAnnulus => write!(f, "square_annulus"),
            MeshKind::File(p) => write!(f, "{p}"),
        }
    }
}

/// A conforming triangulation. Edges are oriented from the lower to the
/// higher vertex index; local edge `i` of a cell is the one opposite its
/// vertex `i`.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    /// incident `(cell, local edge)` pairs, one or two per edge
    edge_cells: Vec<Vec<(usize, usize)>>,
    /// tags read from a file, per edge (`None` on interior edges)
    file_tags: Vec<Option<BcTag>>,
}

/// Boundary components and the index sets derived from the tags.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryTopology {
    /// number of holes
    pub holes: usize,
    /// closed boundary loops as edge lists in counterclockwise-of-domain
    /// order; loop 0 is the outer boundary
    pub components: Vec<Vec<usize>>,
    /// the oriented vertex sequence of each loop
    pub loop_vertices: Vec<Vec<usize>>,
    /// loops meeting the displacement side
    pub i_set: Vec<usize>,
    /// `i_set` without its smallest entry
    pub i_star: Vec<usize>,
    /// connected displacement-side chains, as ordered edge lists
    pub gamma_n: Vec<Vec<usize>>,
    /// connected traction-side chains; entry 0 contains the lowest-indexed
    /// traction edge
    pub gamma_d: Vec<Vec<usize>>,
    /// tag per edge, `None` on interior edges
    pub tags: Vec<Option<BcTag>>,
}

impl BoundaryTopology {
    pub fn is_traction(&self, e: usize) -> bool {
        self.tags[e] == Some(BcTag::D)
    }

    /// Loop index of a boundary edge.
    pub fn loop_of(&self, e: usize) -> Option<usize> {
        self.components.iter().position(|c| c.contains(&e))
    }
}

impl Mesh {
    /// Builds the edge structure and checks conformity and orientation.
    pub fn new(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> Result<Mesh> {
        if cells.is_empty() {
            return Err(Error::Topology("mesh has no cells".into()));
        }
        for v in &vertices {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::Topology("non-finite vertex coordinate".into()));
            }
        }
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Topology(format!("cell {k} references a missing vertex")));
            }
            if c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                return Err(Error::Topology(format!("cell {k} repeats a vertex")));
            }
            Cell::new([vertices[c[0]], vertices[c[1]], vertices[c[2]]])
                .map_err(|e| Error::Topology(format!("cell {k}: {e}")))?;
        }
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for i in 0..3 {
                let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[e].push((k, i));
                ce[i] = e;
            }
            cell_edges.push(ce);
        }
        for (e, inc) in edge_cells.iter().enumerate() {
            if inc.len() > 2 {
                return Err(Error::Topology(format!("edge {:?} shared by {} cells", edges[e], inc.len())));
            }
            if inc.len() == 2 {
                // a consistently oriented neighbour walks the edge the other way
                let (c0, i0) = inc[0];
                let (c1, i1) = inc[1];
                let d0 = cells[c0][(i0 + 1) % 3];
                let d1 = cells[c1][(i1 + 1) % 3];
                if d0 == d1 {
                    return Err(Error::Topology(format!("cells {c0} and {c1} overlap")));
                }
            }
        }
        let nedges = edges.len();
        let mesh = Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            edge_cells,
            file_tags: vec![None; nedges],
        };
        mesh.check_hanging_nodes()?;
        let used: std::collections::HashSet<usize> = mesh.cells.iter().flatten().copied().collect();
        if used.len() != mesh.vertices.len() {
            return Err(Error::Topology("mesh has unused vertices".into()));
        }
        // loops must be simple and the Euler characteristic must match
        let loops = mesh.boundary_loops()?;
        let chi = mesh.vertices.len() as i64 - mesh.edges.len() as i64 + mesh.cells.len() as i64;
        if chi != 2 - loops.len() as i64 {
            return Err(Error::Topology(format!(
                "Euler characteristic {chi} does not match {} boundary loops (disconnected mesh?)",
                loops.len()
            )));
        }
        Ok(mesh)
    }

    fn check_hanging_nodes(&self) -> Result<()> {
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            for (v, p) in self.vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let w = [p[0] - pa[0], p[1] - pa[1]];
                let t = (w[0] * d[0] + w[1] * d[1]) / len2;
                let cross = w[0] * d[1] - w[1] * d[0];
                if t > 1e-12 && t < 1.0 - 1e-12 && cross.abs() <= 1e-12 * len2 {
                    return Err(Error::Topology(format!("vertex {v} lies inside edge {e}")));
                }
            }
        }
        Ok(())
    }

    pub fn build(kind: &MeshKind) -> Result<Mesh> {
        match kind {
            MeshKind::UnitTriangle => Mesh::unit_triangle(),
            MeshKind::Crisscross(n) => Mesh::crisscross(*n),
            MeshKind::SquareAnnulus => Mesh::square_annulus(),
            MeshKind::File(p) => Mesh::from_file(p),
        }
    }

    pub fn unit_triangle() -> Result<Mesh> {
        Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]])
    }

    /// The unit square split into `n x n` squares, each cut into four
    /// triangles through its centre.
    pub fn crisscross(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::Config("crisscross needs n >= 1".into()));
        }
        let h = 1.0 / n as f64;
        let mut v = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                v.push([i as f64 * h, j as f64 * h]);
            }
        }
        let corner = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let m = v.len();
                v.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                let (a, b, c, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
                cells.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]]);
            }
        }
        Mesh::new(v, cells)
    }

    /// The region between `[0,3]^2` and `[1,2]^2`.
    pub fn square_annulus() -> Result<Mesh> {
        let v = vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [0.0, 3.0],
            [1.0, 1.0],
            [2.0, 1.0],
            [2.0, 2.0],
            [1.0, 2.0],
        ];
        let cells = vec![
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Mesh::new(v, cells)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Mesh> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read mesh {}: {e}", path.display())))?;
        Mesh::parse(&text)
    }

    /// Parses the line-based `tri-mesh v1` format. Without any `b` lines all
    /// boundary edges are tagged `N`; otherwise every boundary edge must be
    /// tagged.
    pub fn parse(text: &str) -> Result<Mesh> {
        let mut header = false;
        let mut v = Vec::new();
        let mut t = Vec::new();
        let mut b: Vec<(usize, [usize; 2], BcTag)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            if !header {
                if s.split_whitespace().collect::<Vec<_>>() != ["tri-mesh", "v1"] {
                    return Err(perr(format!("expected header \"tri-mesh v1\", found {s:?}")));
                }
                header = true;
                continue;
            }
            let tok: Vec<&str> = s.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                tok.get(k)
                    .ok_or_else(|| perr("missing field".into()))?
                    .parse::<f64>()
                    .map_err(|_| perr(format!("bad number {:?}", tok[k])))
            };
            let idx = |k: usize| -> Result<usize> {
                tok.get(k)
                    .ok_or_else(|| perr("missing field".into()))?
                    .parse::<usize>()
                    .map_err(|_| perr(format!("bad index {:?}", tok[k])))
            };
            match tok[0] {
                "v" if tok.len() == 3 => v.push([num(1)?, num(2)?]),
                "t" if tok.len() == 4 => t.push([idx(1)?, idx(2)?, idx(3)?]),
                "b" if tok.len() == 4 => {
                    let tag = match tok[3] {
                        "D" => BcTag::D,
                        "N" => BcTag::N,
                        other => return Err(perr(format!("unknown boundary tag {other:?}"))),
                    };
                    b.push((line, [idx(1)?, idx(2)?], tag));
                }
                _ => return Err(perr(format!("unrecognised line {s:?}"))),
            }
        }
        if !header {
            return Err(Error::Parse { line: 1, msg: "empty mesh file".into() });
        }
        let mut mesh = Mesh::new(v, t)?;
        let lookup: HashMap<[usize; 2], usize> =
            mesh.edges.iter().enumerate().map(|(e, &k)| (k, e)).collect();
        if b.is_empty() {
            for e in mesh.boundary_edges() {
                mesh.file_tags[e] = Some(BcTag::N);
            }
        } else {
            for (line, [i, j], tag) in b {
                let e = lookup.get(&[i.min(j), i.max(j)]).copied().filter(|&e| mesh.is_boundary(e));
                match e {
                    Some(e) => mesh.file_tags[e] = Some(tag),
                    None => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("({i}, {j}) is not a boundary edge"),
                        })
                    }
                }
            }
            if let Some(e) = mesh.boundary_edges().into_iter().find(|&e| mesh.file_tags[e].is_none()) {
                return Err(Error::Topology(format!("boundary edge {:?} has no tag", mesh.edges[e])));
            }
        }
        Ok(mesh)
    }

    /// Serialises in the `tri-mesh v1` format, including tags when present.
    pub fn to_text(&self) -> String {
        let mut s = String::from("tri-mesh v1\n");
        for v in &self.vertices {
            s += &format!("v {:?} {:?}\n", v[0], v[1]);
        }
        for c in &self.cells {
            s += &format!("t {} {} {}\n", c[0], c[1], c[2]);
        }
        for (e, t) in self.file_tags.iter().enumerate() {
            if let Some(t) = t {
                s += &format!("b {} {} {:?}\n", self.edges[e][0], self.edges[e][1], t);
            }
        }
        s
    }

    /// Replaces the stored boundary tags; `f` receives the edge index and
    /// its midpoint.
    pub fn set_tags(&mut self, f: impl Fn(usize, [f64; 2]) -> BcTag) {
        for e in self.boundary_edges() {
            let [a, b] = self.edges[e];
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            self.file_tags[e] = Some(f(e, mid));
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn edge_cells(&self, e: usize) -> &[(usize, usize)] {
        &self.edge_cells[e]
    }

    pub fn file_tags(&self) -> &[Option<BcTag>] {
        &self.file_tags
    }

    pub fn nv(&self) -> usize {
        self.vertices.len()
    }

    pub fn ne(&self) -> usize {
        self.edges.len()
    }

    pub fn nt(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, k: usize) -> Cell {
        let c = self.cells[k];
        Cell::new([self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]])
            .expect("validated at construction")
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_cells[e].len() == 1
    }

    pub fn boundary_edges(&self) -> Vec<usize> {
        (0..self.ne()).filter(|&e| self.is_boundary(e)).collect()
    }

    pub fn interior_edges(&self) -> Vec<usize> {
        (0..self.ne()).filter(|&e| !self.is_boundary(e)).collect()
    }

    /// Sign of the global edge orientation relative to the counterclockwise
    /// walk of cell `k` along local edge `i`.
    pub fn edge_sign(&self, k: usize, i: usize) -> f64 {
        let c = self.cells[k];
        if c[(i + 1) % 3] < c[(i + 2) % 3] {
            1.0
        } else {
            -1.0
        }
    }

    /// Unit normal of edge `e` in the global frame: the tangent from the low
    /// to the high vertex, turned clockwise.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let t = self.edge_tangent(e);
        [t[1], -t[0]]
    }

    pub fn edge_tangent(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let l = self.edge_length(e);
        [(pb[0] - pa[0]) / l, (pb[1] - pa[1]) / l]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        (0..self.nt()).map(|k| self.cell(k).diameter()).fold(0.0, f64::max)
    }

    /// Smallest ratio of inradius to diameter over the cells.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.nt())
            .map(|k| {
                let c = self.cell(k);
                let per: f64 = (0..3).map(|i| c.edge_length(i)).sum();
                (2.0 * c.area() / per) / c.diameter()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `|V| - |E| + |T|`
    pub fn euler_characteristic(&self) -> i64 {
        self.nv() as i64 - self.ne() as i64 + self.nt() as i64
    }

    /// Incident cells of every vertex, with the local vertex index.
    pub fn vertex_cells(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.nv()];
        for (k, c) in self.cells.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                out[v].push((k, i));
            }
        }
        out
    }

    /// Midpoint subdivision of every cell into four; tags are inherited.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.nv();
        let mut v = self.vertices.clone();
        for &[a, b] in &self.edges {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            v.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]);
        }
        let mut cells = Vec::with_capacity(4 * self.nt());
        for (k, c) in self.cells.iter().enumerate() {
            let ce = self.cell_edges[k];
            // midpoint opposite vertex i
            let m = |i: usize| nv + ce[i];
            let (a, b, cc) = (c[0], c[1], c[2]);
            let (m_bc, m_ca, m_ab) = (m(0), m(1), m(2));
            cells.extend([[a, m_ab, m_ca], [m_ab, b, m_bc], [m_ca, m_bc, cc], [m_ab, m_bc, m_ca]]);
        }
        let mut out = Mesh::new(v, cells).expect("refinement preserves conformity");
        let lookup: HashMap<[usize; 2], usize> =
            out.edges.iter().enumerate().map(|(e, &k)| (k, e)).collect();
        for (e, tag) in self.file_tags.iter().enumerate() {
            if let Some(tag) = tag {
                let [a, b] = self.edges[e];
                let mid = nv + e;
                for x in [a, b] {
                    out.file_tags[lookup[&[x.min(mid), x.max(mid)]]] = Some(*tag);
                }
            }
        }
        out
    }

    /// Closed boundary loops, each walked with the domain on the left, as
    /// `(edges, vertices)`; the loop through the leftmost boundary vertex
    /// comes first.
    fn boundary_loops(&self) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
        for e in self.boundary_edges() {
            let (k, i) = self.edge_cells[e][0];
            let c = self.cells[k];
            let (from, to) = (c[(i + 1) % 3], c[(i + 2) % 3]);
            if next.insert(from, (to, e)).is_some() {
                return Err(Error::Topology(format!("boundary pinches at vertex {from}")));
            }
        }
        let mut seen = vec![false; self.ne()];
        let mut loops = Vec::new();
        for e0 in self.boundary_edges() {
            if seen[e0] {
                continue;
            }
            let (k, i) = self.edge_cells[e0][0];
            let start = self.cells[k][(i + 1) % 3];
            let (mut edges, mut verts) = (Vec::new(), Vec::new());
            let mut cur = start;
            loop {
                let &(to, e) = next
                    .get(&cur)
                    .ok_or_else(|| Error::Topology(format!("dangling boundary chain at vertex {cur}")))?;
                if seen[e] {
                    return Err(Error::Topology("boundary chains cross".into()));
                }
                seen[e] = true;
                edges.push(e);
                verts.push(cur);
                cur = to;
                if cur == start {
                    break;
                }
            }
            loops.push((edges, verts));
        }
        let key = |vs: &Vec<usize>| {
            vs.iter()
                .map(|&v| self.vertices[v])
                .fold([f64::INFINITY, f64::INFINITY], |m, p| {
                    if p[0] < m[0] || (p[0] == m[0] && p[1] < m[1]) {
                        p
                    } else {
                        m
                    }
                })
        };
        if let Some(outer) = (0..loops.len()).min_by(|&a, &b| {
            let (ka, kb) = (key(&loops[a].1), key(&loops[b].1));
            ka[0].total_cmp(&kb[0]).then(ka[1].total_cmp(&kb[1]))
        }) {
            let o = loops.remove(outer);
            loops.sort_by_key(|l| *l.0.iter().min().unwrap());
            loops.insert(0, o);
        }
        Ok(loops)
    }

    /// Tags per edge for a boundary condition mode.
    pub fn tags_for(&self, mode: BcMode) -> Result<Vec<Option<BcTag>>> {
        let mut tags = vec![None; self.ne()];
        for e in self.boundary_edges() {
            tags[e] = Some(match mode {
                BcMode::None | BcMode::FullDisplacement => BcTag::N,
                BcMode::FullTraction => BcTag::D,
                BcMode::FileTags => self.file_tags[e]
                    .ok_or_else(|| Error::Config(format!("boundary edge {e} carries no tag")))?,
            });
        }
        Ok(tags)
    }

    pub fn boundary_topology(&self, mode: BcMode) -> Result<BoundaryTopology> {
        let tags = self.tags_for(mode)?;
        self.topology_with_tags(tags)
    }

    pub fn topology_with_tags(&self, tags: Vec<Option<BcTag>>) -> Result<BoundaryTopology> {
        for e in self.boundary_edges() {
            if tags[e].is_none() {
                return Err(Error::Topology(format!("boundary edge {e} is untagged")));
            }
        }
        let loops = self.boundary_loops()?;
        let i_set: Vec<usize> = loops
            .iter()
            .enumerate()
            .filter(|(_, l)| l.0.iter().any(|&e| tags[e] == Some(BcTag::N)))
            .map(|(m, _)| m)
            .collect();
        let i_star = i_set.iter().skip(1).copied().collect();
        let mut gamma_n = Vec::new();
        let mut gamma_d = Vec::new();
        for (edges, _) in &loops {
            let tag = |k: usize| tags[edges[k % edges.len()]];
            let n = edges.len();
            // start the walk right after a tag change, if there is one
            let start = (0..n).find(|&k| tag(k) != tag(k + n - 1));
            match start {
                None => {
                    let list = edges.clone();
                    if tag(0) == Some(BcTag::N) {
                        gamma_n.push(list);
                    } else {
                        gamma_d.push(list);
                    }
                }
                Some(s) => {
                    let mut run = vec![edges[s]];
                    for k in s + 1..s + n {
                        if tag(k) != tag(k - 1) {
                            let t = tag(k - 1);
                            let done = std::mem::take(&mut run);
                            if t == Some(BcTag::N) {
                                gamma_n.push(done);
                            } else {
                                gamma_d.push(done);
                            }
                        }
                        run.push(edges[k % n]);
                    }
                    if tag(s + n - 1) == Some(BcTag::N) {
                        gamma_n.push(run);
                    } else {
                        gamma_d.push(run);
                    }
                }
            }
        }
        gamma_d.sort_by_key(|c: &Vec<usize>| *c.iter().min().unwrap());
        gamma_n.sort_by_key(|c: &Vec<usize>| *c.iter().min().unwrap());
        Ok(BoundaryTopology {
            holes: loops.len() - 1,
            components: loops.iter().map(|l| l.0.clone()).collect(),
            loop_vertices: loops.iter().map(|l| l.1.clone()).collect(),
            i_set,
            i_star,
            gamma_n,
            gamma_d,
            tags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        let m = Mesh::unit_triangle().unwrap();
        assert_eq!((m.nv(), m.ne(), m.nt()), (3, 3, 1));
        let m = Mesh::crisscross(1).unwrap();
        assert_eq!((m.nv(), m.ne(), m.nt()), (5, 8, 4));
        let m = Mesh::square_annulus().unwrap();
        assert_eq!((m.nv(), m.ne(), m.nt()), (8, 16, 8));
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn refinement_counts_and_tags() {
        let m = Mesh::unit_triangle().unwrap().refine_uniform();
        assert_eq!((m.nv(), m.nt()), (6, 4));
        let mut a = Mesh::square_annulus().unwrap();
        a.set_tags(|_, p| if p[0] < 0.5 { BcTag::D } else { BcTag::N });
        let r = a.refine_uniform();
        assert_eq!(r.euler_characteristic(), 0);
        let d = r.file_tags().iter().filter(|t| **t == Some(BcTag::D)).count();
        assert_eq!(d, 2);
    }

    #[test]
    fn index_sets() {
        let m = Mesh::unit_triangle().unwrap();
        let t = m.boundary_topology(BcMode::FullDisplacement).unwrap();
        assert_eq!((t.i_set.clone(), t.i_star.len()), (vec![0], 0));
        let t = m.boundary_topology(BcMode::FullTraction).unwrap();
        assert!(t.i_set.is_empty() && t.i_star.is_empty());
        let a = Mesh::square_annulus().unwrap();
        let t = a.boundary_topology(BcMode::FullDisplacement).unwrap();
        assert_eq!((t.holes, t.i_set.clone(), t.i_star.clone()), (1, vec![0, 1], vec![1]));
        assert_eq!(t.components[0].len(), 4);
        assert!(t.loop_vertices[0].contains(&0));
    }

    #[test]
    fn mixed_chains() {
        let mut m = Mesh::crisscross(2).unwrap();
        // traction on the bottom and on the top, displacement on the sides
        m.set_tags(|_, p| if p[1] < 1e-9 || p[1] > 1.0 - 1e-9 { BcTag::D } else { BcTag::N });
        let t = m.boundary_topology(BcMode::FileTags).unwrap();
        assert_eq!(t.gamma_d.len(), 2);
        assert_eq!(t.gamma_n.len(), 2);
        assert!(t.gamma_d[0].iter().all(|&e| t.is_traction(e)));
        assert_eq!(t.gamma_d.iter().map(|c| c.len()).sum::<usize>(), 4);
    }

    #[test]
    fn file_round_trip() {
        let mut m = Mesh::crisscross(1).unwrap();
        m.set_tags(|e, _| if e % 2 == 0 { BcTag::D } else { BcTag::N });
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.file_tags(), m.file_tags());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = Mesh::parse("tri-mesh v1\nv 0 0\nv 1 x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = Mesh::parse("tri-mesh v1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 D\n").unwrap_err();
        assert!(matches!(e, Error::Topology(_)));
    }

    #[test]
    fn hanging_node_rejected() {
        let v = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [1.0, 0.0], [1.0, -1.0]];
        let e = Mesh::new(v, vec![[0, 1, 2], [0, 4, 3]]).unwrap_err();
        assert!(matches!(e, Error::Topology(_)));
    }
}

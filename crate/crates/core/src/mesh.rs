//! Uniform triangulation of the unit square.
//!
//! Nodes are numbered row-major (y outer, x inner): node `j * (n + 1) + i`
//! sits at `(i / n, j / n)`. Every grid square is split along the same
//! diagonal, from its lower-left to its upper-right corner, into two
//! counter-clockwise triangles.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

const FIELD_MAGIC: &[u8; 4] = b"EPF1";
const FIELD_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
}

impl Mesh {
    /// Builds the `n x n` uniform mesh (grid step `1/n`).
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("mesh needs n >= 2, got {n}")));
        }
        let side = n + 1;
        let mut nodes = Vec::with_capacity(side * side);
        let mut boundary = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let mut interior_index = vec![None; side * side];
        let mut interior_nodes = Vec::with_capacity((n - 1) * (n - 1));
        for (id, &b) in boundary.iter().enumerate() {
            if !b {
                interior_index[id] = Some(interior_nodes.len());
                interior_nodes.push(id);
            }
        }

        Ok(Self {
            n,
            nodes,
            triangles,
            boundary,
            interior_index,
            interior_nodes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Interior dof id of a node, `None` on the boundary.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    /// Node ids of the interior dofs, in dof order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Vertex coordinates of triangle `t`.
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.triangle_coords(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_coords(t);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Resolves a closed axis-aligned rectangle against this mesh.
    pub fn mask(&self, rect: Rect) -> Result<SubdomainMask> {
        SubdomainMask::new(self, rect)
    }

    /// Scatters interior dof values into a full nodal field (zero on the boundary).
    pub fn extend_interior(&self, interior: &[f64]) -> ScalarField {
        let mut values = vec![0.0; self.node_count()];
        for (&node, &v) in self.interior_nodes.iter().zip(interior) {
            values[node] = v;
        }
        ScalarField { n: self.n, values }
    }

    /// Gathers the interior dof values of a nodal vector.
    pub fn interior_values(&self, values: &[f64]) -> Vec<f64> {
        self.interior_nodes
            .iter()
            .map(|&node| values[node])
            .collect()
    }

    /// Samples `f` at every node.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField {
            n: self.n,
            values: self.nodes.iter().map(|p| f(p[0], p[1])).collect(),
        }
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// The whole domain `[0,1]^2`.
    pub const fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    /// Local subdomain of interest, `[1/4,3/4] x [11/16,15/16]`.
    pub const fn d1() -> Self {
        Self::new(0.25, 0.75, 11.0 / 16.0, 15.0 / 16.0)
    }

    /// Source support, `[1/4,3/4] x [1/16,5/16]`.
    pub const fn d2() -> Self {
        Self::new(0.25, 0.75, 1.0 / 16.0, 5.0 / 16.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn contains_node(&self, p: [f64; 2]) -> bool {
        const SLACK: f64 = 1e-12;
        p[0] >= self.x0 - SLACK
            && p[0] <= self.x1 + SLACK
            && p[1] >= self.y0 - SLACK
            && p[1] <= self.y1 + SLACK
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn within(&self, outer: &Rect) -> bool {
        self.x0 >= outer.x0 && self.x1 <= outer.x1 && self.y0 >= outer.y0 && self.y1 <= outer.y1
    }
}

/// The nodes (and fully contained triangles) of a rectangle on a given mesh.
#[derive(Debug, Clone)]
pub struct SubdomainMask {
    rect: Rect,
    nodes: Vec<usize>,
    local: Vec<Option<usize>>,
    triangles: Vec<usize>,
}

impl SubdomainMask {
    pub fn new(mesh: &Mesh, rect: Rect) -> Result<Self> {
        if !rect.within(&Rect::unit()) {
            return Err(Error::invalid(format!(
                "mask {rect:?} leaves the unit square"
            )));
        }
        let mut local = vec![None; mesh.node_count()];
        let mut nodes = Vec::new();
        for (id, &p) in mesh.nodes().iter().enumerate() {
            if rect.contains_node(p) {
                local[id] = Some(nodes.len());
                nodes.push(id);
            }
        }
        if nodes.is_empty() {
            return Err(Error::EmptyMask);
        }
        let triangles = mesh
            .triangles()
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().all(|&v| local[v].is_some()))
            .map(|(t, _)| t)
            .collect();
        Ok(Self {
            rect,
            nodes,
            local,
            triangles,
        })
    }

    pub fn full(mesh: &Mesh) -> Self {
        Self::new(mesh, Rect::unit()).expect("unit square is never empty")
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of `node` inside the mask, if it belongs to it.
    pub fn local_index(&self, node: usize) -> Option<usize> {
        self.local[node]
    }

    /// Triangles whose three vertices all lie in the mask.
    pub fn triangles(&self) -> &[usize] {
        &self.triangles
    }

    pub fn is_full(&self) -> bool {
        self.nodes.len() == self.local.len()
    }

    /// Restricts a full nodal vector to the mask nodes.
    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| values[i]).collect()
    }
}

/// Nodal values of a P1 function over all mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub n: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            n: mesh.n(),
            values: vec![0.0; mesh.node_count()],
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_header(w, FIELD_MAGIC, FIELD_VERSION)?;
        io::write_u32(w, self.n as u32)?;
        io::write_f64s(w, &self.values)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        io::read_header(r, FIELD_MAGIC, FIELD_VERSION)?;
        let n = io::read_u32(r)? as usize;
        if n < 2 {
            return Err(Error::Format(format!("field header has n = {n}")));
        }
        let values = io::read_f64s(r, (n + 1) * (n + 1))?;
        io::expect_eof(r)?;
        Ok(Self { n, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

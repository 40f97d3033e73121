//! Conforming triangular meshes of rectangles and disks.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A boundary edge, oriented counterclockwise with respect to the triangle
/// that owns it, so the outward normal is the edge vector rotated clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub triangle: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    areas: Vec<f64>,
    on_boundary: Vec<bool>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Clockwise triangles are flipped;
    /// degenerate triangles and edges shared by more than two triangles are
    /// rejected.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::invalid("non-finite vertex coordinate"));
        }
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::invalid(format!("triangle {t} references a missing vertex")));
            }
            let mut a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a < 0.0 {
                tri.swap(1, 2);
                a = -a;
            }
            if a <= 0.0 {
                return Err(Error::invalid(format!("triangle {t} is degenerate")));
            }
            areas.push(a);
        }

        // (min, max, triangle, directed edge); sorting keeps the result
        // independent of any hashing order
        let mut edges: Vec<(usize, usize, usize, [usize; 2])> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                edges.push((a.min(b), a.max(b), t, [a, b]));
            }
        }
        edges.sort_unstable();

        let mut boundary_edges = Vec::new();
        let mut on_boundary = vec![false; nv];
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            match j - i {
                1 => {
                    let (_, _, t, dir) = edges[i];
                    boundary_edges.push(BoundaryEdge { vertices: dir, triangle: t });
                    on_boundary[dir[0]] = true;
                    on_boundary[dir[1]] = true;
                }
                2 => {}
                n => {
                    return Err(Error::invalid(format!(
                        "edge ({}, {}) shared by {n} triangles",
                        edges[i].0, edges[i].1
                    )))
                }
            }
            i = j;
        }

        Ok(Mesh {
            vertices,
            triangles,
            boundary_edges,
            areas,
            on_boundary,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Number of triangles adjacent to every undirected edge.
    pub fn edge_multiplicities(&self) -> Vec<usize> {
        let mut keys: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        keys.sort_unstable();
        let mut counts = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let mut j = i + 1;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            counts.push(j - i);
            i = j;
        }
        counts
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }
}

/// Structured triangulation of `[xmin, xmax] x [ymin, ymax]`: every grid cell
/// is cut along its rising diagonal, with enough cells that each diagonal is
/// at most `h_max`.
pub fn rect_mesh(xmin: f64, xmax: f64, ymin: f64, ymax: f64, h_max: f64) -> Result<Mesh> {
    let finite = [xmin, xmax, ymin, ymax, h_max].iter().all(|v| v.is_finite());
    if !finite || xmax <= xmin || ymax <= ymin || h_max <= 0.0 {
        return Err(Error::invalid(format!(
            "rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}] with h_max {h_max}"
        )));
    }
    let nx = ((xmax - xmin) * SQRT_2 / h_max).ceil().max(1.0) as usize;
    let ny = ((ymax - ymin) * SQRT_2 / h_max).ceil().max(1.0) as usize;
    rect_grid(xmin, xmax, ymin, ymax, nx, ny)
}

/// Same as [`rect_mesh`] with an explicit cell count per direction.
pub fn rect_grid(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("rectangle grid needs at least one cell per direction"));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { ymax } else { ymin + (ymax - ymin) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { xmax } else { xmin + (xmax - xmin) * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Polar triangulation of the disk of the given radius centred at the origin.
///
/// Rings are spaced at most `h_max / sqrt(2)` apart. Each ring carries enough
/// points that its angular spacing, measured as a chord on the next ring out,
/// stays below `h_max / sqrt(2)`; neighbouring rings are stitched by merging
/// their points in angular order.
pub fn disk_mesh(radius: f64, h_max: f64) -> Result<Mesh> {
    if !radius.is_finite() || !h_max.is_finite() || radius <= 0.0 || h_max <= 0.0 {
        return Err(Error::invalid(format!("disk radius {radius} with h_max {h_max}")));
    }
    if h_max >= radius {
        return Err(Error::invalid(format!(
            "h_max {h_max} is too coarse for a disk of radius {radius}"
        )));
    }
    let spacing = h_max / SQRT_2;
    let n_rings = (radius / spacing).ceil() as usize;
    let dr = radius / n_rings as f64;

    let mut counts: Vec<usize> = Vec::with_capacity(n_rings);
    for k in 1..=n_rings {
        let r_next = ((k + 1) as f64 * dr).min(radius);
        let s = spacing / (2.0 * r_next);
        let needed = if s >= 1.0 { 3 } else { (PI / s.asin()).ceil() as usize };
        let prev = counts.last().copied().unwrap_or(6);
        counts.push(needed.max(prev).max(6));
    }

    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(n_rings);
    for (k, &n) in counts.iter().enumerate() {
        let r = if k + 1 == n_rings { radius } else { (k + 1) as f64 * dr };
        ring_start.push(vertices.len());
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    let n0 = counts[0];
    for j in 0..n0 {
        triangles.push([0, ring_start[0] + j, ring_start[0] + (j + 1) % n0]);
    }
    for k in 1..n_rings {
        let (ni, no) = (counts[k - 1], counts[k]);
        let (si, so) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < ni || j < no {
            // fractions of a full turn avoid comparing wrapped angles
            let next_inner = (i + 1) as f64 / ni as f64;
            let next_outer = (j + 1) as f64 / no as f64;
            if j == no || (i < ni && next_inner <= next_outer) {
                triangles.push([si + i, si + (i + 1) % ni, so + j % no]);
                i += 1;
            } else {
                triangles.push([si + i % ni, so + j, so + (j + 1) % no]);
                j += 1;
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// Bucket grid for locating the triangle that contains a point.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let side = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = PointLocator {
            mesh,
            lo,
            cell,
            dims,
            buckets: vec![Vec::new(); side * side],
        };
        for t in 0..mesh.n_triangles() {
            let c = mesh.corners(t);
            let xs = [c[0][0], c[1][0], c[2][0]];
            let ys = [c[0][1], c[1][1], c[2][1]];
            let (i0, j0) = loc.bucket_of([xs.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::INFINITY, f64::min)]);
            let (i1, j1) = loc.bucket_of([xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * dims[0] + i].push(t);
                }
            }
        }
        loc
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let f = |d: usize| {
            let k = ((p[d] - self.lo[d]) / self.cell[d]).floor();
            (k.max(0.0) as usize).min(self.dims[d] - 1)
        };
        (f(0), f(1))
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        barycentric(self.mesh.corners(t), p)
    }

    /// Finds a triangle containing `p`, allowing points up to `tol` outside
    /// the mesh. Returns the triangle and clamped barycentric coordinates.
    pub fn locate(&self, p: Point, tol: f64) -> Option<(usize, [f64; 3])> {
        let (bi, bj) = self.bucket_of(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        let consider = |t: usize, best: &mut Option<(usize, [f64; 3], f64)>| {
            let lam = self.barycentric(t, p);
            let d = outside_distance(self.mesh.corners(t), &lam);
            if best.as_ref().map_or(true, |b| d < b.2) {
                *best = Some((t, lam, d));
            }
        };
        for j in bj.saturating_sub(1)..=(bj + 1).min(self.dims[1] - 1) {
            for i in bi.saturating_sub(1)..=(bi + 1).min(self.dims[0] - 1) {
                for &t in &self.buckets[j * self.dims[0] + i] {
                    consider(t, &mut best);
                    if best.as_ref().is_some_and(|b| b.2 == 0.0) {
                        let (t, lam, _) = best.unwrap();
                        return Some((t, lam));
                    }
                }
            }
        }
        if best.as_ref().map_or(true, |b| b.2 > tol) {
            for t in 0..self.mesh.n_triangles() {
                consider(t, &mut best);
            }
        }
        match best {
            Some((t, lam, d)) if d <= tol => Some((t, clamp_barycentric(lam))),
            _ => None,
        }
    }
}

pub fn barycentric(c: [Point; 3], p: Point) -> [f64; 3] {
    let area = signed_area(c[0], c[1], c[2]);
    let l1 = signed_area(p, c[1], c[2]) / area;
    let l2 = signed_area(c[0], p, c[2]) / area;
    [l1, l2, 1.0 - l1 - l2]
}

fn outside_distance(c: [Point; 3], lam: &[f64; 3]) -> f64 {
    let area = signed_area(c[0], c[1], c[2]);
    let mut d: f64 = 0.0;
    for k in 0..3 {
        if lam[k] < 0.0 {
            // distance to the line opposite vertex k
            let e = dist(c[(k + 1) % 3], c[(k + 2) % 3]);
            d = d.max(-lam[k] * 2.0 * area / e);
        }
    }
    d
}

fn clamp_barycentric(lam: [f64; 3]) -> [f64; 3] {
    let c = lam.map(|l| l.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|l| l / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_conforming(m: &Mesh) {
        for (e, &n) in m.edge_multiplicities().iter().enumerate() {
            assert!(n == 1 || n == 2, "edge {e} has {n} triangles");
        }
        let nb = m.edge_multiplicities().iter().filter(|&&n| n == 1).count();
        assert_eq!(nb, m.boundary_edges().len());
        for t in 0..m.n_triangles() {
            let c = m.corners(t);
            assert!(signed_area(c[0], c[1], c[2]) > 0.0);
        }
    }

    #[test]
    fn two_by_two_unit_square() {
        let m = rect_mesh(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.boundary_edges().len(), 8);
        assert_eq!(m.boundary_flags().iter().filter(|&&b| b).count(), 8);
        assert_conforming(&m);
    }

    #[test]
    fn unit_square_area_is_one() {
        for h in [0.9, 0.3, 0.07, 0.031] {
            let m = rect_mesh(0.0, 1.0, 0.0, 1.0, h).unwrap();
            assert!((m.total_area() - 1.0).abs() <= 1e-12);
            assert_conforming(&m);
        }
    }

    #[test]
    fn allen_cahn_domain_diameter_bound() {
        let m = rect_mesh(-2.0, 2.0, -1.0, 1.0, 0.1).unwrap();
        assert!(m.h_max() <= 0.1 + 1e-15);
        assert!((m.total_area() - 8.0).abs() <= 8.0 * 1e-12);
        assert_conforming(&m);
    }

    #[test]
    fn rect_rejects_bad_bounds() {
        assert!(rect_mesh(1.0, 0.0, 0.0, 1.0, 0.1).is_err());
        assert!(rect_mesh(0.0, 1.0, 0.0, f64::NAN, 0.1).is_err());
        assert!(rect_mesh(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = disk_mesh(PI, 0.1).unwrap();
        for e in m.boundary_edges() {
            for &v in &e.vertices {
                let p = m.vertices()[v];
                assert!((p[0].hypot(p[1]) - PI).abs() <= 1e-12);
            }
        }
        assert!(m.h_max() <= 0.1 + 1e-12);
        assert_conforming(&m);
    }

    #[test]
    fn disk_area_is_inscribed_polygon() {
        for h in [0.9, 0.5, 0.25] {
            let m = disk_mesh(1.0, h).unwrap();
            let n = m.boundary_edges().len() as f64;
            let polygon = n * (2.0 * PI / n).sin() / 2.0;
            assert!((m.total_area() - polygon).abs() <= 1e-12 * polygon);
            assert!(m.h_max() <= h + 1e-12);
            assert_conforming(&m);
        }
    }

    #[test]
    fn disk_rejects_coarse_h() {
        assert!(disk_mesh(1.0, 1.0).is_err());
        assert!(disk_mesh(1.0, 2.0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(disk_mesh(PI, 0.3).unwrap(), disk_mesh(PI, 0.3).unwrap());
        assert_eq!(
            rect_mesh(-1.25, 1.25, -1.25, 1.25, 0.15).unwrap(),
            rect_mesh(-1.25, 1.25, -1.25, 1.25, 0.15).unwrap()
        );
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
        assert_eq!(m.triangles()[0], [0, 1, 2]);
        assert!(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn locator_finds_points() {
        let m = disk_mesh(1.0, 0.3).unwrap();
        let loc = PointLocator::new(&m);
        for &p in &[[0.0, 0.0], [0.3, -0.2], [0.7, 0.7]] {
            let (t, lam) = loc.locate(p, 1e-10).unwrap();
            let c = m.corners(t);
            let q = [
                lam[0] * c[0][0] + lam[1] * c[1][0] + lam[2] * c[2][0],
                lam[0] * c[0][1] + lam[1] * c[1][1] + lam[2] * c[2][1],
            ];
            assert!(dist(p, q) < 1e-12);
        }
        assert!(loc.locate([2.0, 0.0], 1e-10).is_none());
    }
}

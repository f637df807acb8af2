//! Admissible two-point flux meshes in one and two dimensions.
//!
//! A mesh is a set of control volumes with centers, and a set of faces. Each
//! interior face joins two cells whose center-to-center segment is orthogonal
//! to the face; each boundary face belongs to one cell and carries a region
//! id that the problem definition maps to boundary conditions.
//!
//! The 2D builder produces the Voronoi boxes of a rectangular node grid whose
//! rectangles are split into right triangles. Nodes on the domain boundary are
//! cell centers lying on their own boundary faces (`distance == 0`); such faces
//! have no finite transmissibility and Dirichlet data on them is imposed on
//! the cell value directly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DdfvError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub measure: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceCells {
    Interior { k: usize, l: usize },
    Boundary { cell: usize, region: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub cells: FaceCells,
    /// `m_sigma`
    pub measure: f64,
    /// `d_sigma`: center-to-center distance, or center-to-face distance on the boundary.
    pub distance: f64,
    /// `tau_sigma = m_sigma / d_sigma`; infinite for boundary faces through their cell center.
    pub transmissibility: f64,
    /// A point of the face (its midpoint); for boundary faces this is `x_sigma`.
    pub point: Point,
    /// Unit normal, oriented from `k` to `l` (outward for boundary faces).
    pub normal: Point,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        matches!(self.cells, FaceCells::Interior { .. })
    }

    /// Boundary face passing through the center of its cell.
    pub fn through_center(&self) -> bool {
        matches!(self.cells, FaceCells::Boundary { .. }) && self.distance == 0.0
    }
}

/// Axis-aligned bounding box of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub min: Point,
    pub max: Point,
}

impl Domain {
    pub fn measure(&self, dimension: usize) -> f64 {
        (0..dimension).map(|i| self.max[i] - self.min[i]).product()
    }

    pub fn diameter(&self, dimension: usize) -> f64 {
        (0..dimension).map(|i| (self.max[i] - self.min[i]).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleMesh {
    dimension: usize,
    cells: Vec<Cell>,
    faces: Vec<Face>,
    cell_faces: Vec<Vec<usize>>,
    regions: Vec<String>,
    domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveCellMeasure { cell: usize, measure: f64 },
    NonPositiveFaceMeasure { face: usize, measure: f64 },
    NonPositiveTransmissibility { face: usize, value: f64 },
    MeasureMismatch { total: f64, expected: f64 },
    NotOrthogonal { face: usize, defect: f64 },
    OpenCellBoundary { cell: usize, defect: f64 },
    WrongFaceCount { cell: usize, count: usize },
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

impl AdmissibleMesh {
    /// Assembles a mesh from raw parts without checking admissibility.
    pub fn from_parts(
        dimension: usize,
        cells: Vec<Cell>,
        faces: Vec<Face>,
        regions: Vec<String>,
        domain: Domain,
    ) -> Self {
        let mut cell_faces = vec![Vec::new(); cells.len()];
        for (i, f) in faces.iter().enumerate() {
            match f.cells {
                FaceCells::Interior { k, l } => {
                    cell_faces[k].push(i);
                    cell_faces[l].push(i);
                }
                FaceCells::Boundary { cell, .. } => cell_faces[cell].push(i),
            }
        }
        AdmissibleMesh { dimension, cells, faces, cell_faces, regions, domain }
    }

    /// Uniform cell-centered subdivision of `(0, length)`; the boundary faces at
    /// `x = 0` and `x = length` get the regions `left_region` and `right_region`.
    pub fn uniform_1d(length: f64, n_cells: usize, left_region: &str, right_region: &str) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(DdfvError::invalid(format!("interval length must be positive, got {length}")));
        }
        if n_cells < 2 {
            return Err(DdfvError::invalid(format!("need at least 2 cells, got {n_cells}")));
        }
        let h = length / n_cells as f64;
        let cells = (0..n_cells)
            .map(|i| Cell { center: [(i as f64 + 0.5) * h, 0.0], measure: h, diameter: h })
            .collect();
        let mut regions = vec![left_region.to_string()];
        if right_region != left_region {
            regions.push(right_region.to_string());
        }
        let right_id = regions.len() - 1;
        let mut faces = Vec::with_capacity(n_cells + 1);
        faces.push(Face {
            cells: FaceCells::Boundary { cell: 0, region: 0 },
            measure: 1.0,
            distance: 0.5 * h,
            transmissibility: 2.0 / h,
            point: [0.0, 0.0],
            normal: [-1.0, 0.0],
        });
        for i in 0..n_cells - 1 {
            faces.push(Face {
                cells: FaceCells::Interior { k: i, l: i + 1 },
                measure: 1.0,
                distance: h,
                transmissibility: 1.0 / h,
                point: [(i + 1) as f64 * h, 0.0],
                normal: [1.0, 0.0],
            });
        }
        faces.push(Face {
            cells: FaceCells::Boundary { cell: n_cells - 1, region: right_id },
            measure: 1.0,
            distance: 0.5 * h,
            transmissibility: 2.0 / h,
            point: [length, 0.0],
            normal: [1.0, 0.0],
        });
        let domain = Domain { min: [0.0, 0.0], max: [length, 0.0] };
        Ok(Self::from_parts(1, cells, faces, regions, domain))
    }

    /// Voronoi boxes of the `(nx + 1) x (ny + 1)` node grid of `(0, lx) x (0, ly)`,
    /// each grid rectangle split into two right triangles along its rising
    /// diagonal. Transmissibilities are the half-cotangent weights obtained
    /// from the triangle circumcenters.
    ///
    /// `label` maps the midpoint of every boundary half-edge and its outward
    /// normal to a region name.
    pub fn triangulated_rect_2d(
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        label: &dyn Fn(Point, Point) -> String,
    ) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(DdfvError::invalid("rectangle sides must be positive"));
        }
        if nx < 2 || ny < 2 {
            return Err(DdfvError::invalid(format!("need nx, ny >= 2, got {nx} x {ny}")));
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let coords: Vec<Point> = (0..=ny)
            .flat_map(|j| (0..=nx).map(move |i| [lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]))
            .collect();

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        // accumulate, per undirected edge, the circumcenter-to-edge distances
        let scale = lx.max(ly);
        let mut edges: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        let mut boundary_count: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
        for tri in &triangles {
            let cc = circumcenter(coords[tri[0]], coords[tri[1]], coords[tri[2]]);
            for e in 0..3 {
                let (p, q, r) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
                let mid = [(coords[p][0] + coords[q][0]) * 0.5, (coords[p][1] + coords[q][1]) * 0.5];
                let t = sub(coords[q], coords[p]);
                let mut n = [-t[1], t[0]];
                let len = norm(n);
                n = [n[0] / len, n[1] / len];
                // orient n toward the opposite vertex
                if dot(n, sub(coords[r], mid)) < 0.0 {
                    n = [-n[0], -n[1]];
                }
                let mut contribution = dot(n, sub(cc, mid));
                if contribution.abs() <= 1e-12 * scale {
                    contribution = 0.0;
                }
                if contribution < 0.0 {
                    return Err(DdfvError::Admissibility(format!(
                        "negative circumcenter contribution {contribution:e} on edge ({p}, {q})"
                    )));
                }
                let key = (p.min(q), p.max(q));
                *edges.entry(key).or_insert(0.0) += contribution;
                *boundary_count.entry(key).or_insert(0) += 1;
            }
        }

        let mut faces = Vec::new();
        let mut regions: Vec<String> = Vec::new();
        let mut half_diamonds = vec![0.0; coords.len()];
        for (&(p, q), &m_sigma) in &edges {
            let d = norm(sub(coords[q], coords[p]));
            if m_sigma > 0.0 {
                let t = sub(coords[q], coords[p]);
                faces.push(Face {
                    cells: FaceCells::Interior { k: p, l: q },
                    measure: m_sigma,
                    distance: d,
                    transmissibility: m_sigma / d,
                    point: [(coords[p][0] + coords[q][0]) * 0.5, (coords[p][1] + coords[q][1]) * 0.5],
                    normal: [t[0] / d, t[1] / d],
                });
                // each endpoint owns the triangle (apex x_K, face) of area m_sigma * d / 4
                half_diamonds[p] += 0.25 * m_sigma * d;
                half_diamonds[q] += 0.25 * m_sigma * d;
            }
            if boundary_count[&(p, q)] == 1 {
                // boundary edge: one half-face per endpoint
                let t = sub(coords[q], coords[p]);
                let mut outward = [t[1] / d, -t[0] / d];
                let centre = [lx * 0.5, ly * 0.5];
                if dot(outward, sub(coords[p], centre)) < 0.0 {
                    outward = [-outward[0], -outward[1]];
                }
                for (owner, other) in [(p, q), (q, p)] {
                    let a = coords[owner];
                    let b = coords[other];
                    let quarter = [0.75 * a[0] + 0.25 * b[0], 0.75 * a[1] + 0.25 * b[1]];
                    let name = label(quarter, outward);
                    let region = match regions.iter().position(|r| *r == name) {
                        Some(id) => id,
                        None => {
                            regions.push(name);
                            regions.len() - 1
                        }
                    };
                    faces.push(Face {
                        cells: FaceCells::Boundary { cell: owner, region },
                        measure: 0.5 * d,
                        distance: 0.0,
                        transmissibility: f64::INFINITY,
                        point: quarter,
                        normal: outward,
                    });
                }
            }
        }

        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let cells = coords
            .iter()
            .zip(&half_diamonds)
            .map(|(&center, &measure)| {
                let w = hx.min(center[0] + 0.5 * hx).min(lx - center[0] + 0.5 * hx);
                let h = hy.min(center[1] + 0.5 * hy).min(ly - center[1] + 0.5 * hy);
                Cell { center, measure, diameter: (w * w + h * h).sqrt() }
            })
            .collect();
        let domain = Domain { min: [0.0, 0.0], max: [lx, ly] };
        Ok(Self::from_parts(2, cells, faces, regions, domain))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Indices of the faces of cell `k`.
    pub fn cell_faces(&self, k: usize) -> &[usize] {
        &self.cell_faces[k]
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn region_id(&self, name: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == name)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn domain_measure(&self) -> f64 {
        self.domain.measure(self.dimension)
    }

    /// `h_T`: the largest cell diameter.
    pub fn size(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    /// `zeta_T`: the smallest ratio `dist(x_K, sigma) / d_sigma`, over faces
    /// with positive distance.
    pub fn regularity(&self) -> f64 {
        let mut zeta = f64::INFINITY;
        for f in &self.faces {
            if f.distance <= 0.0 {
                continue;
            }
            let owners: Vec<usize> = match f.cells {
                FaceCells::Interior { k, l } => vec![k, l],
                FaceCells::Boundary { cell, .. } => vec![cell],
            };
            for k in owners {
                let gap = dot(sub(f.point, self.cells[k].center), f.normal).abs();
                zeta = zeta.min(gap / f.distance);
            }
        }
        zeta
    }

    /// Extent `(min, max)` of the boundary faces carrying `region`, along each axis.
    pub fn region_extent(&self, region: usize) -> Option<(Point, Point)> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for f in &self.faces {
            if let FaceCells::Boundary { region: r, .. } = f.cells {
                if r == region {
                    any = true;
                    // a face extends m_sigma / 2 on both sides of its midpoint, along the tangent
                    let t = [-f.normal[1] * 0.5 * f.measure, f.normal[0] * 0.5 * f.measure];
                    for s in [-1.0, 1.0] {
                        let p = if self.dimension == 1 { f.point } else { [f.point[0] + s * t[0], f.point[1] + s * t[1]] };
                        for i in 0..2 {
                            lo[i] = lo[i].min(p[i]);
                            hi[i] = hi[i].max(p[i]);
                        }
                    }
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Checks the admissibility conditions; an empty list means the mesh is admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.measure > 0.0) {
                out.push(Violation::NonPositiveCellMeasure { cell: i, measure: c.measure });
            }
        }
        let total: f64 = self.cells.iter().map(|c| c.measure).sum();
        let expected = self.domain_measure();
        if (total - expected).abs() > 1e-12 * expected {
            out.push(Violation::MeasureMismatch { total, expected });
        }
        for (i, f) in self.faces.iter().enumerate() {
            if !(f.measure > 0.0) {
                out.push(Violation::NonPositiveFaceMeasure { face: i, measure: f.measure });
            }
            if !(f.transmissibility > 0.0) {
                out.push(Violation::NonPositiveTransmissibility { face: i, value: f.transmissibility });
            }
            if f.through_center() {
                continue;
            }
            let (from, to) = match f.cells {
                FaceCells::Interior { k, l } => (self.cells[k].center, self.cells[l].center),
                FaceCells::Boundary { cell, .. } => (self.cells[cell].center, f.point),
            };
            let v = sub(to, from);
            let len = norm(v);
            if len > 0.0 {
                // component of x_L - x_K tangential to the face
                let defect = (v[0] * f.normal[1] - v[1] * f.normal[0]).abs() / len;
                if defect > 1e-12 {
                    out.push(Violation::NotOrthogonal { face: i, defect });
                }
            }
        }
        for k in 0..self.cells.len() {
            if self.dimension == 1 && self.cell_faces[k].len() != 2 {
                out.push(Violation::WrongFaceCount { cell: k, count: self.cell_faces[k].len() });
            }
            // a closed cell boundary has zero integrated normal
            let mut sum = [0.0; 2];
            let mut scale: f64 = 0.0;
            for &fi in &self.cell_faces[k] {
                let f = &self.faces[fi];
                let sign = match f.cells {
                    FaceCells::Interior { l, .. } if l == k => -1.0,
                    _ => 1.0,
                };
                sum[0] += sign * f.measure * f.normal[0];
                sum[1] += sign * f.measure * f.normal[1];
                scale = scale.max(f.measure);
            }
            let defect = norm(sum);
            if defect > 1e-10 * scale {
                out.push(Violation::OpenCellBoundary { cell: k, defect });
            }
        }
        out
    }

    /// Writes `cells.csv` (id, x, y, measure) and `faces.csv`
    /// (id, k, l_or_region, measure, distance, transmissibility).
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let mut cells = String::from("id,x,y,measure\n");
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(cells, "{i},{:.16e},{:.16e},{:.16e}", c.center[0], c.center[1], c.measure).unwrap();
        }
        let mut faces = String::from("id,k,l_or_region,measure,distance,transmissibility\n");
        for (i, f) in self.faces.iter().enumerate() {
            let (k, other) = match f.cells {
                FaceCells::Interior { k, l } => (k, l.to_string()),
                FaceCells::Boundary { cell, region } => (cell, self.regions[region].clone()),
            };
            writeln!(
                faces,
                "{i},{k},{other},{:.16e},{:.16e},{:.16e}",
                f.measure, f.distance, f.transmissibility
            )
            .unwrap();
        }
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("cells.csv"), cells)?;
        std::fs::write(dir.join("faces.csv"), faces)?;
        Ok(())
    }
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}
